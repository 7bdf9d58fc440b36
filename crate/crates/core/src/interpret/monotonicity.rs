//! Observed response rate as a function of predicted score, with
//! percentile-bootstrap intervals.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{argument, Error, Result};
use crate::predictors::Scorer;
use crate::seed;

/// Response rates below this mark the unlikely region.
pub const UNLIKELY: f64 = 0.10;
/// Response rates above this mark the likely region.
pub const LIKELY: f64 = 0.50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    pub mean_score: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCurve {
    /// Occupied bins in score order.
    pub bins: Vec<CurveBin>,
    /// Indices of the equal-width bins that held no sample.
    pub empty_bins: Vec<usize>,
    /// Least-squares line of response on score over all samples.
    pub slope: f64,
    pub intercept: f64,
    /// Scores where the fitted line crosses 10% and 50% response.
    pub unlikely_below: Option<f64>,
    pub likely_above: Option<f64>,
}

impl MonotonicityCurve {
    /// CSV with columns bin_low, bin_high, mean, ci_low, ci_high.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "mean", "ci_low", "ci_high"])?;
        for b in &self.bins {
            w.write_record([b.low, b.high, b.mean, b.ci_low, b.ci_high].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Standalone SVG: bin means with interval whiskers, the fitted line and
    /// the shaded unlikely and likely regions.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, m) = (480.0, 360.0, 48.0);
        let px = |s: f64| m + s.clamp(0.0, 1.0) * (w - 2.0 * m);
        let py = |r: f64| h - m - r.clamp(0.0, 1.0) * (h - 2.0 * m);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        );
        if let Some(t) = self.unlikely_below {
            svg += &format!(
                "<rect x=\"{m}\" y=\"{m}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#dddddd\"/>\n",
                px(t) - m,
                h - 2.0 * m
            );
        }
        if let Some(t) = self.likely_above {
            svg += &format!(
                "<rect x=\"{:.1}\" y=\"{m}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#d8ecd8\"/>\n",
                px(t),
                w - m - px(t),
                h - 2.0 * m
            );
        }
        svg += &format!(
            "<line x1=\"{m}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"black\"/>\n\
             <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{0:.1}\" stroke=\"black\"/>\n",
            h - m,
            w - m
        );
        for k in 0..=4 {
            let v = k as f64 / 4.0;
            svg += &format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{v:.2}</text>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>\n",
                px(v),
                h - m + 14.0,
                m - 4.0,
                py(v) + 3.0
            );
        }
        svg += &format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#c0392b\" stroke-dasharray=\"4 3\"/>\n",
            px(0.0),
            py(self.intercept),
            px(1.0),
            py(self.intercept + self.slope)
        );
        for b in &self.bins {
            let x = px(b.mean_score);
            svg += &format!(
                "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#2c3e50\"/>\n\
                 <circle cx=\"{x:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"#2c3e50\"/>\n",
                py(b.ci_low),
                py(b.ci_high),
                py(b.mean)
            );
        }
        svg += &format!(
            "<text x=\"{:.1}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">predicted score</text>\n\
             <text x=\"14\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">observed response</text>\n</svg>\n",
            w / 2.0,
            escape(title),
            w / 2.0,
            h - 10.0,
            h / 2.0,
            h / 2.0
        );
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Bin samples into `bins` equal-width score bins on [0, 1]; per bin, the
/// observed response rate and a percentile-bootstrap 95% interval from
/// `n_boot` resamples of the bin.
pub fn monotonicity_curve(
    model: &dyn Scorer,
    data: &Dataset,
    bins: usize,
    n_boot: usize,
    seed_value: u64,
) -> Result<MonotonicityCurve> {
    let scores = data.rows().map(|x| model.score(x)).collect::<Result<Vec<_>>>()?;
    curve_from_scores(&scores, data.labels(), bins, n_boot, seed_value)
}

pub fn curve_from_scores(scores: &[f64], labels: &[u8], bins: usize, n_boot: usize, seed_value: u64) -> Result<MonotonicityCurve> {
    if n_boot < 100 {
        return argument(format!("need at least 100 bootstrap resamples, got {n_boot}"));
    }
    if bins == 0 {
        return argument("need at least one bin");
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return argument("monotonicity curves need both classes");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("non-finite score".into()));
    }
    let mut members = vec![Vec::new(); bins];
    for (i, &s) in scores.iter().enumerate() {
        let b = ((s.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        members[b].push(i);
    }
    let mut rng = seed::rng(seed_value);
    let mut out = Vec::new();
    let mut empty = Vec::new();
    for (b, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            empty.push(b);
            continue;
        }
        let ys: Vec<f64> = idx.iter().map(|&i| labels[i] as f64).collect();
        let n = ys.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let mut boots: Vec<f64> = (0..n_boot)
            .map(|_| (0..n).map(|_| ys[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
            .collect();
        boots.sort_by(f64::total_cmp);
        out.push(CurveBin {
            low: b as f64 / bins as f64,
            high: (b + 1) as f64 / bins as f64,
            count: n,
            mean_score: idx.iter().map(|&i| scores[i]).sum::<f64>() / n as f64,
            mean,
            ci_low: percentile(&boots, 0.025).min(mean),
            ci_high: percentile(&boots, 0.975).max(mean),
        });
    }
    if !empty.is_empty() {
        log::info!("{} empty score bins dropped", empty.len());
    }
    let n = scores.len() as f64;
    let ms = scores.iter().sum::<f64>() / n;
    let my = labels.iter().map(|&y| y as f64).sum::<f64>() / n;
    let sxx: f64 = scores.iter().map(|s| (s - ms).powi(2)).sum();
    let sxy: f64 = scores.iter().zip(labels).map(|(s, &y)| (s - ms) * (y as f64 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * ms;
    let cross = |level: f64| (slope > 0.0).then(|| (level - intercept) / slope);
    Ok(MonotonicityCurve {
        bins: out,
        empty_bins: empty,
        slope,
        intercept,
        unlikely_below: cross(UNLIKELY),
        likely_above: cross(LIKELY),
    })
}
