//! Tensor trains: a chain of order-3 cores, one of which carries the class
//! index while every other site is fed through a `[1, x]` embedding.
//!
//! Core `n` has shape `(r_{n-1}, d_n, r_n)` and is stored row-major, so the
//! entry `(a, i, b)` lives at `(a * d_n + i) * r_n + b`.

mod algebra;
mod gauge;
mod io;
mod rescale;

pub use algebra::{Marginal, SiteMeasure};
pub use gauge::MAX_GAUGE_CONDITION;
pub use io::TtDocument;

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};

/// One order-3 core.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    left: usize,
    dim: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, dim: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || dim == 0 || right == 0 {
            return shape(format!("core shape ({left}, {dim}, {right}) has a zero extent"));
        }
        if data.len() != left * dim * right {
            return shape(format!(
                "core ({left}, {dim}, {right}) needs {} values, got {}",
                left * dim * right,
                data.len()
            ));
        }
        Ok(Core { left, dim, right, data })
    }

    pub fn zeros(left: usize, dim: usize, right: usize) -> Self {
        Core { left, dim, right, data: vec![0.0; left * dim * right] }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.dim + i) * self.right + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        self.data[(a * self.dim + i) * self.right + b] = v;
    }

    /// `Σ_i v_i G(:, i, :)` as a row-major `left x right` matrix.
    pub fn contract_phys(&self, v: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.left * self.right];
        for a in 0..self.left {
            for (i, &vi) in v.iter().enumerate() {
                if vi == 0.0 {
                    continue;
                }
                let base = (a * self.dim + i) * self.right;
                for b in 0..self.right {
                    m[a * self.right + b] += vi * self.data[base + b];
                }
            }
        }
        m
    }
}

/// Which feature space the cores expect their inputs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputScale {
    Standardized,
    Raw,
}

/// Local feature map applied at every input site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Embedding {
    /// `φ(x) = [1, x]`.
    Poly1,
    /// `φ(x) = [1, x, x²]`. Evaluation and index algebra only.
    Poly2,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        match self {
            Embedding::Poly1 => 2,
            Embedding::Poly2 => 3,
        }
    }

    pub fn embed(&self, x: f64) -> Vec<f64> {
        match self {
            Embedding::Poly1 => vec![1.0, x],
            Embedding::Poly2 => vec![1.0, x, x * x],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Embedding::Poly1 => "poly1",
            Embedding::Poly2 => "poly2",
        }
    }
}

/// Value used to pin an input site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteValue {
    /// A feature value, passed through the site's embedding.
    Raw(f64),
    /// A basis index of the embedding.
    Index(usize),
    /// An arbitrary vector over the embedding index.
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
    output_site: Option<usize>,
    input_scale: InputScale,
    embedding: Embedding,
}

impl TensorTrain {
    /// Build and validate a tensor train. `output_site = None` gives a plain
    /// tensor that only supports index-level operations.
    pub fn new(
        cores: Vec<Core>,
        output_site: Option<usize>,
        input_scale: InputScale,
        embedding: Embedding,
    ) -> Result<Self> {
        if cores.is_empty() {
            return shape("a tensor train needs at least one core");
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return shape("boundary ranks must be 1");
        }
        for (n, pair) in cores.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return shape(format!(
                    "rank mismatch between core {n} (right {}) and core {} (left {})",
                    pair[0].right,
                    n + 1,
                    pair[1].left
                ));
            }
        }
        if let Some(o) = output_site {
            if o >= cores.len() {
                return shape(format!("output site {o} out of range for {} cores", cores.len()));
            }
            for (n, c) in cores.iter().enumerate() {
                if n != o && c.dim != embedding.dim() {
                    return shape(format!(
                        "input site {n} has dimension {}, embedding needs {}",
                        c.dim,
                        embedding.dim()
                    ));
                }
            }
        }
        if cores.iter().any(|c| c.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("core contains a non-finite value".into()));
        }
        Ok(TensorTrain { cores, output_site, input_scale, embedding })
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    pub fn num_sites(&self) -> usize {
        self.cores.len()
    }

    pub fn output_site(&self) -> Option<usize> {
        self.output_site
    }

    pub fn input_scale(&self) -> InputScale {
        self.input_scale
    }

    pub fn embedding(&self) -> Embedding {
        self.embedding
    }

    /// Bond ranks `r_0 ..= r_N`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.right));
        r
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim).collect()
    }

    /// Number of embedded input sites.
    pub fn num_inputs(&self) -> usize {
        self.cores.len() - usize::from(self.output_site.is_some())
    }

    /// Site index of every input feature, in feature order.
    pub fn input_sites(&self) -> Vec<usize> {
        (0..self.cores.len()).filter(|&n| Some(n) != self.output_site).collect()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.output_site.map(|o| self.cores[o].dim)
    }

    /// All core entries concatenated site by site.
    pub fn flatten(&self) -> Vec<f64> {
        self.cores.iter().flat_map(|c| c.data.iter().copied()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub(crate) fn with_cores(&self, cores: Vec<Core>) -> Result<Self> {
        TensorTrain::new(cores, self.output_site, self.input_scale, self.embedding)
    }

    /// Tensor entry at an index string (one index per site, output included).
    pub fn eval_index(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.cores.len() {
            return shape(format!("{} indices for {} sites", idx.len(), self.cores.len()));
        }
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(idx) {
            if i >= core.dim {
                return shape(format!("index {i} out of range for dimension {}", core.dim));
            }
            v = row_times_slice(&v, core, i);
        }
        Ok(v[0])
    }

    fn check_input(&self, x: &[f64]) -> Result<usize> {
        let out = self
            .output_site
            .ok_or_else(|| Error::Argument("tensor train has no output site".into()))?;
        if x.len() != self.num_inputs() {
            return shape(format!("expected {} features, got {}", self.num_inputs(), x.len()));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("feature {j} is not finite")));
        }
        Ok(out)
    }

    /// Amplitudes `f(x, y)` for every class `y`, from a single left sweep and
    /// a single right sweep around the output site.
    pub fn amplitudes(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.check_input(x)?;
        let mut feat = x.iter();
        let mut left = vec![1.0];
        for core in &self.cores[..out] {
            let phi = self.embedding.embed(*feat.next().expect("checked length"));
            left = row_times_matrix(&left, &core.contract_phys(&phi), core.left, core.right);
        }
        let rest: Vec<f64> = feat.copied().collect();
        let mut right = vec![1.0];
        for (core, &xv) in self.cores[out + 1..].iter().zip(&rest).rev() {
            let phi = self.embedding.embed(xv);
            right = matrix_times_col(&core.contract_phys(&phi), core.left, core.right, &right);
        }
        let oc = &self.cores[out];
        let mut amps = vec![0.0; oc.dim];
        for (y, amp) in amps.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..oc.left {
                if left[a] == 0.0 {
                    continue;
                }
                for b in 0..oc.right {
                    s += left[a] * oc.get(a, y, b) * right[b];
                }
            }
            *amp = s;
        }
        Ok(amps)
    }

    /// `f(x, y)`: the embedded cores multiplied left to right, selecting
    /// class `y` at the output site.
    pub fn evaluate(&self, x: &[f64], y: usize) -> Result<f64> {
        let out = self.check_input(x)?;
        if y >= self.cores[out].dim {
            return shape(format!("class {y} out of range for {} classes", self.cores[out].dim));
        }
        let mut feat = x.iter();
        let mut v = vec![1.0];
        for (n, core) in self.cores.iter().enumerate() {
            if n == out {
                v = row_times_slice(&v, core, y);
            } else {
                let phi = self.embedding.embed(*feat.next().expect("checked length"));
                v = row_times_matrix(&v, &core.contract_phys(&phi), core.left, core.right);
            }
        }
        Ok(v[0])
    }

    /// Born-rule class-1 probability `f(x,1)² / Σ_y f(x,y)²`.
    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        let amps = self.amplitudes(x)?;
        born_probability(&amps)
    }
}

pub(crate) fn born_probability(amps: &[f64]) -> Result<f64> {
    if amps.len() < 2 {
        return shape("Born classification needs at least two classes");
    }
    let total: f64 = amps.iter().map(|a| a * a).sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::Degenerate("all class amplitudes vanish".into()));
    }
    Ok(amps[1] * amps[1] / total)
}

/// `v · G(:, i, :)` for a row vector `v` of length `core.left`.
fn row_times_slice(v: &[f64], core: &Core, i: usize) -> Vec<f64> {
    let mut out = vec![0.0; core.right];
    for (a, &va) in v.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        let base = (a * core.dim + i) * core.right;
        for b in 0..core.right {
            out[b] += va * core.data[base + b];
        }
    }
    out
}

fn row_times_matrix(v: &[f64], m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for a in 0..rows {
        let va = v[a];
        if va == 0.0 {
            continue;
        }
        for b in 0..cols {
            out[b] += va * m[a * cols + b];
        }
    }
    out
}

fn matrix_times_col(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|a| (0..cols).map(|b| m[a * cols + b] * v[b]).sum())
        .collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Random TT with the output core last and uniform rank `r`.
    pub fn random_tt(inputs: usize, r: usize, seed_value: u64) -> TensorTrain {
        let mut rng = seed::rng(seed_value);
        let n = inputs + 1;
        let cores = (0..n)
            .map(|k| {
                let l = if k == 0 { 1 } else { r };
                let rr = if k == n - 1 { 1 } else { r };
                let data = (0..l * 2 * rr).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Core::new(l, 2, rr, data).unwrap()
            })
            .collect();
        TensorTrain::new(cores, Some(n - 1), InputScale::Standardized, Embedding::Poly1).unwrap()
    }

    /// Random plain tensor (no output site) with the given site dimensions.
    pub fn random_plain(dims: &[usize], r: usize, seed_value: u64) -> TensorTrain {
        let mut rng = seed::rng(seed_value);
        let n = dims.len();
        let cores = dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let l = if k == 0 { 1 } else { r };
                let rr = if k == n - 1 { 1 } else { r };
                let data = (0..l * d * rr).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                Core::new(l, d, rr, data).unwrap()
            })
            .collect();
        TensorTrain::new(cores, None, InputScale::Standardized, Embedding::Poly1).unwrap()
    }

    /// Every index string of a tensor with the given dims, first site slowest.
    pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &d in dims {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..d).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Brute-force `f(x, y) = Σ_i W(i) Π φ(i_n, x_n)` over all index strings.
    pub fn brute_force_eval(tt: &TensorTrain, x: &[f64], y: usize) -> f64 {
        let out = tt.output_site().unwrap();
        let dims = tt.dims();
        let mut total = 0.0;
        for idx in all_indices(&dims) {
            if idx[out] != y {
                continue;
            }
            let mut w = tt.eval_index(&idx).unwrap();
            let mut f = 0;
            for (n, &i) in idx.iter().enumerate() {
                if n == out {
                    continue;
                }
                w *= if i == 0 { 1.0 } else { x[f] };
                f += 1;
            }
            total += w;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    fn two_site() -> TensorTrain {
        let g1 = Core::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let g2 = Core::new(1, 2, 1, vec![3.0, 4.0]).unwrap();
        TensorTrain::new(vec![g1, g2], None, InputScale::Raw, Embedding::Poly1).unwrap()
    }

    #[test]
    fn two_site_product() {
        let tt = two_site();
        assert_eq!(tt.eval_index(&[0, 1]).unwrap(), 4.0);
        assert_eq!(tt.eval_index(&[1, 1]).unwrap(), 8.0);
    }

    #[test]
    fn delta_tensor_selects_single_entry() {
        let mk = |hot: usize| {
            let mut d = vec![0.0, 0.0];
            d[hot] = 1.0;
            Core::new(1, 2, 1, d).unwrap()
        };
        let tt = TensorTrain::new(vec![mk(1), mk(0), mk(1)], None, InputScale::Raw, Embedding::Poly1).unwrap();
        for idx in all_indices(&[2, 2, 2]) {
            let expect = if idx == vec![1, 0, 1] { 1.0 } else { 0.0 };
            assert_eq!(tt.eval_index(&idx).unwrap(), expect);
        }
    }

    #[test]
    fn validation_catches_bad_chains() {
        let a = Core::new(1, 2, 2, vec![0.0; 4]).unwrap();
        let b = Core::new(3, 2, 1, vec![0.0; 6]).unwrap();
        assert!(TensorTrain::new(vec![a.clone(), b], None, InputScale::Raw, Embedding::Poly1).is_err());
        assert!(TensorTrain::new(vec![a], None, InputScale::Raw, Embedding::Poly1).is_err());
        let nan = Core::new(1, 2, 1, vec![f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            TensorTrain::new(vec![nan], None, InputScale::Raw, Embedding::Poly1),
            Err(Error::Domain(_))
        ));
        let wide = Core::new(1, 3, 1, vec![0.0; 3]).unwrap();
        let out = Core::new(1, 2, 1, vec![0.0; 2]).unwrap();
        assert!(TensorTrain::new(vec![wide, out], Some(1), InputScale::Raw, Embedding::Poly1).is_err());
    }

    #[test]
    fn evaluation_matches_brute_force_contraction() {
        for s in 0..5 {
            let tt = random_tt(5, 2, 100 + s);
            let x = [0.3, -1.2, 2.0, 0.7, -0.4];
            for y in 0..2 {
                let fast = tt.evaluate(&x, y).unwrap();
                let slow = brute_force_eval(&tt, &x, y);
                assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()), "{fast} vs {slow}");
            }
            let amps = tt.amplitudes(&x).unwrap();
            assert!((amps[0] - tt.evaluate(&x, 0).unwrap()).abs() < 1e-12 * (1.0 + amps[0].abs()));
            assert!((amps[1] - tt.evaluate(&x, 1).unwrap()).abs() < 1e-12 * (1.0 + amps[1].abs()));
        }
    }

    #[test]
    fn evaluation_with_output_in_the_middle() {
        let mut tt = random_tt(4, 3, 7);
        // move the output to site 2 by rebuilding with the same cores
        let cores = tt.clone().into_cores();
        tt = TensorTrain::new(cores, Some(2), InputScale::Raw, Embedding::Poly1).unwrap();
        let x = [0.5, 1.5, -0.5, 2.0];
        for y in 0..2 {
            let fast = tt.evaluate(&x, y).unwrap();
            let slow = brute_force_eval(&tt, &x, y);
            assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
            assert!((tt.amplitudes(&x).unwrap()[y] - fast).abs() <= 1e-12 * (1.0 + fast.abs()));
        }
    }

    #[test]
    fn evaluation_errors() {
        let tt = random_tt(3, 2, 1);
        assert!(matches!(tt.evaluate(&[1.0, 2.0], 0), Err(Error::Shape(_))));
        assert!(matches!(tt.evaluate(&[1.0, f64::INFINITY, 0.0], 0), Err(Error::Domain(_))));
        assert!(matches!(tt.evaluate(&[1.0, 2.0, 0.0], 2), Err(Error::Shape(_))));
        assert!(two_site().evaluate(&[1.0], 0).is_err());
    }

    #[test]
    fn born_rule_cases() {
        assert_eq!(born_probability(&[2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(born_probability(&[0.0, 3.0]).unwrap(), 1.0);
        assert!(matches!(born_probability(&[0.0, 0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn classify_matches_enumerated_born_normalization() {
        for s in 0..10 {
            let tt = random_tt(4, 3, 40 + s);
            let x = [0.1 * s as f64, -0.3, 1.1, 0.6];
            let f0 = brute_force_eval(&tt, &x, 0);
            let f1 = brute_force_eval(&tt, &x, 1);
            let expect = f1 * f1 / (f0 * f0 + f1 * f1);
            assert!((tt.classify(&x).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn flattened_length_counts_every_entry() {
        let tt = random_tt(21, 2, 3);
        assert_eq!(tt.num_sites(), 22);
        assert_eq!(tt.param_count(), 168);
        assert_eq!(tt.flatten().len(), 168);
        assert_eq!(random_tt(21, 5, 3).param_count(), 1020);
    }
}
