//! HTTP prediction endpoint returning rounded probabilities.
//!
//! Requests are counted, never logged individually: the endpoint is the
//! surface an adversary probes.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::cohorts::{CANCER_TYPES, FEATURES, TYPE_OFFSET};
use crate::error::{argument, Error, Result};
use crate::predictors::Scorer;

/// Query parameters in feature order, before the one-hot type.
pub const NUMERIC_FIELDS: [&str; 5] = ["tmb", "psth", "albumin", "nlr", "age"];
pub const TYPE_FIELD: &str = "cancer_type";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeOptions {
    pub decimals: u32,
    /// Monotone `(score, displayed)` points applied before rounding.
    pub display_map: Option<Vec<(f64, f64)>>,
    pub threads: usize,
}

impl ServeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.decimals < 1 || self.decimals > 15 {
            return argument(format!("decimals must be in 1..=15, got {}", self.decimals));
        }
        if self.threads == 0 {
            return argument("at least one serving thread is required");
        }
        if let Some(m) = &self.display_map {
            if m.len() < 2 {
                return argument("display map needs at least two points");
            }
            if m.iter().any(|(s, d)| !s.is_finite() || !d.is_finite()) {
                return argument("display map has non-finite points");
            }
            if m.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                return argument("display map must be increasing in score and non-decreasing in display");
            }
        }
        Ok(())
    }

    /// The value a client sees for score `p`.
    pub fn present(&self, p: f64) -> f64 {
        let shown = self.display_map.as_deref().map_or(p, |m| apply_display(m, p));
        round_to(shown, self.decimals)
    }
}

/// Piecewise-linear display map, constant beyond its end points.
pub fn apply_display(map: &[(f64, f64)], p: f64) -> f64 {
    let (first, last) = (map[0], map[map.len() - 1]);
    if p <= first.0 {
        return first.1;
    }
    if p >= last.0 {
        return last.1;
    }
    let k = map.iter().position(|m| m.0 >= p).expect("inside the map");
    let (a, b) = (map[k - 1], map[k]);
    a.1 + (b.1 - a.1) * (p - a.0) / (b.0 - a.0)
}

pub fn round_to(p: f64, decimals: u32) -> f64 {
    let s = 10f64.powi(decimals as i32);
    (p * s).round() / s
}

/// Rejected query: the offending field and why.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryError {
    pub field: String,
    pub message: String,
}

/// Parse a `/predict` query string into a schema row.
pub fn parse_query(query: &str) -> std::result::Result<Vec<f64>, QueryError> {
    let err = |field: &str, message: &str| QueryError { field: field.into(), message: message.into() };
    let mut values: [Option<&str>; 6] = [None; 6];
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        let slot = NUMERIC_FIELDS
            .iter()
            .chain(std::iter::once(&TYPE_FIELD))
            .position(|f| *f == k)
            .ok_or_else(|| err(k, "unknown parameter"))?;
        if values[slot].replace(v).is_some() {
            return Err(err(k, "repeated parameter"));
        }
    }
    let mut row = vec![0.0; FEATURES];
    for (j, f) in NUMERIC_FIELDS.iter().enumerate() {
        let v = values[j].ok_or_else(|| err(f, "missing"))?;
        row[j] = v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| err(f, "not a finite number"))?;
    }
    let t = values[5].ok_or_else(|| err(TYPE_FIELD, "missing"))?;
    let t: usize = t.parse().map_err(|_| err(TYPE_FIELD, "not an integer"))?;
    if !(1..=CANCER_TYPES).contains(&t) {
        return Err(err(TYPE_FIELD, "out of range 1..=16"));
    }
    row[TYPE_OFFSET + t - 1] = 1.0;
    Ok(row)
}

#[derive(Debug, Default)]
pub struct RequestCounts {
    pub ok: AtomicU64,
    pub rejected: AtomicU64,
    pub failed: AtomicU64,
}

/// A running endpoint. Dropping it without [`Server::shutdown`] leaves the
/// worker threads serving until the process exits.
pub struct Server {
    http: Arc<tiny_http::Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
    counts: Arc<RequestCounts>,
}

impl Server {
    pub fn start(model: Arc<dyn Scorer>, opts: ServeOptions, bind: &str) -> Result<Server> {
        opts.validate()?;
        let http = tiny_http::Server::http(bind).map_err(|e| Error::Io(std::io::Error::other(format!("bind {bind}: {e}"))))?;
        let addr = http
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Argument(format!("{bind} is not an IP address")))?;
        let http = Arc::new(http);
        let counts = Arc::new(RequestCounts::default());
        let opts = Arc::new(opts);
        let workers = (0..opts.threads)
            .map(|_| {
                let (http, model, opts, counts) = (http.clone(), model.clone(), opts.clone(), counts.clone());
                std::thread::spawn(move || {
                    for req in http.incoming_requests() {
                        let (status, body) = respond(&req, model.as_ref(), &opts, &counts);
                        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
                        let resp = tiny_http::Response::from_string(body).with_status_code(status).with_header(header);
                        let _ = req.respond(resp);
                    }
                })
            })
            .collect();
        Ok(Server { http, addr, workers, counts })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        let c = &self.counts;
        (c.ok.load(Ordering::Relaxed), c.rejected.load(Ordering::Relaxed), c.failed.load(Ordering::Relaxed))
    }

    /// Block until the worker threads exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        self.http.unblock();
        for _ in 1..self.workers.len() {
            self.http.unblock();
        }
        let (ok, rejected, failed) = self.counts();
        log::info!("served {ok} predictions, rejected {rejected} requests, {failed} failures");
        self.join();
    }
}

fn json_error(field: Option<&str>, message: &str) -> String {
    let mut v = serde_json::json!({ "error": message });
    if let Some(f) = field {
        v["field"] = serde_json::Value::from(f);
    }
    v.to_string()
}

fn respond(req: &tiny_http::Request, model: &dyn Scorer, opts: &ServeOptions, counts: &RequestCounts) -> (u16, String) {
    let (path, query) = req.url().split_once('?').unwrap_or((req.url(), ""));
    if *req.method() != tiny_http::Method::Get {
        counts.rejected.fetch_add(1, Ordering::Relaxed);
        return (405, json_error(None, "only GET is supported"));
    }
    match path {
        "/health" => (200, "{\"status\":\"ok\"}".into()),
        "/predict" => match parse_query(query) {
            Err(e) => {
                counts.rejected.fetch_add(1, Ordering::Relaxed);
                (400, json_error(Some(&e.field), &format!("{}: {}", e.field, e.message)))
            }
            Ok(row) => match model.score(&row) {
                Ok(p) if p.is_finite() => {
                    counts.ok.fetch_add(1, Ordering::Relaxed);
                    let shown = opts.present(p);
                    (200, format!("{{\"probability\":{shown:.prec$}}}", prec = opts.decimals as usize))
                }
                Ok(_) => {
                    counts.failed.fetch_add(1, Ordering::Relaxed);
                    (500, json_error(None, "model returned a non-finite score"))
                }
                Err(e) => {
                    counts.failed.fetch_add(1, Ordering::Relaxed);
                    (500, json_error(None, e.kind()))
                }
            },
        },
        _ => {
            counts.rejected.fetch_add(1, Ordering::Relaxed);
            (404, json_error(None, "not found"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: &str = "tmb=3.5&psth=1&albumin=4.1&nlr=2.2&age=61&cancer_type=3";

    #[test]
    fn parses_a_full_query() {
        let row = parse_query(Q).unwrap();
        assert_eq!(&row[..5], &[3.5, 1.0, 4.1, 2.2, 61.0]);
        assert_eq!(row[TYPE_OFFSET + 2], 1.0);
        assert_eq!(row.iter().skip(TYPE_OFFSET).sum::<f64>(), 1.0);
    }

    #[test]
    fn rejections_name_the_field() {
        let cases = [
            ("psth=1&albumin=4&nlr=2&age=61&cancer_type=3", "tmb"),
            ("tmb=x&psth=1&albumin=4&nlr=2&age=61&cancer_type=3", "tmb"),
            ("tmb=1&psth=1&albumin=NaN&nlr=2&age=61&cancer_type=3", "albumin"),
            ("tmb=1&psth=1&albumin=4&nlr=2&age=61&cancer_type=17", "cancer_type"),
            ("tmb=1&psth=1&albumin=4&nlr=2&age=61&cancer_type=0", "cancer_type"),
            ("tmb=1&psth=1&albumin=4&nlr=2&age=61&cancer_type=2&zz=1", "zz"),
            ("tmb=1&tmb=2&psth=1&albumin=4&nlr=2&age=61&cancer_type=2", "tmb"),
        ];
        for (q, field) in cases {
            assert_eq!(parse_query(q).unwrap_err().field, field, "{q}");
        }
    }

    #[test]
    fn rounding_and_display_map() {
        assert_eq!(round_to(0.123456, 4), 0.1235);
        let opts = ServeOptions { decimals: 2, display_map: Some(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]), threads: 1 };
        opts.validate().unwrap();
        assert_eq!(opts.present(0.25), 0.4);
        assert_eq!(opts.present(0.75), 0.9);
        let bad = ServeOptions { display_map: Some(vec![(0.0, 0.5), (1.0, 0.2)]), ..opts.clone() };
        assert!(bad.validate().is_err());
        assert!(ServeOptions { decimals: 0, ..opts }.validate().is_err());
    }

    #[test]
    fn constant_model_over_http() {
        let model: Arc<dyn Scorer> = Arc::new(|_: &[f64]| 0.7);
        let opts = ServeOptions { decimals: 2, display_map: None, threads: 2 };
        let server = Server::start(model, opts, "127.0.0.1:0").unwrap();
        let agent = ureq::agent();
        let body = agent.get(&format!("{}/predict?{Q}", server.url())).call().unwrap().into_string().unwrap();
        assert_eq!(body, "{\"probability\":0.70}");
        assert_eq!(agent.get(&format!("{}/health", server.url())).call().unwrap().status(), 200);
        match agent.get(&format!("{}/predict?tmb=1", server.url())).call() {
            Err(ureq::Error::Status(400, r)) => assert!(r.into_string().unwrap().contains("\"field\":\"psth\"")),
            other => panic!("expected 400, got {other:?}"),
        }
        assert_eq!(server.counts(), (1, 1, 0));
        server.shutdown();
    }
}
