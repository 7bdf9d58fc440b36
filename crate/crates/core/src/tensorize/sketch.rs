//! Pivot-sketched tensor-train construction.
//!
//! Works in standardized coordinates. Every input site is probed at two
//! nodes (`±1` for continuous features, the images of raw 0 and 1 for
//! binary ones), so the cores interpolate the target affinely in each
//! feature. For site `n` the target is evaluated on every
//! (pivot prefix, node, pivot suffix) triple; the suffix directions are
//! compressed to the top right singular vectors of the bond unfolding, and
//! the core is the ridge solution against the left environments of the
//! cores already built.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::oracle::Oracle;
use crate::error::{argument, Error, Result};
use crate::linalg;
use crate::standardize::Standardizer;
use crate::tt::{Core, Embedding, InputScale, TensorTrain};

/// Relative singular-value floor below which bond directions are dropped.
pub const RANK_TOL: f64 = 1e-12;

/// Vector-valued target sampled by the sketch: one amplitude per class.
pub trait AmplitudeSource: Send + Sync {
    fn classes(&self) -> usize;
    fn amplitudes(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Born-compatible view of a score oracle: `[√(1-s), √s]`.
pub struct BornSource<O>(pub O);

impl<O: Oracle> AmplitudeSource for BornSource<O> {
    fn classes(&self) -> usize {
        2
    }

    fn amplitudes(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = self.0.query(x)?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Oracle(format!("oracle returned {s}, expected a probability")));
        }
        Ok(vec![(1.0 - s).sqrt(), s.sqrt()])
    }
}

/// Arbitrary vector-valued function.
pub struct FnSource<F> {
    pub classes: usize,
    pub f: F,
}

impl<F> AmplitudeSource for FnSource<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn classes(&self) -> usize {
        self.classes
    }

    fn amplitudes(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchReport {
    /// Bond ranks actually supported by the sketch before zero padding.
    pub effective_ranks: Vec<usize>,
    pub queries: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    pub rank: usize,
    pub ridge: f64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig { rank: 2, ridge: 1e-8 }
    }
}

/// Upper bound on target evaluations for `p` pivots and `n` inputs with
/// local dimension `d = 2`: `2 p² n d`.
pub fn query_budget(p: usize, n: usize) -> u64 {
    2 * (p as u64).pow(2) * n as u64 * 2
}

/// Interpolation nodes per feature in standardized coordinates.
pub fn nodes(s: &Standardizer, binary: &[bool]) -> Vec<[f64; 2]> {
    (0..s.len())
        .map(|j| {
            if binary[j] {
                [(0.0 - s.mu[j]) / s.sigma[j], (1.0 - s.mu[j]) / s.sigma[j]]
            } else {
                [-1.0, 1.0]
            }
        })
        .collect()
}

/// Build a tensor train on standardized inputs from raw-scale pivots.
/// The output core is the last site.
pub fn sketch_build(
    source: &dyn AmplitudeSource,
    pivots: &[Vec<f64>],
    s: &Standardizer,
    binary: &[bool],
    cfg: &SketchConfig,
) -> Result<(TensorTrain, SketchReport)> {
    let p = pivots.len();
    let n = s.len();
    if p == 0 || n == 0 {
        return argument("sketch needs at least one pivot and one feature");
    }
    if cfg.rank == 0 || p < cfg.rank {
        return argument(format!("{p} pivots cannot support rank {}", cfg.rank));
    }
    if binary.len() != n || pivots.iter().any(|x| x.len() != n) {
        return Err(Error::Shape("pivot and feature counts disagree".into()));
    }
    let c = source.classes();
    let z: Vec<Vec<f64>> = pivots.iter().map(|x| s.transform(x)).collect();
    let node = nodes(s, binary);
    let query = |xz: &[f64]| -> Result<Vec<f64>> {
        let a = source.amplitudes(&s.inverse(xz))?;
        if a.len() != c || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle("amplitude source returned a malformed vector".into()));
        }
        Ok(a)
    };
    let mut queries = 0u64;

    // left environments at pivot prefixes, P x r_{n-1}
    let mut env = DMatrix::from_element(p, 1, 1.0);
    let mut node_cores: Vec<[DMatrix<f64>; 2]> = Vec::with_capacity(n);
    let mut effective = Vec::with_capacity(n);
    for site in 0..n {
        let prefixes = if site == 0 { 1 } else { p };
        let suffixes = if site + 1 == n { 1 } else { p };
        let jobs: Vec<(usize, usize, usize)> = (0..prefixes)
            .flat_map(|k| (0..2).flat_map(move |t| (0..suffixes).map(move |l| (k, t, l))))
            .collect();
        let vals: Vec<Vec<f64>> = jobs
            .par_iter()
            .map(|&(k, t, l)| {
                let mut x = Vec::with_capacity(n);
                x.extend_from_slice(&z[k][..site]);
                x.push(node[site][t]);
                x.extend_from_slice(&z[l][site + 1..]);
                query(&x)
            })
            .collect::<Result<_>>()?;
        queries += jobs.len() as u64;
        let b_at = |k: usize, t: usize, l: usize| -> &Vec<f64> {
            let k = if prefixes == 1 { 0 } else { k };
            &vals[(k * 2 + t) * suffixes + l]
        };

        // bond unfolding [pivot prefix incl. site value] x [suffix, class]
        let cols = suffixes * c;
        let (t0, t1) = (node[site][0], node[site][1]);
        let mut unfold = DMatrix::zeros(p, cols);
        for k in 0..p {
            let w1 = (z[k][site] - t0) / (t1 - t0);
            for l in 0..suffixes {
                let (a, b) = (b_at(k, 0, l), b_at(k, 1, l));
                for y in 0..c {
                    unfold[(k, l * c + y)] = (1.0 - w1) * a[y] + w1 * b[y];
                }
            }
        }
        let (v, sv) = linalg::top_right_singular(&unfold, cfg.rank.min(cols));
        let top = sv.first().copied().unwrap_or(0.0);
        let keep = if top > 0.0 {
            sv.iter().take(v.ncols()).filter(|&&x| x > RANK_TOL * top).count().max(1)
        } else {
            1
        };
        if keep < cfg.rank {
            log::debug!("bond {site}: rank reduced to {keep}");
        }
        let v = v.columns(0, keep).into_owned();
        effective.push(keep);

        // projected node evaluations and the core solve
        let mut solved: Vec<DMatrix<f64>> = Vec::with_capacity(2);
        for t in 0..2 {
            let mut rhs = DMatrix::zeros(p, keep);
            for k in 0..p {
                for l in 0..suffixes {
                    let a = b_at(k, t, l);
                    for y in 0..c {
                        for col in 0..keep {
                            rhs[(k, col)] += a[y] * v[(l * c + y, col)];
                        }
                    }
                }
            }
            solved.push(linalg::ridge_solve(&env, &rhs, cfg.ridge)?);
        }
        let g = [solved[0].clone(), solved[1].clone()];

        let mut next = DMatrix::zeros(p, keep);
        for k in 0..p {
            let w1 = (z[k][site] - t0) / (t1 - t0);
            let local = &g[0] * (1.0 - w1) + &g[1] * w1;
            let row = env.row(k) * local;
            next.set_row(k, &row);
        }
        env = next;
        node_cores.push(g);
    }

    // output core fitted to the pivots themselves
    let targets: Vec<Vec<f64>> = z.par_iter().map(|x| query(x)).collect::<Result<_>>()?;
    queries += p as u64;
    let rhs = DMatrix::from_fn(p, c, |k, y| targets[k][y]);
    let out = linalg::ridge_solve(&env, &rhs, cfg.ridge)?;

    let tt = assemble(&node_cores, &node, &out, cfg.rank)?;
    Ok((tt, SketchReport { effective_ranks: effective, queries }))
}

/// Convert node-valued cores to the `[1, x]` basis and zero-pad every bond
/// to the configured rank.
fn assemble(node_cores: &[[DMatrix<f64>; 2]], node: &[[f64; 2]], out: &DMatrix<f64>, rank: usize) -> Result<TensorTrain> {
    let n = node_cores.len();
    let mut cores = Vec::with_capacity(n + 1);
    for (site, g) in node_cores.iter().enumerate() {
        let (t0, t1) = (node[site][0], node[site][1]);
        let g1 = (&g[1] - &g[0]) / (t1 - t0);
        let g0 = &g[0] - &g1 * t0;
        let left = if site == 0 { 1 } else { rank };
        let mut core = Core::zeros(left, 2, rank);
        for a in 0..g0.nrows() {
            for b in 0..g0.ncols() {
                core.set(a, 0, b, g0[(a, b)]);
                core.set(a, 1, b, g1[(a, b)]);
            }
        }
        cores.push(core);
    }
    let mut oc = Core::zeros(rank, out.ncols(), 1);
    for a in 0..out.nrows() {
        for y in 0..out.ncols() {
            oc.set(a, y, 0, out[(a, y)]);
        }
    }
    cores.push(oc);
    TensorTrain::new(cores, Some(n), InputScale::Standardized, Embedding::Poly1)
}
