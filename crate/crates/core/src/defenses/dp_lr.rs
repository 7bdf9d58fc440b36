//! Output-perturbed logistic regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Gamma, StandardNormal};

use crate::data::Dataset;
use crate::error::{argument, Error, Result};
use crate::nn::sigmoid;
use crate::predictors::logistic::check_two_classes;
use crate::predictors::{DpRecord, LogisticModel, LrHyper};
use crate::seed;
use crate::standardize::Standardizer;

/// Privacy budgets used in experiments.
pub const EPSILON_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

/// Standardized rows with a constant 1 appended, each clipped to unit norm.
fn clipped_rows(data: &Dataset, s: &Standardizer) -> Vec<Vec<f64>> {
    data.rows()
        .map(|r| {
            let mut z = s.transform(r);
            z.push(1.0);
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                z.iter_mut().for_each(|v| *v /= norm);
            }
            z
        })
        .collect()
}

/// Minimizer of `(1/n) Σ log(1 + exp(-y' βᵀx)) + (λ/2)‖β‖²` by Newton's
/// method; the objective is strongly convex so the iteration converges.
fn newton_l2(rows: &[Vec<f64>], labels: &[u8], lambda: f64, max_iter: usize) -> Result<DVector<f64>> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut beta = DVector::zeros(d);
    for _ in 0..max_iter.max(1) {
        let mut g = &beta * lambda;
        let mut h = DMatrix::identity(d, d) * lambda;
        for (x, &y) in rows.iter().zip(labels) {
            let x = DVector::from_column_slice(x);
            let p = sigmoid(beta.dot(&x));
            g += &x * ((p - y as f64) / n);
            h += (&x * x.transpose()) * (p * (1.0 - p) / n);
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Training("L2 logistic Hessian not positive definite".into()))?
            .solve(&g);
        beta -= &step;
        if step.norm() < 1e-13 * (1.0 + beta.norm()) {
            break;
        }
    }
    Ok(beta)
}

/// Per-coordinate standard deviation of the output noise for a parameter
/// vector of length `dim`: the noise norm is Gamma(dim, Δ/ε) with
/// Δ = 2/(nλ), so each coordinate has variance (dim + 1)(Δ/ε)².
pub fn noise_scale(n: usize, lambda: f64, epsilon: f64, dim: usize) -> f64 {
    ((dim + 1) as f64).sqrt() * 2.0 / (n as f64 * lambda * epsilon)
}

/// Noise vector with density proportional to `exp(-‖η‖ ε / Δ)`.
pub fn output_noise(dim: usize, sensitivity: f64, epsilon: f64, rng: &mut seed::Rng) -> Vec<f64> {
    if epsilon.is_infinite() {
        return vec![0.0; dim];
    }
    let norm: f64 = rng.sample(Gamma::new(dim as f64, sensitivity / epsilon).expect("positive gamma parameters"));
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let len = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    dir.into_iter().map(|v| v / len * norm).collect()
}

fn check(data: &Dataset, epsilon: f64, hyper: &LrHyper) -> Result<()> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return argument(format!("privacy budget must be positive, got {epsilon}"));
    }
    hyper.validate()?;
    check_two_classes(data, 2)
}

fn finish(beta: &[f64], s: Standardizer, hyper: &LrHyper, epsilon: f64) -> Result<LogisticModel> {
    let p = s.len();
    let (w, b) = s.rescale_linear(&beta[..p], beta[p]);
    let mut m = LogisticModel::new(w, b, *hyper, s)?;
    m.dp = Some(DpRecord { epsilon: epsilon.is_finite().then_some(epsilon), delta: None, sigma: None, clip: Some(1.0) });
    Ok(m)
}

/// The noiseless optimum `dp_lr_train` perturbs.
pub fn dp_lr_clean(data: &Dataset, hyper: &LrHyper) -> Result<LogisticModel> {
    check(data, f64::INFINITY, hyper)?;
    let s = Standardizer::fit(data);
    let rows = clipped_rows(data, &s);
    let beta = newton_l2(&rows, data.labels(), 1.0 / hyper.c, hyper.max_iter)?;
    finish(beta.as_slice(), s, hyper, f64::INFINITY)
}

/// Standardize, clip rows (with the intercept coordinate) to unit norm, fit
/// L2 logistic regression with λ = 1/C and perturb the parameters.
/// `epsilon = ∞` adds no noise. Class weights are not applied since they
/// would break the sensitivity bound.
pub fn dp_lr_train(data: &Dataset, epsilon: f64, hyper: &LrHyper, seed_value: u64) -> Result<LogisticModel> {
    check(data, epsilon, hyper)?;
    let s = Standardizer::fit(data);
    let rows = clipped_rows(data, &s);
    let lambda = 1.0 / hyper.c;
    let mut beta = newton_l2(&rows, data.labels(), lambda, hyper.max_iter)?;
    let sensitivity = 2.0 / (data.len() as f64 * lambda);
    let noise = output_noise(beta.len(), sensitivity, epsilon, &mut seed::rng(seed_value));
    for (b, e) in beta.iter_mut().zip(noise) {
        *b += e;
    }
    finish(beta.as_slice(), s, hyper, epsilon)
}
