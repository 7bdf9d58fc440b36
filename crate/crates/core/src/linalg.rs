//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular matrix".into()))
}

/// Ridge least squares `argmin ||A X - B||² + lambda ||X||²` with `lambda`
/// scaled by the mean squared singular value of `A`.
pub fn ridge_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_lambda: f64) -> Result<DMatrix<f64>> {
    let ata = a.transpose() * a;
    let n = ata.nrows();
    let scale = if n == 0 { 0.0 } else { ata.trace() / n as f64 };
    let lambda = rel_lambda * scale.max(f64::MIN_POSITIVE);
    let reg = ata + DMatrix::identity(n, n) * lambda;
    let rhs = a.transpose() * b;
    match reg.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => reg
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("ridge system is singular".into())),
    }
}

/// Top-`k` right singular vectors of `m`, as columns, together with all
/// singular values in decreasing order.
pub fn top_right_singular(m: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let k = k.min(order.len());
    let mut out = DMatrix::zeros(m.ncols(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        for r in 0..m.ncols() {
            out[(r, c)] = v_t[(i, r)];
        }
    }
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    (out, values)
}
