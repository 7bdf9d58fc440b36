use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::{Core, TensorTrain};
use crate::error::{shape, Result};
use crate::linalg;
use crate::seed;

/// Largest condition number accepted for a random gauge matrix.
pub const MAX_GAUGE_CONDITION: f64 = 100.0;

impl TensorTrain {
    /// Insert `M_n M_n⁻¹` on every internal bond: `G_n ← G_n M_n`,
    /// `G_{n+1} ← M_n⁻¹ G_{n+1}`. `mats[n]` acts on the bond between site
    /// `n` and `n+1`.
    pub fn gauge_transform(&self, mats: &[DMatrix<f64>]) -> Result<TensorTrain> {
        let n = self.cores.len();
        if mats.len() + 1 != n {
            return shape(format!("{} gauge matrices for {} internal bonds", mats.len(), n - 1));
        }
        let mut cores = self.cores.clone();
        for (k, m) in mats.iter().enumerate() {
            let r = cores[k].right;
            if m.nrows() != r || m.ncols() != r {
                return shape(format!("bond {k} has rank {r}, gauge is {}x{}", m.nrows(), m.ncols()));
            }
            if m.is_identity(0.0) {
                continue;
            }
            let inv = linalg::inverse(m)?;
            cores[k] = right_multiply(&cores[k], m);
            cores[k + 1] = left_multiply(&inv, &cores[k + 1]);
        }
        self.with_cores(cores)
    }

    /// Gauge transformation with Gaussian bond matrices, redrawn until
    /// their condition number is below [`MAX_GAUGE_CONDITION`].
    pub fn gauge_randomize(&self, seed_value: u64) -> TensorTrain {
        let mut rng = seed::rng(seed_value);
        let mats: Vec<DMatrix<f64>> = self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| loop {
                let r = c.right;
                let m = DMatrix::from_fn(r, r, |_, _| StandardNormal.sample(&mut rng));
                if linalg::condition_number(&m) < MAX_GAUGE_CONDITION {
                    break m;
                }
            })
            .collect();
        self.gauge_transform(&mats).expect("well-conditioned gauges keep shapes")
    }
}

fn right_multiply(core: &Core, m: &DMatrix<f64>) -> Core {
    let mut out = Core::zeros(core.left, core.dim, m.ncols());
    for a in 0..core.left {
        for i in 0..core.dim {
            for b in 0..m.ncols() {
                let s: f64 = (0..core.right).map(|c| core.get(a, i, c) * m[(c, b)]).sum();
                out.set(a, i, b, s);
            }
        }
    }
    out
}

fn left_multiply(m: &DMatrix<f64>, core: &Core) -> Core {
    let mut out = Core::zeros(m.nrows(), core.dim, core.right);
    for a in 0..m.nrows() {
        for i in 0..core.dim {
            for b in 0..core.right {
                let s: f64 = (0..core.left).map(|c| m[(a, c)] * core.get(c, i, b)).sum();
                out.set(a, i, b, s);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use rand::Rng;

    fn l2(a: &[f64]) -> f64 {
        a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_gauge_leaves_cores_untouched() {
        let tt = random_tt(5, 3, 4);
        let mats: Vec<DMatrix<f64>> = tt.cores()[..5].iter().map(|c| DMatrix::identity(c.right(), c.right())).collect();
        let g = tt.gauge_transform(&mats).unwrap();
        assert_eq!(g.flatten(), tt.flatten());
    }

    #[test]
    fn rank_one_gauge_preserves_outputs() {
        let tt = random_tt(6, 1, 12);
        let g = tt.gauge_randomize(5);
        let x = [0.1, 0.2, -0.3, 1.0, 2.0, -1.0];
        for y in 0..2 {
            let a = tt.evaluate(&x, y).unwrap();
            let b = g.evaluate(&x, y).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn random_gauge_preserves_evaluations_and_moves_parameters() {
        let tt = random_tt(21, 2, 77);
        let g = tt.gauge_randomize(123);
        let mut rng = seed::rng(9);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..21).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for y in 0..2 {
                let a = tt.evaluate(&x, y).unwrap();
                let b = g.evaluate(&x, y).unwrap();
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
            }
        }
        let diff: Vec<f64> = tt.flatten().iter().zip(g.flatten()).map(|(a, b)| a - b).collect();
        assert!(l2(&diff) >= 0.01 * l2(&tt.flatten()));
    }

    #[test]
    fn gauge_seed_is_reproducible() {
        let tt = random_tt(4, 3, 1);
        assert_eq!(tt.gauge_randomize(8).flatten(), tt.gauge_randomize(8).flatten());
        assert_ne!(tt.gauge_randomize(8).flatten(), tt.gauge_randomize(9).flatten());
    }

    #[test]
    fn wrong_gauge_shapes_are_rejected() {
        let tt = random_tt(3, 2, 1);
        assert!(tt.gauge_transform(&[DMatrix::identity(2, 2)]).is_err());
        let bad = vec![DMatrix::identity(3, 3); 3];
        assert!(tt.gauge_transform(&bad).is_err());
    }
}
