use super::{Embedding, InputScale, TensorTrain};
use crate::error::{argument, shape, Error, Result};
use crate::standardize::Standardizer;

impl TensorTrain {
    /// Fold a standardization into the cores so the result consumes raw
    /// features: `G(0) ← G̃(0) - (μ/σ) G̃(1)`, `G(1) ← G̃(1) / σ`.
    pub fn rescale(&self, s: &Standardizer) -> Result<TensorTrain> {
        if self.embedding != Embedding::Poly1 {
            return Err(Error::UnsupportedEmbedding(format!(
                "rescaling needs poly1 embeddings, found {}",
                self.embedding.name()
            )));
        }
        if self.input_scale != InputScale::Standardized {
            return argument("tensor train already consumes raw inputs");
        }
        if s.len() != self.num_inputs() {
            return shape(format!("standardizer has {} features, tensor train {}", s.len(), self.num_inputs()));
        }
        let mut cores = self.cores.clone();
        for (j, site) in self.input_sites().into_iter().enumerate() {
            let (mu, sigma) = (s.mu[j], s.sigma[j]);
            if mu == 0.0 && sigma == 1.0 {
                continue;
            }
            let core = &mut cores[site];
            for a in 0..core.left {
                for b in 0..core.right {
                    let g0 = core.get(a, 0, b);
                    let g1 = core.get(a, 1, b);
                    core.set(a, 0, b, g0 - (mu / sigma) * g1);
                    core.set(a, 1, b, g1 / sigma);
                }
            }
        }
        TensorTrain::new(cores, self.output_site, InputScale::Raw, self.embedding)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::Core;
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn identity_standardizer_keeps_cores() {
        let tt = random_tt(4, 2, 3);
        let r = tt.rescale(&Standardizer::identity(4)).unwrap();
        assert_eq!(r.flatten(), tt.flatten());
        assert_eq!(r.input_scale(), InputScale::Raw);
    }

    #[test]
    fn single_site_hand_case() {
        let g = Core::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let out = Core::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let tt = TensorTrain::new(vec![g, out], Some(1), InputScale::Standardized, Embedding::Poly1).unwrap();
        let s = Standardizer::new(vec![4.0], vec![2.0]).unwrap();
        let r = tt.rescale(&s).unwrap();
        assert_eq!(r.cores()[0].data(), &[-2.0, 0.5]);
    }

    #[test]
    fn raw_and_standardized_paths_agree() {
        let tt = random_tt(6, 3, 44);
        let mut rng = seed::rng(2);
        let mu: Vec<f64> = (0..6).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sigma: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..4.0)).collect();
        let s = Standardizer::new(mu, sigma).unwrap();
        let r = tt.rescale(&s).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let z = s.transform(&x);
            for y in 0..2 {
                let a = r.evaluate(&x, y).unwrap();
                let b = tt.evaluate(&z, y).unwrap();
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_other_embeddings_and_double_rescaling() {
        let tt = random_tt(2, 2, 1);
        let raw = tt.rescale(&Standardizer::identity(2)).unwrap();
        assert!(matches!(raw.rescale(&Standardizer::identity(2)), Err(Error::Argument(_))));
        let c = |d: usize, r: usize, l: usize| Core::new(l, d, r, vec![1.0; l * d * r]).unwrap();
        let quad = TensorTrain::new(vec![c(3, 1, 1), c(2, 1, 1)], Some(1), InputScale::Standardized, Embedding::Poly2)
            .unwrap();
        assert!(matches!(
            quad.rescale(&Standardizer::identity(1)),
            Err(Error::UnsupportedEmbedding(_))
        ));
    }
}
