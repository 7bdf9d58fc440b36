//! Squared-norm contractions: partition functions, marginals and
//! conditioning.

use nalgebra::DMatrix;

use super::{Core, SiteValue, TensorTrain};
use crate::error::{argument, shape, Error, Result};

/// How a site enters a doubled (`T ⊗ T`) contraction.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteMeasure {
    /// Sum over every index with unit weight.
    Uniform,
    /// Sum `Σ_ij W_ij G(i) ⊗ G(j)` with a `d x d` weight, row-major.
    Gram(Vec<f64>),
    /// Pin the index on both copies.
    Index(usize),
    /// Contract both copies with the same vector.
    Point(Vec<f64>),
}

/// Unnormalized marginal over a set of kept sites, first kept site slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub sites: Vec<usize>,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl Marginal {
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut flat = 0;
        for (i, d) in idx.iter().zip(&self.dims) {
            flat = flat * d + i;
        }
        self.values[flat]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        let z = self.total();
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::Degenerate("marginal has zero mass".into()));
        }
        Ok(self.values.iter().map(|v| v / z).collect())
    }
}

impl Core {
    /// Slice `G(:, i, :)` as a `left x right` matrix.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.get(a, i, b))
    }

    fn weighted_slice(&self, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left, self.right, &self.contract_phys(v))
    }

    /// Doubled transfer step `E ← Σ_ij W_ij G(i)ᵀ E G(j)`.
    fn transfer(&self, env: &DMatrix<f64>, m: &SiteMeasure) -> Result<DMatrix<f64>> {
        Ok(match m {
            SiteMeasure::Uniform => {
                let mut out = DMatrix::zeros(self.right, self.right);
                for i in 0..self.dim {
                    let g = self.slice(i);
                    out += g.transpose() * env * &g;
                }
                out
            }
            SiteMeasure::Gram(w) => {
                if w.len() != self.dim * self.dim {
                    return shape(format!(
                        "weight has {} entries for a site of dimension {}",
                        w.len(),
                        self.dim
                    ));
                }
                let slices: Vec<DMatrix<f64>> = (0..self.dim).map(|i| self.slice(i)).collect();
                let eg: Vec<DMatrix<f64>> = slices.iter().map(|g| env * g).collect();
                let mut out = DMatrix::zeros(self.right, self.right);
                for i in 0..self.dim {
                    let mut acc = DMatrix::zeros(self.left, self.right);
                    for j in 0..self.dim {
                        let wij = w[i * self.dim + j];
                        if wij != 0.0 {
                            acc += &eg[j] * wij;
                        }
                    }
                    out += slices[i].transpose() * acc;
                }
                out
            }
            SiteMeasure::Index(i) => {
                if *i >= self.dim {
                    return shape(format!("index {i} out of range for dimension {}", self.dim));
                }
                let g = self.slice(*i);
                g.transpose() * env * g
            }
            SiteMeasure::Point(v) => {
                if v.len() != self.dim {
                    return shape(format!("vector of length {} for dimension {}", v.len(), self.dim));
                }
                let g = self.weighted_slice(v);
                g.transpose() * env * g
            }
        })
    }
}

impl TensorTrain {
    /// `Σ_i Π_n W_n(i_n, j_n) T(i) T(j)` for one measure per site.
    pub fn contract_squared(&self, measures: &[SiteMeasure]) -> Result<f64> {
        if measures.len() != self.cores.len() {
            return shape(format!("{} measures for {} sites", measures.len(), self.cores.len()));
        }
        let mut env = DMatrix::from_element(1, 1, 1.0);
        for (core, m) in self.cores.iter().zip(measures) {
            env = core.transfer(&env, m)?;
        }
        Ok(env[(0, 0)])
    }

    /// `Σ_i Π_n v_n(i_n) T(i)`: every site contracted with its own vector.
    pub fn contract_linear(&self, vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.len() != self.cores.len() {
            return shape(format!("{} vectors for {} sites", vectors.len(), self.cores.len()));
        }
        let mut env = DMatrix::from_element(1, 1, 1.0);
        for (core, v) in self.cores.iter().zip(vectors) {
            if v.len() != core.dim {
                return shape(format!("vector of length {} for dimension {}", v.len(), core.dim));
            }
            env = env * core.weighted_slice(v);
        }
        Ok(env[(0, 0)])
    }

    /// `Z = Σ_i |T(i)|²` over every index string.
    pub fn partition(&self) -> f64 {
        let m = vec![SiteMeasure::Uniform; self.cores.len()];
        self.contract_squared(&m).expect("uniform measures always fit")
    }

    /// Unnormalized marginal `Σ_rest |T|²` over the kept sites.
    pub fn marginal(&self, keep: &[usize]) -> Result<Marginal> {
        let m = vec![SiteMeasure::Uniform; self.cores.len()];
        self.marginal_weighted(keep, &m)
    }

    /// Marginal where every non-kept site is summed with its own measure;
    /// the measures given for kept sites are ignored.
    pub fn marginal_weighted(&self, keep: &[usize], measures: &[SiteMeasure]) -> Result<Marginal> {
        if keep.is_empty() {
            return argument("marginal needs at least one kept site");
        }
        if measures.len() != self.cores.len() {
            return shape(format!("{} measures for {} sites", measures.len(), self.cores.len()));
        }
        let mut sites = keep.to_vec();
        sites.sort_unstable();
        sites.dedup();
        if let Some(&s) = sites.iter().find(|&&s| s >= self.cores.len()) {
            return shape(format!("site {s} out of range for {} sites", self.cores.len()));
        }
        let dims: Vec<usize> = sites.iter().map(|&s| self.cores[s].dim).collect();

        // right environments of the suffix after the last kept site
        let last = *sites.last().expect("nonempty");
        let mut right = DMatrix::from_element(1, 1, 1.0);
        for n in (last + 1..self.cores.len()).rev() {
            right = self.cores[n].transfer_right(&right, &measures[n])?;
        }

        let mut values = Vec::with_capacity(dims.iter().product());
        let start = DMatrix::from_element(1, 1, 1.0);
        self.marginal_dfs(&sites, 0, 0, start, measures, &right, &mut values)?;
        Ok(Marginal { sites, dims, values })
    }

    #[allow(clippy::too_many_arguments)]
    fn marginal_dfs(
        &self,
        sites: &[usize],
        k: usize,
        from: usize,
        mut env: DMatrix<f64>,
        measures: &[SiteMeasure],
        right: &DMatrix<f64>,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if k == sites.len() {
            out.push(env.component_mul(right).sum());
            return Ok(());
        }
        let site = sites[k];
        for n in from..site {
            env = self.cores[n].transfer(&env, &measures[n])?;
        }
        for i in 0..self.cores[site].dim {
            let next = self.cores[site].transfer(&env, &SiteMeasure::Index(i))?;
            self.marginal_dfs(sites, k + 1, site + 1, next, measures, right, out)?;
        }
        Ok(())
    }

    /// Pin one input site and absorb it into a neighbour, leaving `N-1`
    /// cores. Site 0 is absorbed to the right, every other site to the left.
    pub fn condition(&self, site: usize, value: &SiteValue) -> Result<TensorTrain> {
        if site >= self.cores.len() {
            return shape(format!("site {site} out of range for {} sites", self.cores.len()));
        }
        if Some(site) == self.output_site {
            return argument("the output site cannot be conditioned");
        }
        if self.cores.len() < 2 {
            return argument("conditioning needs at least two sites");
        }
        let core = &self.cores[site];
        let v = match value {
            SiteValue::Raw(x) => {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("conditioning value {x} is not finite")));
                }
                self.embedding.embed(*x)
            }
            SiteValue::Index(i) => {
                if *i >= core.dim {
                    return shape(format!("index {i} out of range for dimension {}", core.dim));
                }
                let mut e = vec![0.0; core.dim];
                e[*i] = 1.0;
                e
            }
            SiteValue::Vector(v) => {
                if v.len() != core.dim {
                    return shape(format!("vector of length {} for dimension {}", v.len(), core.dim));
                }
                v.clone()
            }
        };
        let m = core.weighted_slice(&v);
        let mut cores = self.cores.clone();
        if site > 0 {
            let prev = &cores[site - 1];
            let mut merged = Core::zeros(prev.left, prev.dim, m.ncols());
            for a in 0..prev.left {
                for i in 0..prev.dim {
                    for b in 0..m.ncols() {
                        let s: f64 = (0..prev.right).map(|c| prev.get(a, i, c) * m[(c, b)]).sum();
                        merged.set(a, i, b, s);
                    }
                }
            }
            cores[site - 1] = merged;
        } else {
            let next = &cores[1];
            let mut merged = Core::zeros(m.nrows(), next.dim, next.right);
            for a in 0..m.nrows() {
                for i in 0..next.dim {
                    for b in 0..next.right {
                        let s: f64 = (0..next.left).map(|c| m[(a, c)] * next.get(c, i, b)).sum();
                        merged.set(a, i, b, s);
                    }
                }
            }
            cores[1] = merged;
        }
        cores.remove(site);
        let output_site = self.output_site.map(|o| if o > site { o - 1 } else { o });
        TensorTrain::new(cores, output_site, self.input_scale, self.embedding)
    }

    /// Condition several sites at once; sites refer to the original layout.
    pub fn condition_many(&self, fixed: &[(usize, SiteValue)]) -> Result<TensorTrain> {
        let mut order: Vec<&(usize, SiteValue)> = fixed.iter().collect();
        order.sort_by(|a, b| b.0.cmp(&a.0));
        if order.windows(2).any(|w| w[0].0 == w[1].0) {
            return argument("a site is conditioned twice");
        }
        let mut tt = self.clone();
        for (site, value) in order {
            tt = tt.condition(*site, value)?;
        }
        Ok(tt)
    }

    /// Site holding input feature `j`.
    pub fn feature_site(&self, j: usize) -> Result<usize> {
        self.input_sites()
            .get(j)
            .copied()
            .ok_or_else(|| Error::Shape(format!("feature {j} out of range for {} inputs", self.num_inputs())))
    }
}

impl Core {
    /// Right-to-left doubled transfer `E ← Σ_ij W_ij G(i) E G(j)ᵀ`.
    fn transfer_right(&self, env: &DMatrix<f64>, m: &SiteMeasure) -> Result<DMatrix<f64>> {
        // Reuse the left transfer on the mirrored core.
        let mut mirrored = Core::zeros(self.right, self.dim, self.left);
        for a in 0..self.left {
            for i in 0..self.dim {
                for b in 0..self.right {
                    mirrored.set(b, i, a, self.get(a, i, b));
                }
            }
        }
        mirrored.transfer(env, m)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{Embedding, InputScale};
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    fn brute_partition(tt: &TensorTrain) -> f64 {
        all_indices(&tt.dims()).iter().map(|i| tt.eval_index(i).unwrap().powi(2)).sum()
    }

    #[test]
    fn partition_of_two_site_product() {
        let g1 = Core::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let g2 = Core::new(1, 2, 1, vec![3.0, 4.0]).unwrap();
        let tt = TensorTrain::new(vec![g1, g2], None, InputScale::Raw, Embedding::Poly1).unwrap();
        assert!((tt.partition() - 125.0).abs() < 1e-12);
    }

    #[test]
    fn linear_contraction_matches_enumeration() {
        let tt = random_plain(&[2, 3, 2, 2], 3, 21);
        let vs = vec![vec![0.3, -1.0], vec![1.0, 0.5, 2.0], vec![1.0, 1.0], vec![-0.7, 0.2]];
        let brute: f64 = all_indices(&tt.dims())
            .iter()
            .map(|i| tt.eval_index(i).unwrap() * i.iter().zip(&vs).map(|(&k, v)| v[k]).product::<f64>())
            .sum();
        assert!(rel_close(tt.contract_linear(&vs).unwrap(), brute, 1e-12));
        assert!(tt.contract_linear(&vs[..3]).is_err());
    }

    #[test]
    fn partition_of_delta_tensor_is_one() {
        let c = Core::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let tt = TensorTrain::new(vec![c.clone(), c.clone(), c], None, InputScale::Raw, Embedding::Poly1).unwrap();
        assert_eq!(tt.partition(), 1.0);
    }

    #[test]
    fn partition_matches_enumeration() {
        for s in 0..20 {
            let tt = random_plain(&[2; 8], 1 + (s as usize % 4), s);
            assert!(rel_close(tt.partition(), brute_partition(&tt), 1e-10));
        }
    }

    #[test]
    fn marginal_matches_double_sum() {
        let tt = random_plain(&[2; 6], 3, 17);
        let m = tt.marginal(&[5, 2]).unwrap();
        assert_eq!(m.sites, vec![2, 5]);
        for a in 0..2 {
            for b in 0..2 {
                let expect: f64 = all_indices(&tt.dims())
                    .iter()
                    .filter(|i| i[2] == a && i[5] == b)
                    .map(|i| tt.eval_index(i).unwrap().powi(2))
                    .sum();
                assert!(rel_close(m.get(&[a, b]), expect, 1e-10));
            }
        }
        let p = m.normalized().unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn keeping_all_sites_gives_squared_entries() {
        let tt = random_plain(&[2, 3, 2], 2, 5);
        let m = tt.marginal(&[0, 1, 2]).unwrap();
        for idx in all_indices(&[2, 3, 2]) {
            assert!(rel_close(m.get(&idx), tt.eval_index(&idx).unwrap().powi(2), 1e-12));
        }
    }

    #[test]
    fn uniform_tensor_has_uniform_marginal() {
        let c = Core::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let tt = TensorTrain::new(vec![c.clone(), c.clone(), c], None, InputScale::Raw, Embedding::Poly1).unwrap();
        let p = tt.marginal(&[1]).unwrap().normalized().unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_keep_is_rejected() {
        let tt = random_plain(&[2; 3], 2, 1);
        assert!(matches!(tt.marginal(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn gram_measure_equals_explicit_expectation() {
        // Σ_x p(x) f(x,y)² with a two-point distribution on one site equals
        // the Gram-weighted contraction with W = E[φ φᵀ].
        let tt = random_tt(3, 2, 8);
        let pts = [(0.3, -1.0), (0.7, 2.0)];
        let mut w = vec![0.0; 4];
        for (p, x) in pts {
            let phi = [1.0, x];
            for i in 0..2 {
                for j in 0..2 {
                    w[i * 2 + j] += p * phi[i] * phi[j];
                }
            }
        }
        let x_rest = [0.4, -0.2];
        let measures = vec![
            SiteMeasure::Gram(w),
            SiteMeasure::Point(vec![1.0, x_rest[0]]),
            SiteMeasure::Point(vec![1.0, x_rest[1]]),
            SiteMeasure::Index(1),
        ];
        let got = tt.contract_squared(&measures).unwrap();
        let expect: f64 = pts
            .iter()
            .map(|&(p, x)| p * tt.evaluate(&[x, x_rest[0], x_rest[1]], 1).unwrap().powi(2))
            .sum();
        assert!(rel_close(got, expect, 1e-12));
    }

    #[test]
    fn conditioning_matches_substitution() {
        let tt = random_tt(5, 3, 21);
        let x = [0.2, -0.7, 1.3, 0.9, -1.1];
        for site in 0..5 {
            let c = tt.condition(site, &SiteValue::Raw(x[site])).unwrap();
            assert_eq!(c.num_sites(), 5);
            let rest: Vec<f64> = (0..5).filter(|&j| j != site).map(|j| x[j]).collect();
            for y in 0..2 {
                let a = c.evaluate(&rest, y).unwrap();
                let b = tt.evaluate(&x, y).unwrap();
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let pa = c.classify(&rest).unwrap();
            assert!((pa - tt.classify(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioning_every_input_leaves_the_amplitude_pair() {
        let tt = random_tt(4, 2, 33);
        let x = [0.5, 1.5, -0.5, 0.25];
        let fixed: Vec<(usize, SiteValue)> = (0..4).map(|j| (j, SiteValue::Raw(x[j]))).collect();
        let c = tt.condition_many(&fixed).unwrap();
        assert_eq!(c.num_sites(), 1);
        for y in 0..2 {
            let a = c.eval_index(&[y]).unwrap();
            let b = tt.evaluate(&x, y).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn conditioning_a_product_tensor_keeps_other_cores_up_to_scale() {
        let cores: Vec<Core> = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.25]]
            .iter()
            .map(|v| Core::new(1, 2, 1, v.to_vec()).unwrap())
            .collect();
        let tt = TensorTrain::new(cores.clone(), Some(2), InputScale::Raw, Embedding::Poly1).unwrap();
        let c = tt.condition(1, &SiteValue::Raw(2.0)).unwrap();
        // φ(2) = [1, 2] contracts site 1 to 3 - 2 = 1.
        assert_eq!(c.cores()[0].data(), cores[0].data());
        assert_eq!(c.cores()[1].data(), cores[2].data());
    }

    #[test]
    fn conditioning_the_output_is_rejected() {
        let tt = random_tt(3, 2, 2);
        assert!(matches!(tt.condition(3, &SiteValue::Index(0)), Err(Error::Argument(_))));
        assert!(tt.condition(9, &SiteValue::Index(0)).is_err());
    }

    #[test]
    fn marginal_of_conditioned_equals_pinned_marginal() {
        let tt = random_tt(4, 3, 90);
        let c = tt.condition(1, &SiteValue::Raw(0.8)).unwrap();
        let a = c.marginal(&[c.output_site().unwrap()]).unwrap();
        let mut measures = vec![SiteMeasure::Uniform; 5];
        measures[1] = SiteMeasure::Point(vec![1.0, 0.8]);
        let b = tt.marginal_weighted(&[4], &measures).unwrap();
        for y in 0..2 {
            assert!(rel_close(a.values[y], b.values[y], 1e-10));
        }
    }
}
