//! Small dense networks: ReLU hidden layers, sigmoid outputs, binary
//! cross-entropy per output, trained with Adam.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::seed::Rng;

/// Fully connected network with parameters in one flat vector. Layer `l`
/// stores its `out x in` weight matrix row-major followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return shape(format!("invalid layer sizes {sizes:?}"));
        }
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(Mlp { sizes: sizes.to_vec(), params })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Mlp> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return shape(format!("invalid layer sizes {sizes:?}"));
        }
        if params.len() != param_count(sizes) {
            return shape(format!(
                "layers {sizes:?} need {} parameters, got {}",
                param_count(sizes),
                params.len()
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite network parameter".into()));
        }
        Ok(Mlp { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    /// Offset of layer `l`'s weights; its bias follows `in * out` later.
    fn offset(&self, l: usize) -> usize {
        self.sizes.windows(2).take(l).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Weight matrix and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offset(l);
        (&self.params[off..off + i * o], &self.params[off + i * o..off + i * o + o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        let off = self.offset(l);
        let (w, rest) = self.params[off..off + i * o + o].split_at_mut(i * o);
        (w, rest)
    }

    /// Pre-sigmoid outputs.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).pop().expect("output layer")
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.logits(x).into_iter().map(sigmoid).collect()
    }

    /// Pre-activation values of every layer (input first, output logits last);
    /// hidden entries are post-ReLU.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (w, b) = self.layer(l);
            let input = &acts[l];
            let n_in = self.sizes[l];
            let mut out: Vec<f64> = b.to_vec();
            for (o, v) in out.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *v += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                if l + 1 < layers && *v < 0.0 {
                    *v = 0.0;
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Gradient of `Σ_k BCE(sigmoid(z_k), t_k)` for one sample, accumulated
    /// into `grad` with weight `scale`. Returns the loss.
    pub fn accumulate_grad(&self, x: &[f64], target: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward(x);
        let layers = self.sizes.len() - 1;
        let logits = &acts[layers];
        let mut loss = 0.0;
        let mut delta: Vec<f64> = logits
            .iter()
            .zip(target)
            .map(|(&z, &t)| {
                loss += bce_with_logit(z, t);
                sigmoid(z) - t
            })
            .collect();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o] * scale;
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            // ReLU derivative from the stored post-activation values
            for (p, a) in prev.iter_mut().zip(&acts[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        loss
    }

    /// Mean loss over rows of `x` (row-major, `inputs()` wide) against
    /// `targets` (`outputs()` wide).
    pub fn mean_loss(&self, x: &[f64], targets: &[f64]) -> f64 {
        let (ni, no) = (self.inputs(), self.outputs());
        let n = x.len() / ni;
        let mut total = 0.0;
        for r in 0..n {
            let z = self.logits(&x[r * ni..(r + 1) * ni]);
            total += z
                .iter()
                .zip(&targets[r * no..(r + 1) * no])
                .map(|(&z, &t)| bce_with_logit(z, t))
                .sum::<f64>();
        }
        total / n.max(1) as f64
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Numerically stable `-t log σ(z) - (1-t) log(1-σ(z))`.
pub fn bce_with_logit(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

/// Adam with L2 weight decay added to the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k] + self.weight_decay * params[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / bc1;
            let vh = self.v[k] / bc2;
            params[k] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

/// Mini-batch Adam on the mean per-batch loss, reshuffling every epoch.
pub fn fit(net: &mut Mlp, x: &[f64], targets: &[f64], cfg: &FitConfig, rng: &mut Rng) -> Result<()> {
    let (ni, no) = (net.inputs(), net.outputs());
    if !x.len().is_multiple_of(ni) || targets.len() != (x.len() / ni) * no {
        return shape("inputs and targets disagree on the number of rows");
    }
    let n = x.len() / ni;
    if n == 0 {
        return Err(Error::Training("no training rows".into()));
    }
    let batch = cfg.batch.max(1);
    let mut opt = Adam::new(net.params.len(), cfg.lr, cfg.weight_decay);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.params.len()];
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &r in chunk {
                net.accumulate_grad(&x[r * ni..(r + 1) * ni], &targets[r * no..(r + 1) * no], scale, &mut grad);
            }
            opt.step(&mut net.params, &grad);
        }
    }
    if net.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Training("network diverged".into()));
    }
    Ok(())
}
