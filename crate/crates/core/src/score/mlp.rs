//! Fully connected network with SiLU activations and hand-written reverse mode.
//!
//! Parameters live outside the network in a flat slice so that optimizers,
//! checkpoints and the dequantization flow can all share one representation.
//! Each layer stores its weight matrix row-major (`out x in`) followed by its bias.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Layer widths and bias configuration of an [`Mlp`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    /// `[input, hidden..., output]`.
    pub widths: Vec<usize>,
    /// Whether the output layer has a bias vector.
    pub output_bias: bool,
}

/// Activations recorded during a forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// Layer inputs: `inputs[0]` is the network input, `inputs[l]` the post-activation of layer `l-1`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

impl Mlp {
    pub fn new(widths: Vec<usize>, output_bias: bool) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least an input and an output width");
        Mlp { widths, output_bias }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn has_bias(&self, layer: usize) -> bool {
        layer + 1 < self.n_layers() || self.output_bias
    }

    fn layer_len(&self, layer: usize) -> usize {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        o * i + if self.has_bias(layer) { o } else { 0 }
    }

    pub fn n_params(&self) -> usize {
        (0..self.n_layers()).map(|l| self.layer_len(l)).sum()
    }

    /// Gaussian initialization with variance `1 / fan_in`; the output layer is
    /// scaled by `output_gain` (0 gives an exactly zero network).
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R, output_gain: f64) -> Vec<f64> {
        let mut params = Vec::with_capacity(self.n_params());
        for l in 0..self.n_layers() {
            let (i, o) = (self.widths[l], self.widths[l + 1]);
            let gain = if l + 1 == self.n_layers() { output_gain } else { 1.0 };
            let std = gain / (i as f64).sqrt();
            for _ in 0..o * i {
                params.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            if self.has_bias(l) {
                params.extend(std::iter::repeat_n(0.0, o));
            }
        }
        params
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(params, input, &mut cache);
        cache.output
    }

    /// Forward pass storing everything needed by [`Mlp::backward`].
    pub fn forward_cached(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(input.len(), self.input_dim());
        let nl = self.n_layers();
        cache.inputs.clear();
        cache.pre.clear();
        cache.inputs.push(input.to_vec());
        let mut offset = 0;
        for l in 0..nl {
            let (ni, no) = (self.widths[l], self.widths[l + 1]);
            let w = &params[offset..offset + no * ni];
            offset += no * ni;
            let b = if self.has_bias(l) {
                let b = &params[offset..offset + no];
                offset += no;
                Some(b)
            } else {
                None
            };
            let x = cache.inputs.last().unwrap();
            let mut z = vec![0.0; no];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * ni..(r + 1) * ni];
                let mut acc = b.map_or(0.0, |b| b[r]);
                for (wv, xv) in row.iter().zip(x) {
                    acc += wv * xv;
                }
                *zr = acc;
            }
            if l + 1 < nl {
                let a = z.iter().map(|&v| silu(v)).collect();
                cache.pre.push(z);
                cache.inputs.push(a);
            } else {
                cache.output = z;
            }
        }
    }

    /// Reverse pass for `upstream . output`. Accumulates parameter gradients into
    /// `grad_params` when given and returns the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        upstream: &[f64],
        mut grad_params: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let nl = self.n_layers();
        let mut offsets = Vec::with_capacity(nl);
        let mut offset = 0;
        for l in 0..nl {
            offsets.push(offset);
            offset += self.layer_len(l);
        }
        let mut delta = upstream.to_vec();
        for l in (0..nl).rev() {
            let (ni, no) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let w = &params[off..off + no * ni];
            let x = &cache.inputs[l];
            if let Some(g) = grad_params.as_deref_mut() {
                let gw = &mut g[off..off + no * ni];
                for r in 0..no {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &mut gw[r * ni..(r + 1) * ni];
                        for (gv, xv) in row.iter_mut().zip(x) {
                            *gv += d * xv;
                        }
                    }
                }
                if self.has_bias(l) {
                    let gb = &mut g[off + no * ni..off + no * ni + no];
                    for (gv, d) in gb.iter_mut().zip(&delta) {
                        *gv += d;
                    }
                }
            }
            let mut prev = vec![0.0; ni];
            for r in 0..no {
                let d = delta[r];
                if d != 0.0 {
                    let row = &w[r * ni..(r + 1) * ni];
                    for (p, wv) in prev.iter_mut().zip(row) {
                        *p += d * wv;
                    }
                }
            }
            if l > 0 {
                for (p, z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                    *p *= silu_grad(*z);
                }
            }
            delta = prev;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::finite_diff_grad;
    use rand::SeedableRng;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn zero_gain_output_is_zero() {
        let net = Mlp::new(vec![3, 5, 2], false);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let p = net.init(&mut rng, 0.0);
        assert_eq!(net.forward(&p, &[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
        assert_eq!(p.len(), 3 * 5 + 5 + 5 * 2);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for bias in [false, true] {
            let net = Mlp::new(vec![3, 6, 4, 2], bias);
            let p = net.init(&mut rng, 1.0);
            let x = [0.3, -0.7, 1.1];
            let u = [0.8, -1.3];
            let f = |q: &[f64]| -> f64 { net.forward(q, &x).iter().zip(&u).map(|(a, b)| a * b).sum() };
            let mut cache = MlpCache::default();
            net.forward_cached(&p, &x, &mut cache);
            let mut g = vec![0.0; p.len()];
            let gx = net.backward(&p, &cache, &u, Some(&mut g));
            let fd = finite_diff_grad(f, &p, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                assert!(rel_err(*a, *b) < 1e-5 || (a - b).abs() < 1e-9, "{a} vs {b}");
            }
            let fx = |y: &[f64]| -> f64 { net.forward(&p, y).iter().zip(&u).map(|(a, b)| a * b).sum() };
            let fdx = finite_diff_grad(fx, &x, 1e-5);
            for (a, b) in gx.iter().zip(&fdx) {
                assert!(rel_err(*a, *b) < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn silu_grad_matches_difference() {
        for &x in &[-30.0, -2.0, 0.0, 0.7, 25.0] {
            let fd = (silu(x + 1e-6) - silu(x - 1e-6)) / 2e-6;
            assert!((silu_grad(x) - fd).abs() < 1e-7);
        }
    }
}
