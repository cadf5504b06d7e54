//! Uniform and variational dequantization of discrete data.
//!
//! The variational noise `u ~ q(u | x)` comes from a small conditional flow:
//! logistic base noise, `K` affine couplings with alternating (checkerboard)
//! masks whose scale and shift are MLPs of the passive coordinates and of `x`,
//! and a final sigmoid onto `(0, 1)^D`. The last layer of each coupling network
//! starts at zero, so a fresh flow is exactly uniform dequantization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{check_levels, dequantize};
use crate::error::{Error, Result};
use crate::likelihood::{bound_parts, BoundConfig, BoundForm};
use crate::score::{read_container, write_container, Container, Mlp, MlpCache, ScoreFunction};
use crate::sde::SdeSpec;

pub const TAG_DEQUANT_FLOW: &str = "dequant-flow";

/// Largest `f64` below one; keeps `u` inside `[0, 1)`.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

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
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log sigma'(y) = log sigma(y) + log sigma(-y)`; also the standard logistic log-density.
#[inline]
fn log_sigmoid_grad(y: f64) -> f64 {
    -softplus(y) - softplus(-y)
}

/// Shape of a [`DequantFlow`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DequantLayout {
    pub dim: usize,
    pub levels: u32,
    pub n_couplings: usize,
    pub hidden: Vec<usize>,
    /// Image side for checkerboard masks; `None` alternates by index parity.
    pub side: Option<usize>,
}

impl DequantLayout {
    /// Four couplings with two hidden layers of width 64.
    pub fn new(dim: usize, levels: u32, side: Option<usize>) -> Self {
        DequantLayout {
            dim,
            levels,
            n_couplings: 4,
            hidden: vec![64, 64],
            side,
        }
    }

    fn network(&self) -> Mlp {
        let mut widths = vec![2 * self.dim];
        widths.extend(&self.hidden);
        widths.push(2 * self.dim);
        Mlp::new(widths, true)
    }

    pub fn n_params(&self) -> usize {
        self.n_couplings * self.network().n_params()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.levels < 2 || self.n_couplings == 0 {
            return Err(Error::config("dequantization flow needs dim >= 1, levels >= 2, n_couplings >= 1"));
        }
        if let Some(s) = self.side {
            if s * s != self.dim {
                return Err(Error::config(format!("side {s} does not match dimension {}", self.dim)));
            }
        }
        Ok(())
    }

    /// `true` where coupling `k` transforms coordinate `i`.
    fn active(&self, k: usize, i: usize) -> bool {
        let parity = match self.side {
            Some(s) => i / s + i % s,
            None => i,
        };
        (parity + k) % 2 == 1 || self.dim == 1
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct FlowTrace {
    /// State entering each coupling, then the final pre-sigmoid state.
    states: Vec<Vec<f64>>,
    /// `tanh`-bounded log-scales of each coupling.
    scales: Vec<Vec<f64>>,
    caches: Vec<MlpCache>,
    pub eps: Vec<f64>,
    pub u: Vec<f64>,
    pub log_q: f64,
}

/// Conditional noise flow `q(u | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DequantFlow {
    layout: DequantLayout,
    net: Mlp,
    params: Vec<f64>,
}

impl DequantFlow {
    /// Fresh flow. With `output_gain = 0` it is the identity (uniform dequantization).
    pub fn new<R: Rng + ?Sized>(layout: &DequantLayout, output_gain: f64, rng: &mut R) -> Result<Self> {
        layout.validate()?;
        let net = layout.network();
        let mut params = Vec::with_capacity(layout.n_params());
        for _ in 0..layout.n_couplings {
            params.extend(net.init(rng, output_gain));
        }
        Ok(DequantFlow {
            layout: layout.clone(),
            net,
            params,
        })
    }

    pub fn from_params(layout: &DequantLayout, params: Vec<f64>) -> Result<Self> {
        layout.validate()?;
        if params.len() != layout.n_params() {
            return Err(Error::CheckpointMismatch(format!(
                "flow layout expects {} parameters, got {}",
                layout.n_params(),
                params.len()
            )));
        }
        Ok(DequantFlow {
            layout: layout.clone(),
            net: layout.network(),
            params,
        })
    }

    pub fn layout(&self) -> &DequantLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn coupling_params(&self, k: usize) -> &[f64] {
        let n = self.net.n_params();
        &self.params[k * n..(k + 1) * n]
    }

    fn conditioner_input(&self, k: usize, y: &[f64], x: &[u32]) -> Vec<f64> {
        let d = self.layout.dim;
        let l = self.layout.levels as f64;
        let mut inp = Vec::with_capacity(2 * d);
        inp.extend(y.iter().enumerate().map(|(i, &v)| if self.layout.active(k, i) { 0.0 } else { v }));
        inp.extend(x.iter().map(|&v| 2.0 * (v as f64 + 0.5) / l - 1.0));
        inp
    }

    /// Pushes base noise `eps` through the flow.
    pub fn forward(&self, x: &[u32], eps: &[f64]) -> Result<FlowTrace> {
        let d = self.layout.dim;
        if x.len() != d || eps.len() != d {
            return Err(Error::Input(format!("flow dimension is {d}")));
        }
        check_levels(x, self.layout.levels)?;
        let mut tr = FlowTrace {
            eps: eps.to_vec(),
            ..FlowTrace::default()
        };
        let mut log_q: f64 = eps.iter().map(|&e| log_sigmoid_grad(e)).sum();
        let mut y = eps.to_vec();
        for k in 0..self.layout.n_couplings {
            tr.states.push(y.clone());
            let inp = self.conditioner_input(k, &y, x);
            let mut cache = MlpCache::default();
            self.net.forward_cached(self.coupling_params(k), &inp, &mut cache);
            let out = cache.output();
            let mut s = vec![0.0; d];
            for i in 0..d {
                if self.layout.active(k, i) {
                    s[i] = out[i].tanh();
                    y[i] = y[i] * s[i].exp() + out[d + i];
                    log_q -= s[i];
                }
            }
            tr.scales.push(s);
            tr.caches.push(cache);
        }
        tr.u = y.iter().map(|&v| sigmoid(v).min(ONE_MINUS)).collect();
        log_q -= y.iter().map(|&v| log_sigmoid_grad(v)).sum::<f64>();
        tr.states.push(y);
        tr.log_q = log_q;
        Ok(tr)
    }

    /// Draws `u ~ q(.|x)` and returns `(u, log q(u|x))`.
    pub fn sample_and_log_q<R: Rng + ?Sized>(&self, x: &[u32], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let tr = self.forward(x, &draw_base(self.layout.dim, rng))?;
        Ok((tr.u, tr.log_q))
    }

    /// Base noise that produces `u` for data `x`.
    pub fn inverse(&self, x: &[u32], u: &[f64]) -> Result<Vec<f64>> {
        let d = self.layout.dim;
        if x.len() != d || u.len() != d {
            return Err(Error::Input(format!("flow dimension is {d}")));
        }
        if u.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::Input("noise must lie strictly inside (0, 1)".into()));
        }
        let mut y: Vec<f64> = u.iter().map(|&v| (v / (1.0 - v)).ln()).collect();
        for k in (0..self.layout.n_couplings).rev() {
            let inp = self.conditioner_input(k, &y, x);
            let out = self.net.forward(self.coupling_params(k), &inp);
            for i in 0..d {
                if self.layout.active(k, i) {
                    y[i] = (y[i] - out[d + i]) * (-out[i].tanh()).exp();
                }
            }
        }
        Ok(y)
    }

    /// `log q(u | x)` by inversion.
    pub fn log_q(&self, x: &[u32], u: &[f64]) -> Result<f64> {
        let eps = self.inverse(x, u)?;
        Ok(self.forward(x, &eps)?.log_q)
    }

    /// Parameter gradient of `g_u . u + g_logq * log q` along a recorded pass (base noise held fixed).
    pub fn backward(&self, tr: &FlowTrace, g_u: &[f64], g_logq: f64) -> Vec<f64> {
        let d = self.layout.dim;
        let np = self.net.n_params();
        let mut grad = vec![0.0; self.params.len()];
        let y_last = tr.states.last().unwrap();
        // through u = sigmoid(y) and the -sum log sigma'(y) term of log q
        let mut gy: Vec<f64> = (0..d)
            .map(|i| {
                let s = sigmoid(y_last[i]);
                let du = if s > ONE_MINUS { 0.0 } else { s * (1.0 - s) };
                g_u[i] * du - g_logq * (1.0 - 2.0 * s)
            })
            .collect();
        for k in (0..self.layout.n_couplings).rev() {
            let y_in = &tr.states[k];
            let s = &tr.scales[k];
            let mut upstream = vec![0.0; 2 * d];
            for i in 0..d {
                if self.layout.active(k, i) {
                    let g_s = gy[i] * y_in[i] * s[i].exp() - g_logq;
                    upstream[i] = g_s * (1.0 - s[i] * s[i]);
                    upstream[d + i] = gy[i];
                    gy[i] *= s[i].exp();
                }
            }
            let g_inp = self
                .net
                .backward(self.coupling_params(k), &tr.caches[k], &upstream, Some(&mut grad[k * np..(k + 1) * np]));
            for i in 0..d {
                if !self.layout.active(k, i) {
                    gy[i] += g_inp[i];
                }
            }
        }
        grad
    }

    pub fn to_container(&self) -> Container {
        Container {
            tag: TAG_DEQUANT_FLOW.into(),
            header: serde_json::to_value(&self.layout).expect("layout serializes"),
            params: self.params.clone(),
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.tag != TAG_DEQUANT_FLOW {
            return Err(Error::CheckpointMismatch(format!("expected a `{TAG_DEQUANT_FLOW}` checkpoint, found `{}`", c.tag)));
        }
        let layout: DequantLayout =
            serde_json::from_value(c.header.clone()).map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
        DequantFlow::from_params(&layout, c.params.clone())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_container(path, &self.to_container())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        DequantFlow::from_container(&read_container(path)?)
    }
}

/// Standard logistic noise as `logit(U)`, `U` drawn exactly like uniform dequantization draws.
fn draw_base<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let u = rng.random::<f64>().clamp(f64::EPSILON / 2.0, ONE_MINUS);
            (u / (1.0 - u)).ln()
        })
        .collect()
}

/// Settings of the dequantization objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DequantObjectiveConfig {
    /// Bound used for `-log p(y)` at the dequantized point (always Tweedie-corrected).
    pub bound: BoundConfig,
    /// Noise draws `u` per datapoint.
    pub noise_draws: usize,
}

impl Default for DequantObjectiveConfig {
    fn default() -> Self {
        DequantObjectiveConfig {
            bound: BoundConfig {
                n_time_samples: 64,
                ..BoundConfig::default()
            },
            noise_draws: 1,
        }
    }
}

/// A dequantized bound on `-log P(x)` for discrete `x`, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct DequantEstimate {
    /// `E_q[L((x+u)/L) + log q(u|x)] + D ln L`.
    pub value: f64,
    pub std_error: f64,
    pub mean_log_q: f64,
}

impl DequantEstimate {
    pub fn bits_per_dim(&self, dim: usize) -> f64 {
        self.value / (dim as f64 * std::f64::consts::LN_2)
    }
}

fn finish(vals: &[f64], logq: &[f64], dim: usize, levels: u32) -> DequantEstimate {
    let w: crate::stats::Welford = vals.iter().copied().collect();
    DequantEstimate {
        value: w.mean() + dim as f64 * (levels as f64).ln(),
        std_error: w.std_error(),
        mean_log_q: logq.iter().sum::<f64>() / logq.len() as f64,
    }
}

/// Uniform-dequantization bound, `E_u[L((x+u)/L)] + D ln L`.
pub fn uniform_deq_objective<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    score: &S,
    spec: &SdeSpec,
    x: &[u32],
    levels: u32,
    cfg: &DequantObjectiveConfig,
    rng: &mut R,
) -> Result<DequantEstimate> {
    check_levels(x, levels)?;
    let d = x.len();
    let mut vals = Vec::with_capacity(cfg.noise_draws);
    for _ in 0..cfg.noise_draws.max(1) {
        let u: Vec<f64> = (0..d)
            .map(|_| {
                let u = rng.random::<f64>().clamp(f64::EPSILON / 2.0, ONE_MINUS);
                sigmoid((u / (1.0 - u)).ln()).min(ONE_MINUS)
            })
            .collect();
        let y = dequantize(x, &u, levels)?;
        let seed: u64 = rng.random();
        vals.push(bound_parts(score, spec, &y, BoundForm::Dsm, true, &cfg.bound, seed, None)?.value());
    }
    Ok(finish(&vals, &vec![0.0; vals.len()], d, levels))
}

/// Variational-dequantization bound `E_q[L((x+u)/L) + log q(u|x)] + D ln L`.
pub fn var_deq_objective<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    flow: &DequantFlow,
    score: &S,
    spec: &SdeSpec,
    x: &[u32],
    cfg: &DequantObjectiveConfig,
    rng: &mut R,
) -> Result<DequantEstimate> {
    let levels = flow.layout.levels;
    let mut vals = Vec::with_capacity(cfg.noise_draws);
    let mut logqs = Vec::with_capacity(cfg.noise_draws);
    for _ in 0..cfg.noise_draws.max(1) {
        let tr = flow.forward(x, &draw_base(flow.layout.dim, rng))?;
        let y = dequantize(x, &tr.u, levels)?;
        let seed: u64 = rng.random();
        let b = bound_parts(score, spec, &y, BoundForm::Dsm, true, &cfg.bound, seed, None)?.value();
        vals.push(b + tr.log_q);
        logqs.push(tr.log_q);
    }
    Ok(finish(&vals, &logqs, x.len(), levels))
}

/// One-sample objective and its reparameterized gradient in the flow parameters.
/// The score model is only read.
pub fn var_deq_objective_grad<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    flow: &DequantFlow,
    score: &S,
    spec: &SdeSpec,
    x: &[u32],
    cfg: &DequantObjectiveConfig,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let eps = draw_base(flow.layout.dim, rng);
    let seed: u64 = rng.random();
    objective_grad_at(flow, score, spec, x, &eps, seed, &cfg.bound)
}

/// Objective and flow-parameter gradient for fixed base noise and bound seed.
pub fn objective_grad_at<S: ScoreFunction + ?Sized>(
    flow: &DequantFlow,
    score: &S,
    spec: &SdeSpec,
    x: &[u32],
    eps: &[f64],
    seed: u64,
    bound: &BoundConfig,
) -> Result<(f64, Vec<f64>)> {
    let levels = flow.layout.levels;
    let tr = flow.forward(x, eps)?;
    let y = dequantize(x, &tr.u, levels)?;
    let mut gy = vec![0.0; y.len()];
    let b = bound_parts(score, spec, &y, BoundForm::Dsm, true, bound, seed, Some(&mut gy))?.value();
    let g_u: Vec<f64> = gy.iter().map(|g| g / levels as f64).collect();
    let grad = flow.backward(&tr, &g_u, 1.0);
    let value = b + tr.log_q + x.len() as f64 * (levels as f64).ln();
    Ok((value, grad))
}
