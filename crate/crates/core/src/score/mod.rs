//! Time-conditioned score models `s(x, t) ~ grad_x log p_t(x)`.

mod checkpoint;
pub mod mlp;

pub use checkpoint::{read_container, write_container, Container};
pub use mlp::{Mlp, MlpCache};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::SdeSpec;

/// Anything that can act as a score model.
///
/// `score_vjp` returns `v^T J` where `J = d s / d x`.
pub trait ScoreFunction {
    fn dim(&self) -> usize;

    fn score(&self, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64>;

    fn score_vjp(&self, spec: &SdeSpec, x: &[f64], t: f64, v: &[f64]) -> Vec<f64>;

    /// Exact divergence `tr(d s / d x)` from `D` vector-Jacobian products.
    fn divergence(&self, spec: &SdeSpec, x: &[f64], t: f64) -> f64 {
        let d = self.dim();
        let mut e = vec![0.0; d];
        let mut tr = 0.0;
        for i in 0..d {
            e[i] = 1.0;
            tr += self.score_vjp(spec, x, t, &e)[i];
            e[i] = 0.0;
        }
        tr
    }

    /// `Some((a, b))` when the score is the diagonal affine map `a * x + b` at time `t`.
    fn affine_form(&self, _spec: &SdeSpec, _t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Exact score of Gaussian data `N(mu0, diag(var0))` diffused by a linear SDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticGaussian {
    pub mu0: Vec<f64>,
    pub var0: Vec<f64>,
}

impl AnalyticGaussian {
    pub fn new(mu0: Vec<f64>, var0: Vec<f64>) -> Result<Self> {
        if mu0.len() != var0.len() || mu0.is_empty() {
            return Err(Error::config("mu0 and var0 must be nonempty and equally long"));
        }
        if var0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config("var0 must be strictly positive"));
        }
        Ok(AnalyticGaussian { mu0, var0 })
    }

    pub fn isotropic(dim: usize, mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean; dim], vec![var; dim])
    }

    /// Mean and diagonal variance of the marginal `p_t`.
    pub fn analytic_pt(&self, spec: &SdeSpec, t: f64) -> (Vec<f64>, Vec<f64>) {
        let tp = spec.transition(t);
        let a2 = tp.alpha * tp.alpha;
        let mean = self.mu0.iter().map(|m| tp.alpha * m).collect();
        let var = self.var0.iter().map(|v| a2 * v + tp.var()).collect();
        (mean, var)
    }
}

impl ScoreFunction for AnalyticGaussian {
    fn dim(&self) -> usize {
        self.mu0.len()
    }

    fn score(&self, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64> {
        let (m, v) = self.analytic_pt(spec, t);
        x.iter().zip(m.iter().zip(&v)).map(|(x, (m, v))| (m - x) / v).collect()
    }

    fn score_vjp(&self, spec: &SdeSpec, _x: &[f64], t: f64, u: &[f64]) -> Vec<f64> {
        let (_, v) = self.analytic_pt(spec, t);
        u.iter().zip(&v).map(|(u, v)| -u / v).collect()
    }

    fn divergence(&self, spec: &SdeSpec, _x: &[f64], t: f64) -> f64 {
        let (_, v) = self.analytic_pt(spec, t);
        v.iter().map(|v| -1.0 / v).sum()
    }

    fn affine_form(&self, spec: &SdeSpec, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (m, v) = self.analytic_pt(spec, t);
        let a = v.iter().map(|v| -1.0 / v).collect();
        let b = m.iter().zip(&v).map(|(m, v)| m / v).collect();
        Some((a, b))
    }
}

/// Sinusoidal features of `ln t`: `sin(scale (k+1) ln t), cos(scale (k+1) ln t)` for `k < num_frequencies`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeEmbedding {
    pub num_frequencies: usize,
    pub scale: f64,
}

impl Default for TimeEmbedding {
    fn default() -> Self {
        TimeEmbedding {
            num_frequencies: 8,
            scale: 0.3,
        }
    }
}

impl TimeEmbedding {
    pub fn dim(&self) -> usize {
        2 * self.num_frequencies
    }

    pub fn embed_into(&self, t: f64, out: &mut [f64]) {
        let lt = t.max(1e-300).ln();
        for k in 0..self.num_frequencies {
            let w = self.scale * (k + 1) as f64 * lt;
            out[2 * k] = w.sin();
            out[2 * k + 1] = w.cos();
        }
    }
}

/// Post-multiplier applied to the network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputScaling {
    #[default]
    Identity,
    /// Divide by the transition standard deviation `sigma(t)`.
    InverseSigma,
}

/// Trainable score network: `s(x, t) = c_out(t) * net([c_in(t) x, emb(t)])`
/// with `c_in = 1 / sqrt(alpha^2 + sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMlp {
    dim: usize,
    net: Mlp,
    embedding: TimeEmbedding,
    output_scaling: OutputScaling,
    params: Vec<f64>,
}

/// Architecture of a [`ScoreMlp`], as stored in checkpoint headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMlpLayout {
    pub dim: usize,
    pub hidden: Vec<usize>,
    pub embedding: TimeEmbedding,
    pub output_scaling: OutputScaling,
}

impl ScoreMlpLayout {
    pub fn new(dim: usize, hidden: Vec<usize>) -> Self {
        ScoreMlpLayout {
            dim,
            hidden,
            embedding: TimeEmbedding::default(),
            output_scaling: OutputScaling::InverseSigma,
        }
    }

    fn network(&self) -> Mlp {
        let mut widths = vec![self.dim + self.embedding.dim()];
        widths.extend(&self.hidden);
        widths.push(self.dim);
        Mlp::new(widths, false)
    }

    pub fn n_params(&self) -> usize {
        self.network().n_params()
    }
}

/// Per-evaluation record needed for reverse-mode gradients of a [`ScoreMlp`].
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    mlp: MlpCache,
    c_in: f64,
    c_out: f64,
}

impl ScoreMlp {
    /// Random initialization; the output layer starts at `output_gain` times the hidden scale.
    pub fn new<R: Rng + ?Sized>(layout: &ScoreMlpLayout, output_gain: f64, rng: &mut R) -> Self {
        let net = layout.network();
        let params = net.init(rng, output_gain);
        ScoreMlp {
            dim: layout.dim,
            net,
            embedding: layout.embedding,
            output_scaling: layout.output_scaling,
            params,
        }
    }

    pub fn from_params(layout: &ScoreMlpLayout, params: Vec<f64>) -> Result<Self> {
        let net = layout.network();
        if params.len() != net.n_params() {
            return Err(Error::CheckpointMismatch(format!(
                "layout needs {} parameters, got {}",
                net.n_params(),
                params.len()
            )));
        }
        Ok(ScoreMlp {
            dim: layout.dim,
            net,
            embedding: layout.embedding,
            output_scaling: layout.output_scaling,
            params,
        })
    }

    pub fn layout(&self) -> ScoreMlpLayout {
        let w = &self.net.widths;
        ScoreMlpLayout {
            dim: self.dim,
            hidden: w[1..w.len() - 1].to_vec(),
            embedding: self.embedding,
            output_scaling: self.output_scaling,
        }
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

    fn scalings(&self, spec: &SdeSpec, t: f64) -> (f64, f64) {
        let tp = spec.transition(t);
        let c_in = 1.0 / (tp.alpha * tp.alpha + tp.var()).sqrt();
        let c_out = match self.output_scaling {
            OutputScaling::Identity => 1.0,
            OutputScaling::InverseSigma => 1.0 / tp.sigma.max(crate::sde::MIN_TRANSITION_SIGMA),
        };
        (c_in, c_out)
    }

    /// Forward pass that records activations in `cache`.
    pub fn score_cached(&self, spec: &SdeSpec, x: &[f64], t: f64, cache: &mut ScoreCache) -> Vec<f64> {
        let (c_in, c_out) = self.scalings(spec, t);
        let mut input = vec![0.0; self.net.input_dim()];
        for (i, v) in x.iter().enumerate() {
            input[i] = c_in * v;
        }
        self.embedding.embed_into(t, &mut input[self.dim..]);
        self.net.forward_cached(&self.params, &input, &mut cache.mlp);
        cache.c_in = c_in;
        cache.c_out = c_out;
        cache.mlp.output().iter().map(|v| c_out * v).collect()
    }

    /// Accumulates `d (upstream . s) / d params` into `grad` and returns `d (upstream . s) / d x`.
    pub fn backward(&self, cache: &ScoreCache, upstream: &[f64], grad: Option<&mut [f64]>) -> Vec<f64> {
        let u: Vec<f64> = upstream.iter().map(|v| cache.c_out * v).collect();
        let gin = self.net.backward(&self.params, &cache.mlp, &u, grad);
        gin[..self.dim].iter().map(|v| cache.c_in * v).collect()
    }

    /// Exact reverse-mode gradient of `upstream . s(x, t)` with respect to the parameters.
    pub fn score_grad_params(&self, spec: &SdeSpec, x: &[f64], t: f64, upstream: &[f64]) -> Vec<f64> {
        let mut cache = ScoreCache::default();
        self.score_cached(spec, x, t, &mut cache);
        let mut g = vec![0.0; self.params.len()];
        self.backward(&cache, upstream, Some(&mut g));
        g
    }
}

impl ScoreFunction for ScoreMlp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64> {
        let mut cache = ScoreCache::default();
        self.score_cached(spec, x, t, &mut cache)
    }

    fn score_vjp(&self, spec: &SdeSpec, x: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        let mut cache = ScoreCache::default();
        self.score_cached(spec, x, t, &mut cache);
        self.backward(&cache, v, None)
    }

    fn divergence(&self, spec: &SdeSpec, x: &[f64], t: f64) -> f64 {
        let mut cache = ScoreCache::default();
        self.score_cached(spec, x, t, &mut cache);
        let mut e = vec![0.0; self.dim];
        let mut tr = 0.0;
        for i in 0..self.dim {
            e[i] = 1.0;
            tr += self.backward(&cache, &e, None)[i];
            e[i] = 0.0;
        }
        tr
    }
}

/// A score model: either the exact Gaussian oracle or a trainable MLP.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreModel {
    AnalyticGaussian(AnalyticGaussian),
    Mlp(ScoreMlp),
}

pub const TAG_SCORE_MLP: &str = "score-mlp";
pub const TAG_SCORE_GAUSSIAN: &str = "score-gaussian";

impl ScoreModel {
    pub fn as_mlp(&self) -> Option<&ScoreMlp> {
        match self {
            ScoreModel::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn to_container(&self) -> Container {
        match self {
            ScoreModel::Mlp(m) => Container {
                tag: TAG_SCORE_MLP.into(),
                header: serde_json::to_value(m.layout()).expect("layout serializes"),
                params: m.params.clone(),
            },
            ScoreModel::AnalyticGaussian(g) => Container {
                tag: TAG_SCORE_GAUSSIAN.into(),
                header: serde_json::json!({ "dim": g.mu0.len() }),
                params: g.mu0.iter().chain(&g.var0).copied().collect(),
            },
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        match c.tag.as_str() {
            TAG_SCORE_MLP => {
                let layout: ScoreMlpLayout = serde_json::from_value(c.header.clone())
                    .map_err(|e| Error::CheckpointMismatch(format!("bad score-mlp header: {e}")))?;
                Ok(ScoreModel::Mlp(ScoreMlp::from_params(&layout, c.params.clone())?))
            }
            TAG_SCORE_GAUSSIAN => {
                let dim = c.header["dim"]
                    .as_u64()
                    .ok_or_else(|| Error::CheckpointMismatch("missing dim".into()))? as usize;
                if c.params.len() != 2 * dim {
                    return Err(Error::CheckpointMismatch("gaussian parameter count".into()));
                }
                let g = AnalyticGaussian::new(c.params[..dim].to_vec(), c.params[dim..].to_vec())
                    .map_err(|e| Error::CheckpointMismatch(e.to_string()))?;
                Ok(ScoreModel::AnalyticGaussian(g))
            }
            other => Err(Error::CheckpointMismatch(format!("not a score checkpoint: tag {other}"))),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_container(path, &self.to_container())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&read_container(path)?)
    }
}

impl ScoreFunction for ScoreModel {
    fn dim(&self) -> usize {
        match self {
            ScoreModel::AnalyticGaussian(g) => g.dim(),
            ScoreModel::Mlp(m) => m.dim(),
        }
    }

    fn score(&self, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64> {
        match self {
            ScoreModel::AnalyticGaussian(g) => g.score(spec, x, t),
            ScoreModel::Mlp(m) => m.score(spec, x, t),
        }
    }

    fn score_vjp(&self, spec: &SdeSpec, x: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        match self {
            ScoreModel::AnalyticGaussian(g) => g.score_vjp(spec, x, t, v),
            ScoreModel::Mlp(m) => m.score_vjp(spec, x, t, v),
        }
    }

    fn divergence(&self, spec: &SdeSpec, x: &[f64], t: f64) -> f64 {
        match self {
            ScoreModel::AnalyticGaussian(g) => g.divergence(spec, x, t),
            ScoreModel::Mlp(m) => m.divergence(spec, x, t),
        }
    }

    fn affine_form(&self, spec: &SdeSpec, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ScoreModel::AnalyticGaussian(g) => g.affine_form(spec, t),
            ScoreModel::Mlp(_) => None,
        }
    }
}

impl<S: ScoreFunction + ?Sized> ScoreFunction for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64> {
        (**self).score(spec, x, t)
    }
    fn score_vjp(&self, spec: &SdeSpec, x: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        (**self).score_vjp(spec, x, t, v)
    }
    fn divergence(&self, spec: &SdeSpec, x: &[f64], t: f64) -> f64 {
        (**self).divergence(spec, x, t)
    }
    fn affine_form(&self, spec: &SdeSpec, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        (**self).affine_form(spec, t)
    }
}
