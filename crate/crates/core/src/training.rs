//! Training loops: the score model on a weighted DSM objective, and the
//! dequantization flow against a frozen score model.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{uniform_dequantize, Batch, Dataset};
use crate::dequant::{objective_grad_at, DequantFlow, DequantLayout, DequantObjectiveConfig};
use crate::error::{Error, Result};
use crate::objectives::{Proposal, TimeSampler};
use crate::rng::{domain, stream};
use crate::score::{OutputScaling, ScoreCache, ScoreFunction, ScoreMlp, ScoreMlpLayout, TimeEmbedding};
use crate::sde::{SdeSpec, WeightingScheme};
use crate::stats::Welford;

/// Adam with global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip: Option<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64, clip: Option<f64>) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            clip,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Applies one update; returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut [f64], grad: &mut [f64]) -> f64 {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if let Some(c) = self.clip {
            if norm > c {
                let k = c / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
        }
        self.t += 1;
        let b1 = 1.0 - self.beta1.powi(self.t as i32);
        let b2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / b1) / ((self.v[i] / b2).sqrt() + self.eps);
        }
        norm
    }
}

/// Optimization settings of [`train_score_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip: f64,
    /// Held-out objective is recorded every this many steps; `0` disables it.
    pub eval_every: usize,
    pub seed: u64,
    pub scheme: WeightingScheme,
    pub proposal: Proposal,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            eval_every: 0,
            seed: 0,
            scheme: WeightingScheme::Likelihood,
            proposal: Proposal::ImportanceSampled,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::config("train.steps and train.batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) || !(self.grad_clip >= 0.0) {
            return Err(Error::config("train.learning_rate and train.adam_eps must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam moments must lie in [0, 1)"));
        }
        self.scheme.validate()
    }

    fn optimizer(&self, n: usize) -> Adam {
        let clip = (self.grad_clip > 0.0).then_some(self.grad_clip);
        Adam::new(n, self.learning_rate, self.beta1, self.beta2, self.adam_eps, clip)
    }
}

/// Score network architecture chosen by configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub num_frequencies: usize,
    pub frequency_scale: f64,
    pub output_scaling: OutputScaling,
    /// Scale of the output layer at initialization.
    pub output_gain: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let e = TimeEmbedding::default();
        ModelConfig {
            hidden: vec![64, 64, 64],
            num_frequencies: e.num_frequencies,
            frequency_scale: e.scale,
            output_scaling: OutputScaling::InverseSigma,
            output_gain: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn layout(&self, dim: usize) -> ScoreMlpLayout {
        ScoreMlpLayout {
            dim,
            hidden: self.hidden.clone(),
            embedding: TimeEmbedding {
                num_frequencies: self.num_frequencies,
                scale: self.frequency_scale,
            },
            output_scaling: self.output_scaling,
        }
    }
}

/// One optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    /// Monte Carlo objective of the batch before the update.
    pub loss: f64,
    pub grad_norm: f64,
}

/// Per-step losses plus periodic held-out evaluations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub scheme: String,
    pub proposal: String,
    pub rows: Vec<HistoryRow>,
    /// `(step, held-out objective)`.
    pub evals: Vec<(usize, f64)>,
}

impl LossHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    /// Exponential moving average of the losses.
    pub fn ema(&self, decay: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len());
        let mut acc = None;
        for r in &self.rows {
            let v = match acc {
                None => r.loss,
                Some(a) => decay * a + (1.0 - decay) * r.loss,
            };
            acc = Some(v);
            out.push(v);
        }
        out
    }

    /// CSV with columns `step,loss,scheme,proposal`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,loss,scheme,proposal")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{},{}", r.step, r.loss, self.scheme, self.proposal)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// SHA-256 of the little-endian parameter bytes, in hex.
pub fn param_hash(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Continuous training points: discrete images are dequantized uniformly.
fn continuous_batch<R: Rng + ?Sized>(ds: &Dataset, n: usize, data_rng: &mut R, noise: &mut R) -> Result<Vec<Vec<f64>>> {
    match ds.sample_batch(n, data_rng) {
        Batch::Continuous(v) => Ok(v),
        Batch::Discrete(v) => {
            let levels = ds.levels().expect("discrete data has levels");
            v.iter().map(|x| uniform_dequantize(x, levels, noise)).collect()
        }
    }
}

/// Weighted DSM batch loss and its parameter gradient, with one time draw per example.
fn dsm_batch_grad<R: Rng + ?Sized>(
    model: &ScoreMlp,
    spec: &SdeSpec,
    sampler: &TimeSampler,
    batch: &[Vec<f64>],
    rng: &mut R,
    step: usize,
    grad: &mut [f64],
) -> Result<f64> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let n = batch.len() as f64;
    let mut cache = ScoreCache::default();
    let mut total = 0.0;
    for (index, x0) in batch.iter().enumerate() {
        let draw = sampler.draw(rng)?;
        let tp = spec.checked_transition(draw.t)?;
        let z: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
        let xt: Vec<f64> = x0.iter().zip(&z).map(|(x, z)| tp.alpha * x + tp.sigma * z).collect();
        let s = model.score_cached(spec, &xt, draw.t, &mut cache);
        // residual s - h with h = -z / sigma
        let r: Vec<f64> = s.iter().zip(&z).map(|(s, z)| s + z / tp.sigma).collect();
        let loss = draw.weight * 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                context: "score training loss",
                step,
                t: draw.t,
                index,
            });
        }
        total += loss;
        let up: Vec<f64> = r.iter().map(|v| draw.weight * v / n).collect();
        model.backward(&cache, &up, Some(grad));
    }
    Ok(total / n)
}

/// Result of [`train_score_model`].
#[derive(Debug, Clone)]
pub struct TrainedScore {
    pub model: ScoreMlp,
    pub history: LossHistory,
}

/// Trains a [`ScoreMlp`] with Adam. Everything is determined by `cfg.seed` and the dataset seed.
pub fn train_score_model(spec: &SdeSpec, ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainedScore> {
    spec.validate()?;
    ds.validate()?;
    cfg.validate()?;
    let layout = model_cfg.layout(ds.dim());
    let mut model = ScoreMlp::new(&layout, model_cfg.output_gain, &mut stream(cfg.seed, domain::INIT, 0));
    train_score_from(spec, ds, &mut model, cfg).map(|history| TrainedScore { model, history })
}

/// Continues training an existing model in place.
pub fn train_score_from(spec: &SdeSpec, ds: &Dataset, model: &mut ScoreMlp, cfg: &TrainConfig) -> Result<LossHistory> {
    cfg.validate()?;
    let sampler = TimeSampler::new(spec, cfg.scheme, cfg.proposal)?;
    let mut data_rng = stream(cfg.seed, domain::TRAIN_DATA, 0);
    let mut noise = stream(cfg.seed, domain::TRAIN_NOISE, 0);
    let mut opt = cfg.optimizer(model.n_params());
    let mut grad = vec![0.0; model.n_params()];
    let mut history = LossHistory {
        scheme: cfg.scheme.label(),
        proposal: cfg.proposal.label().into(),
        ..LossHistory::default()
    };
    let held_out = if cfg.eval_every > 0 {
        let mut r = stream(cfg.seed, domain::TEST_DATA, 0);
        let mut n = stream(cfg.seed, domain::TEST_DATA, 1);
        Some(continuous_batch(&ds.with_split(crate::data::Split::Test), cfg.batch_size, &mut r, &mut n)?)
    } else {
        None
    };
    let ds = ds.with_split(crate::data::Split::Train);
    for step in 0..cfg.steps {
        let batch = continuous_batch(&ds, cfg.batch_size, &mut data_rng, &mut noise)?;
        let loss = dsm_batch_grad(model, spec, &sampler, &batch, &mut noise, step, &mut grad)?;
        let grad_norm = opt.step(model.params_mut(), &mut grad);
        history.rows.push(HistoryRow { step, loss, grad_norm });
        if let Some(h) = &held_out {
            if (step + 1) % cfg.eval_every == 0 {
                let mut r = stream(cfg.seed, domain::EVAL, 0);
                let v = dsm_batch_grad(model, spec, &sampler, h, &mut r, step, &mut grad)?;
                history.evals.push((step + 1, v));
            }
        }
    }
    Ok(history)
}

/// Optimization settings of [`train_dequant_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DequantTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: f64,
    pub seed: u64,
    /// Scale of each coupling network's last layer at initialization; `0` starts at uniform dequantization.
    pub output_gain: f64,
    pub objective: DequantObjectiveConfig,
}

impl Default for DequantTrainConfig {
    fn default() -> Self {
        DequantTrainConfig {
            steps: 300,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            seed: 0,
            output_gain: 0.0,
            objective: DequantObjectiveConfig::default(),
        }
    }
}

impl DequantTrainConfig {
    pub fn validate(&self) -> Result<()> {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            grad_clip: self.grad_clip,
            ..TrainConfig::default()
        }
        .validate()?;
        self.objective.bound.validate()
    }
}

/// Result of [`train_dequant_flow`].
#[derive(Debug, Clone)]
pub struct TrainedFlow {
    pub flow: DequantFlow,
    pub history: LossHistory,
}

/// Fits `q(u|x)` by minimizing the dequantized bound; `score` is only read.
pub fn train_dequant_flow<S: ScoreFunction + ?Sized>(
    spec: &SdeSpec,
    score: &S,
    ds: &Dataset,
    cfg: &DequantTrainConfig,
) -> Result<TrainedFlow> {
    cfg.validate()?;
    let levels = ds
        .levels()
        .ok_or_else(|| Error::config("dequantization training needs a discrete_image dataset"))?;
    let side = match ds.kind {
        crate::data::DatasetKind::DiscreteImage { side, .. } => Some(side),
        _ => None,
    };
    if score.dim() != ds.dim() {
        return Err(Error::CheckpointMismatch(format!(
            "score model has dimension {}, dataset has {}",
            score.dim(),
            ds.dim()
        )));
    }
    let layout = DequantLayout::new(ds.dim(), levels, side);
    let mut flow = DequantFlow::new(&layout, cfg.output_gain, &mut stream(cfg.seed, domain::FLOW, 0))?;
    let mut data_rng = stream(cfg.seed, domain::TRAIN_DATA, 1);
    let mut noise = stream(cfg.seed, domain::FLOW, 1);
    let clip = (cfg.grad_clip > 0.0).then_some(cfg.grad_clip);
    let mut opt = Adam::new(flow.n_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps, clip);
    let mut history = LossHistory {
        scheme: "likelihood".into(),
        proposal: if cfg.objective.bound.use_importance {
            Proposal::ImportanceSampled.label().into()
        } else {
            Proposal::UniformTime.label().into()
        },
        ..LossHistory::default()
    };
    let ds = ds.with_split(crate::data::Split::Train);
    for step in 0..cfg.steps {
        let batch = ds.sample_batch(cfg.batch_size, &mut data_rng).discrete()?;
        let mut grad = vec![0.0; flow.n_params()];
        let mut acc = Welford::new();
        for (index, x) in batch.iter().enumerate() {
            let eps: Vec<f64> = (0..x.len())
                .map(|_| {
                    let u = noise.random::<f64>().clamp(f64::EPSILON / 2.0, 1.0 - f64::EPSILON / 2.0);
                    (u / (1.0 - u)).ln()
                })
                .collect();
            let seed: u64 = noise.random();
            let (v, g) = objective_grad_at(&flow, score, spec, x, &eps, seed, &cfg.objective.bound)?;
            if !v.is_finite() || g.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    context: "dequantization objective",
                    step,
                    t: spec.epsilon(),
                    index,
                });
            }
            acc.push(v);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b / batch.len() as f64;
            }
        }
        let grad_norm = opt.step(flow.params_mut(), &mut grad);
        history.rows.push(HistoryRow {
            step,
            loss: acc.mean(),
            grad_norm,
        });
    }
    Ok(TrainedFlow { flow, history })
}
