//! Weighted score-matching objectives.
//!
//! * `J_SM`: `1/2 int lambda(t) E_{p_t} ||grad log p_t - s||^2 dt` (needs an analytic `p_t`).
//! * `J_DSM`: `1/2 int lambda(t) E ||grad log p_{0t}(x'|x) - s(x', t)||^2 dt`.
//!
//! Time integrals run over `[epsilon, T]`. Monte Carlo estimators draw the time
//! uniformly or from the importance proposal `p(t) = g^2 / (lambda_orig Z)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::{AnalyticGaussian, ScoreFunction};
use crate::sde::{SdeKind, SdeSpec, WeightingScheme};

/// How the time of a Monte Carlo estimate is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    UniformTime,
    ImportanceSampled,
}

impl Proposal {
    pub fn label(&self) -> &'static str {
        match self {
            Proposal::UniformTime => "uniform",
            Proposal::ImportanceSampled => "importance",
        }
    }
}

/// One Monte Carlo evaluation of a weighted DSM objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveEstimate {
    pub value: f64,
    pub t_sampled: f64,
    /// Multiplier applied to `1/2 ||h - s||^2`: `(T - eps) lambda(t)` or `Z lambda_orig(t)`.
    pub weight_applied: f64,
    pub proposal: Proposal,
}

/// `1/2 ||h - s||^2` summed over coordinates.
fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

fn standard_normal_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// `ln(e^x - 1)` without overflow.
fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln sinh(x)` for `x > 0`.
fn log_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// Importance proposal over `[epsilon, T]` with density `g(t)^2 / (lambda_orig(t) Z)`.
///
/// The antiderivative `F` of `g^2 / lambda_orig` has a closed form per family:
/// VP `ln(e^{B} - 1)`, subVP `2 ln sinh(B / 2)`, VE `t`.
#[derive(Debug, Clone, Copy)]
pub struct TimeProposal {
    spec: SdeSpec,
    f_lo: f64,
    z: f64,
}

impl TimeProposal {
    pub fn new(spec: &SdeSpec) -> Result<Self> {
        spec.validate()?;
        let mut p = TimeProposal {
            spec: *spec,
            f_lo: 0.0,
            z: 1.0,
        };
        p.f_lo = p.antiderivative(spec.epsilon());
        p.z = p.antiderivative(spec.horizon()) - p.f_lo;
        if !(p.z > 0.0 && p.z.is_finite()) {
            return Err(Error::config("time proposal normalizer is not positive"));
        }
        Ok(p)
    }

    pub fn spec(&self) -> &SdeSpec {
        &self.spec
    }

    /// Normalizer `Z`.
    pub fn normalizer(&self) -> f64 {
        self.z
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self.spec.kind() {
            SdeKind::Ve => t,
            SdeKind::Vp => log_expm1(self.spec.beta_integral(t)),
            SdeKind::SubVp => 2.0 * log_sinh(0.5 * self.spec.beta_integral(t)),
        }
    }

    /// Time at which `B(t) = b` for the linear schedule.
    fn time_from_beta_integral(&self, b: f64) -> f64 {
        let b0 = self.spec.beta_min();
        let db = self.spec.beta_max() - self.spec.beta_min();
        2.0 * b / (b0 + (b0 * b0 + 2.0 * db * b).sqrt())
    }

    fn inverse_antiderivative(&self, c: f64) -> f64 {
        match self.spec.kind() {
            SdeKind::Ve => c,
            SdeKind::Vp => self.time_from_beta_integral(softplus(c)),
            SdeKind::SubVp => {
                let h = 0.5 * c;
                let b = if h > 300.0 {
                    2.0 * (h + std::f64::consts::LN_2)
                } else {
                    2.0 * h.exp().asinh()
                };
                self.time_from_beta_integral(b)
            }
        }
    }

    /// `g(t)^2 / lambda_orig(t)`.
    pub fn unnormalized(&self, t: f64) -> f64 {
        self.spec.diffusion_sq(t) / self.spec.original_weighting(t)
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < self.spec.epsilon() || t > self.spec.horizon() {
            0.0
        } else {
            self.unnormalized(t) / self.z
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(self.spec.epsilon(), self.spec.horizon());
        ((self.antiderivative(t) - self.f_lo) / self.z).clamp(0.0, 1.0)
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InverseCdf { u });
        }
        let t = self.inverse_antiderivative(self.f_lo + u * self.z);
        if !t.is_finite() {
            return Err(Error::InverseCdf { u });
        }
        Ok(t.clamp(self.spec.epsilon(), self.spec.horizon()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.inverse_cdf(rng.random::<f64>())
    }

    /// `1 / p(t)` times `g(t)^2`, i.e. `Z lambda_orig(t)`; multiplies `1/2 ||h - s||^2`.
    pub fn importance_weight(&self, t: f64) -> f64 {
        self.z * self.spec.original_weighting(t)
    }
}

/// A drawn time together with the factor that turns `1/2 ||h - s||^2` into an
/// unbiased estimate of the weighted time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDraw {
    pub t: f64,
    pub weight: f64,
}

/// Time sampling strategy for a weighted DSM objective.
#[derive(Debug, Clone, Copy)]
pub struct TimeSampler {
    spec: SdeSpec,
    scheme: WeightingScheme,
    proposal: Proposal,
    importance: Option<TimeProposal>,
}

impl TimeSampler {
    /// Importance sampling rewrites `g^2` as the proposal, so it needs the likelihood weighting.
    pub fn new(spec: &SdeSpec, scheme: WeightingScheme, proposal: Proposal) -> Result<Self> {
        spec.validate()?;
        scheme.validate()?;
        let importance = match proposal {
            Proposal::UniformTime => None,
            Proposal::ImportanceSampled => {
                if scheme != WeightingScheme::Likelihood {
                    return Err(Error::config(
                        "importance-sampled time requires the likelihood weighting",
                    ));
                }
                Some(TimeProposal::new(spec)?)
            }
        };
        Ok(TimeSampler {
            spec: *spec,
            scheme,
            proposal,
            importance,
        })
    }

    pub fn proposal(&self) -> Proposal {
        self.proposal
    }

    pub fn scheme(&self) -> WeightingScheme {
        self.scheme
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TimeDraw> {
        match &self.importance {
            None => {
                let span = self.spec.time_span();
                let t = self.spec.epsilon() + span * rng.random::<f64>();
                Ok(TimeDraw {
                    t,
                    weight: span * self.spec.weighting(self.scheme, t),
                })
            }
            Some(p) => {
                let t = p.sample(rng)?;
                Ok(TimeDraw {
                    t,
                    weight: p.importance_weight(t),
                })
            }
        }
    }
}

/// Unweighted `1/2 ||grad log p_{0t}(x'|x0) - s(x', t)||^2` at a fresh `x' ~ p_{0t}(.|x0)`.
pub fn dsm_residual_at<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x0: &[f64],
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    let tp = spec.checked_transition(t)?;
    let z = standard_normal_vec(x0.len(), rng);
    let xt: Vec<f64> = x0.iter().zip(&z).map(|(x, z)| tp.alpha * x + tp.sigma * z).collect();
    let h: Vec<f64> = z.iter().map(|z| -z / tp.sigma).collect();
    let s = model.score(spec, &xt, t);
    Ok(half_sq_dist(&h, &s))
}

/// `1/2 lambda(t) ||grad log p_{0t}(x'|x0) - s(x', t)||^2` at one draw `x' ~ p_{0t}(.|x0)`.
pub fn dsm_loss_at<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x0: &[f64],
    t: f64,
    rng: &mut R,
    scheme: WeightingScheme,
) -> Result<f64> {
    Ok(spec.weighting(scheme, t) * dsm_residual_at(model, spec, x0, t, rng)?)
}

/// `1/2 lambda(t) ||grad log p_t(x) - s(x, t)||^2` at one draw `x ~ N(pt_mean, diag pt_var)`.
pub fn sm_loss_at<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    pt_mean: &[f64],
    pt_var: &[f64],
    t: f64,
    rng: &mut R,
    scheme: WeightingScheme,
) -> f64 {
    let x: Vec<f64> = pt_mean
        .iter()
        .zip(pt_var)
        .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let truth: Vec<f64> = x
        .iter()
        .zip(pt_mean.iter().zip(pt_var))
        .map(|(x, (m, v))| (m - x) / v)
        .collect();
    spec.weighting(scheme, t) * half_sq_dist(&truth, &model.score(spec, &x, t))
}

fn batch_estimate<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    batch: &[Vec<f64>],
    rng: &mut R,
    sampler: &TimeSampler,
) -> Result<ObjectiveEstimate> {
    if batch.is_empty() {
        return Err(Error::Input("objective needs a nonempty batch".into()));
    }
    let draw = sampler.draw(rng)?;
    let mut acc = 0.0;
    for x0 in batch {
        acc += dsm_residual_at(model, spec, x0, draw.t, rng)?;
    }
    Ok(ObjectiveEstimate {
        value: draw.weight * acc / batch.len() as f64,
        t_sampled: draw.t,
        weight_applied: draw.weight,
        proposal: sampler.proposal(),
    })
}

/// `(T - eps) lambda(t) mean_batch 1/2 ||h - s||^2` with one `t ~ U[eps, T]` shared by the batch.
pub fn mc_objective_uniform<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    batch: &[Vec<f64>],
    rng: &mut R,
    scheme: WeightingScheme,
) -> Result<ObjectiveEstimate> {
    let sampler = TimeSampler::new(spec, scheme, Proposal::UniformTime)?;
    batch_estimate(model, spec, batch, rng, &sampler)
}

/// `Z lambda_orig(t) mean_batch 1/2 ||h - s||^2` with `t ~ p(t)`; estimates the likelihood-weighted objective.
pub fn mc_objective_importance<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    batch: &[Vec<f64>],
    rng: &mut R,
) -> Result<ObjectiveEstimate> {
    let sampler = TimeSampler::new(spec, WeightingScheme::Likelihood, Proposal::ImportanceSampled)?;
    batch_estimate(model, spec, batch, rng, &sampler)
}

fn simpson_nodes(a: f64, b: f64, n: usize, log: bool, out: &mut Vec<(f64, f64)>) {
    let (ua, ub) = if log { (a.ln(), b.ln()) } else { (a, b) };
    let h = (ub - ua) / (n - 1) as f64;
    for i in 0..n {
        let u = if i == n - 1 { ub } else { ua + i as f64 * h };
        let c = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (t, jac) = if log {
            let t = if i == n - 1 { b } else { u.exp() };
            (t, t)
        } else {
            (u, 1.0)
        };
        out.push((t, c * h / 3.0 * jac));
    }
}

/// Time quadrature over `[a, b]` as `(node, weight)` pairs.
///
/// Integrands here behave like `1/t` near zero, so the rule uses composite
/// Simpson in `u = ln t` on `[a, b/10]` and ordinary Simpson on `[b/10, b]`,
/// each panel with `n_nodes` (odd, >= 9) nodes.
pub fn time_quadrature(a: f64, b: f64, n_nodes: usize) -> Result<Vec<(f64, f64)>> {
    if n_nodes < 9 || n_nodes.is_multiple_of(2) {
        return Err(Error::config(format!("quadrature needs an odd node count >= 9, got {n_nodes}")));
    }
    let split = 0.1 * b;
    let mut rule = Vec::with_capacity(2 * n_nodes);
    if a < split {
        simpson_nodes(a, split, n_nodes, true, &mut rule);
        simpson_nodes(split, b, n_nodes, false, &mut rule);
    } else {
        simpson_nodes(a, b, n_nodes, false, &mut rule);
    }
    Ok(rule)
}

/// Data law for the quadrature objectives.
#[derive(Debug, Clone, Copy)]
pub enum DataLaw<'a> {
    Gaussian(&'a AnalyticGaussian),
    /// Empirical distribution of the given points.
    Points(&'a [Vec<f64>]),
}

/// Resolution of the quadrature objectives.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub n_nodes: usize,
    /// Inner Monte Carlo draws per node when the model is not affine.
    pub inner_draws: usize,
    pub seed: u64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            n_nodes: 201,
            inner_draws: 4096,
            seed: 0,
        }
    }
}

/// `E ||h - s||^2` at time `t`, exact for diagonal-affine models.
fn dsm_inner<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    data: DataLaw<'_>,
    t: f64,
    opts: &QuadratureOptions,
    node: usize,
) -> Result<f64> {
    let tp = spec.checked_transition(t)?;
    let (alpha, sigma) = (tp.alpha, tp.sigma);
    if let Some((a, b)) = model.affine_form(spec, t) {
        // per coordinate: s - h = a alpha x0 + b + (a sigma + 1/sigma) z
        let noise: f64 = a.iter().map(|a| (a * sigma + 1.0 / sigma).powi(2)).sum();
        let signal = match data {
            DataLaw::Gaussian(g) => (0..a.len())
                .map(|i| (a[i] * alpha * g.mu0[i] + b[i]).powi(2) + (a[i] * alpha).powi(2) * g.var0[i])
                .sum::<f64>(),
            DataLaw::Points(pts) => {
                pts.iter()
                    .map(|x| (0..a.len()).map(|i| (a[i] * alpha * x[i] + b[i]).powi(2)).sum::<f64>())
                    .sum::<f64>()
                    / pts.len() as f64
            }
        };
        return Ok(signal + noise);
    }
    let mut rng = crate::rng::stream(opts.seed, crate::rng::domain::EVAL, node as u64);
    let mut acc = 0.0;
    for k in 0..opts.inner_draws {
        let x0: Vec<f64> = match data {
            DataLaw::Gaussian(g) => g
                .mu0
                .iter()
                .zip(&g.var0)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            DataLaw::Points(pts) => pts[k % pts.len()].clone(),
        };
        acc += 2.0 * dsm_residual_at(model, spec, &x0, t, &mut rng)?;
    }
    Ok(acc / opts.inner_draws as f64)
}

/// Quadrature value of `J_DSM` over `[eps, T]`.
pub fn quadrature_dsm<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    data: DataLaw<'_>,
    scheme: WeightingScheme,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let rule = time_quadrature(spec.epsilon(), spec.horizon(), opts.n_nodes)?;
    let mut total = 0.0;
    for (i, (t, w)) in rule.into_iter().enumerate() {
        total += w * 0.5 * spec.weighting(scheme, t) * dsm_inner(model, spec, data, t, opts, i)?;
    }
    Ok(total)
}

/// Quadrature value of `J_SM` for Gaussian data.
pub fn quadrature_sm<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    data: &AnalyticGaussian,
    scheme: WeightingScheme,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let rule = time_quadrature(spec.epsilon(), spec.horizon(), opts.n_nodes)?;
    let mut total = 0.0;
    for (i, (t, w)) in rule.into_iter().enumerate() {
        let (m, v) = data.analytic_pt(spec, t);
        let inner = if let Some((a, b)) = model.affine_form(spec, t) {
            // s - grad log p_t = (a + 1/v) x + b - m/v with x ~ N(m, v)
            (0..m.len())
                .map(|k| (a[k] * m[k] + b[k]).powi(2) + (a[k] + 1.0 / v[k]).powi(2) * v[k])
                .sum::<f64>()
        } else {
            let mut rng = crate::rng::stream(opts.seed, crate::rng::domain::EVAL, i as u64);
            let mut acc = 0.0;
            for _ in 0..opts.inner_draws {
                acc += 2.0 * sm_loss_at(model, spec, &m, &v, t, &mut rng, WeightingScheme::Likelihood)
                    / spec.diffusion_sq(t);
            }
            acc / opts.inner_draws as f64
        };
        total += w * 0.5 * spec.weighting(scheme, t) * inner;
    }
    Ok(total)
}
