//! Log-likelihoods and likelihood bounds for score-based models.
//!
//! * [`ode_log_likelihood`]: exact `log p^ODE` through the probability flow.
//! * [`evaluate_bound`]: the per-datapoint upper bounds on `-log p^SDE(x)` in
//!   denoising (`Dsm`) or divergence (`Sm`) form, optionally with the
//!   Gaussian denoising correction for the `epsilon` truncation.
//! * [`kl_upper_bound`]: `J_SM(likelihood weighting) + KL(p_T || pi)` for Gaussian data.
//! * [`entropy_estimate`]: differential entropy of the data from a score model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{quadrature_sm, time_quadrature, QuadratureOptions, TimeProposal};
use crate::rng::{child_seed, domain, stream};
use crate::score::{AnalyticGaussian, ScoreFunction};
use crate::sde::{SdeSpec, WeightingScheme};
use crate::solvers::{draw_probes, rk45_integrate, DivergenceMode, ProbabilityFlow, Rk45Options, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    OdeExact,
    BoundDsm,
    BoundSm,
    BoundDsmCorrected,
    BoundSmCorrected,
}

impl LikelihoodKind {
    pub fn label(self) -> &'static str {
        match self {
            LikelihoodKind::OdeExact => "ode_exact",
            LikelihoodKind::BoundDsm => "bound_dsm",
            LikelihoodKind::BoundSm => "bound_sm",
            LikelihoodKind::BoundDsmCorrected => "bound_dsm_corrected",
            LikelihoodKind::BoundSmCorrected => "bound_sm_corrected",
        }
    }
}

/// `-logp / (D ln 2)`, plus `log2 L` for data on `L` levels rescaled to `[0, 1]`.
pub fn bits_per_dim(logp_nats: f64, dim: usize, levels: Option<u32>) -> f64 {
    let offset = levels.map_or(0.0, |l| (l as f64).log2());
    -logp_nats / (dim as f64 * std::f64::consts::LN_2) + offset
}

/// A log-likelihood value or the negative of an upper bound on `-log p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodResult {
    pub kind: LikelihoodKind,
    pub logp_nats: f64,
    /// Time samples for bounds, accepted solver steps for the ODE.
    pub n_time_samples: usize,
    pub std_error: f64,
    pub bits_per_dim: f64,
    pub dim: usize,
    pub levels: Option<u32>,
}

impl LikelihoodResult {
    pub fn new(kind: LikelihoodKind, logp_nats: f64, n_time_samples: usize, std_error: f64, dim: usize) -> Self {
        LikelihoodResult {
            kind,
            logp_nats,
            n_time_samples,
            std_error,
            bits_per_dim: bits_per_dim(logp_nats, dim, None),
            dim,
            levels: None,
        }
    }

    /// Reinterprets the value as a density over `L`-level data scaled to `[0, 1]`.
    pub fn with_levels(mut self, levels: u32) -> Self {
        self.levels = Some(levels);
        self.bits_per_dim = bits_per_dim(self.logp_nats, self.dim, self.levels);
        self
    }

    /// Negative log-likelihood or bound value, in nats.
    pub fn nll(&self) -> f64 {
        -self.logp_nats
    }
}

/// `log p^ODE_epsilon(x)`: integrate `(x, 0)` from `epsilon` to `T` and add the prior log-density.
pub fn ode_log_likelihood<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<LikelihoodResult> {
    if x.len() != model.dim() {
        return Err(Error::Input(format!("point has length {}, model dimension {}", x.len(), model.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("point has non-finite coordinates".into()));
    }
    let field = ProbabilityFlow::new(model, spec);
    let opts = Rk45Options {
        integrate_divergence: true,
        record_trajectory: false,
    };
    let rec = rk45_integrate(&field, x, spec.epsilon(), spec.horizon(), cfg, opts, rng)?;
    let logp = spec.prior_logpdf(rec.final_state()) + rec.delta_logp;
    Ok(LikelihoodResult::new(LikelihoodKind::OdeExact, logp, rec.n_accepted, 0.0, x.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Denoising form built on the transition score.
    #[default]
    Dsm,
    /// Divergence form `g^2 (div s + 1/2 ||s||^2) - div f`.
    Sm,
}

/// Monte Carlo resolution of the bound estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    pub n_time_samples: usize,
    /// Draw times from the likelihood-weighting proposal instead of uniformly.
    pub use_importance: bool,
    /// One time per stratum of equal probability under the time law.
    pub stratified: bool,
    /// Noise draws per time sample.
    pub draws_per_time: usize,
    /// Pair every noise draw `z` with `-z`.
    pub antithetic: bool,
    /// Noise draws for the denoising correction.
    pub correction_draws: usize,
    /// Divergence of the score in the `Sm` form.
    pub divergence: DivergenceMode,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            n_time_samples: 1000,
            use_importance: true,
            stratified: true,
            draws_per_time: 1,
            antithetic: true,
            correction_draws: 16,
            divergence: DivergenceMode::Exact,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_time_samples == 0 {
            return Err(Error::config("n_time_samples must be at least 1"));
        }
        if self.draws_per_time == 0 || self.correction_draws == 0 {
            return Err(Error::config("draws_per_time and correction_draws must be at least 1"));
        }
        if let DivergenceMode::Hutchinson { n_probes: 0, .. } = self.divergence {
            return Err(Error::config("Hutchinson estimator needs at least one probe"));
        }
        Ok(())
    }
}

/// Pieces of one bound evaluation; `value()` is the bound on `-log p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParts {
    /// `E_{p_0T}[-log pi(x')]`, in closed form.
    pub prior_term: f64,
    pub time_integral: f64,
    pub time_integral_se: f64,
    /// Per-time-sample estimates of the time integral.
    pub per_time: Vec<f64>,
    pub times: Vec<f64>,
    /// Denoising correction, zero when not requested.
    pub correction: f64,
    pub correction_se: f64,
}

impl BoundParts {
    pub fn value(&self) -> f64 {
        self.prior_term + self.time_integral + self.correction
    }

    pub fn std_error(&self) -> f64 {
        self.time_integral_se.hypot(self.correction_se)
    }
}

fn normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Standard error of a mean of per-stratum estimates, from adjacent stratum pairs.
fn stratified_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let pairs = n / 2;
    let ss: f64 = (0..pairs).map(|j| (xs[2 * j] - xs[2 * j + 1]).powi(2)).sum();
    // each pair difference has expectation 2 var per stratum; rescale for an unpaired tail
    (ss * n as f64 / (2 * pairs) as f64).sqrt() / n as f64
}

fn iid_se(xs: &[f64]) -> f64 {
    let w: crate::stats::Welford = xs.iter().copied().collect();
    w.std_error()
}

/// Evaluates the bound for one point from a fixed seed. When `grad` is given it
/// receives the gradient of `value()` with respect to `x` (`Dsm` form only).
pub fn bound_parts<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    form: BoundForm,
    corrected: bool,
    cfg: &BoundConfig,
    seed: u64,
    mut grad: Option<&mut [f64]>,
) -> Result<BoundParts> {
    cfg.validate()?;
    let d = model.dim();
    if x.len() != d {
        return Err(Error::Input(format!("point has length {}, model dimension {d}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("point has non-finite coordinates".into()));
    }
    if grad.is_some() && form == BoundForm::Sm {
        return Err(Error::Unsupported("input gradients of the divergence-form bound".into()));
    }
    if let Some(g) = grad.as_deref_mut() {
        if g.len() != d {
            return Err(Error::Input("gradient buffer has the wrong length".into()));
        }
        g.iter_mut().for_each(|v| *v = 0.0);
    }

    // prior cross-entropy under x' ~ N(alpha_T x, sigma_T^2 I)
    let tp_t = spec.transition(spec.horizon());
    let vp = spec.prior_variance();
    let x_sq = dot(x, x);
    let prior_term = 0.5 * (tp_t.alpha * tp_t.alpha * x_sq + d as f64 * tp_t.var()) / vp
        + 0.5 * d as f64 * (2.0 * std::f64::consts::PI * vp).ln();
    if let Some(g) = grad.as_deref_mut() {
        let c = tp_t.alpha * tp_t.alpha / vp;
        for (gi, xi) in g.iter_mut().zip(x) {
            *gi += c * xi;
        }
    }

    let n = cfg.n_time_samples;
    let proposal = if cfg.use_importance {
        Some(TimeProposal::new(spec)?)
    } else {
        None
    };
    let span = spec.time_span();
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let per_draw = 1.0 / (cfg.draws_per_time * signs.len()) as f64;

    let mut per_time = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut xp = vec![0.0; d];
    for i in 0..n {
        let mut r = stream(seed, domain::EVAL, i as u64);
        let u: f64 = r.random();
        let u = if cfg.stratified { (i as f64 + u) / n as f64 } else { u };
        let (t, w) = match &proposal {
            Some(p) => {
                let t = p.inverse_cdf(u)?;
                (t, 1.0 / p.density(t))
            }
            None => (spec.epsilon() + u * span, span),
        };
        let tp = spec.checked_transition(t)?;
        let g2 = spec.diffusion_sq(t);
        let mut acc = 0.0;
        for _ in 0..cfg.draws_per_time {
            let z = normal_vec(d, &mut r);
            for &sign in signs {
                for k in 0..d {
                    xp[k] = tp.alpha * x[k] + tp.sigma * sign * z[k];
                }
                let s = model.score(spec, &xp, t);
                match form {
                    BoundForm::Dsm => {
                        // h = grad log p_0t(x'|x) = -sign z / sigma
                        let s_dot_h: f64 = s.iter().zip(&z).map(|(s, z)| -s * sign * z / tp.sigma).sum();
                        acc += g2 * (0.5 * dot(&s, &s) - s_dot_h);
                        if let Some(gbuf) = grad.as_deref_mut() {
                            let v: Vec<f64> = s.iter().zip(&z).map(|(s, z)| s + sign * z / tp.sigma).collect();
                            let vj = model.score_vjp(spec, &xp, t, &v);
                            let c = w * per_draw * g2 * tp.alpha / n as f64;
                            for (gi, vi) in gbuf.iter_mut().zip(&vj) {
                                *gi += c * vi;
                            }
                        }
                    }
                    BoundForm::Sm => {
                        let div = match cfg.divergence {
                            DivergenceMode::Exact => model.divergence(spec, &xp, t),
                            DivergenceMode::Hutchinson { n_probes, probe } => {
                                let probes = draw_probes(d, n_probes, probe, &mut r);
                                probes
                                    .iter()
                                    .map(|v| dot(&model.score_vjp(spec, &xp, t, v), v))
                                    .sum::<f64>()
                                    / n_probes as f64
                            }
                        };
                        acc += g2 * (div + 0.5 * dot(&s, &s));
                    }
                }
            }
        }
        let integrand = acc * per_draw - spec.drift_divergence(d, t);
        per_time.push(w * integrand);
        times.push(t);
    }
    let time_integral = per_time.iter().sum::<f64>() / n as f64;
    if !time_integral.is_finite() {
        return Err(Error::NonFinite {
            context: "likelihood bound time integral",
            step: 0,
            t: f64::NAN,
            index: per_time.iter().position(|v| !v.is_finite()).unwrap_or(0),
        });
    }
    let time_integral_se = if cfg.stratified { stratified_se(&per_time) } else { iid_se(&per_time) };

    let (correction, correction_se) = if corrected {
        denoising_correction(model, spec, x, cfg, seed, grad)?
    } else {
        (0.0, 0.0)
    };
    Ok(BoundParts {
        prior_term,
        time_integral,
        time_integral_se,
        per_time,
        times,
        correction,
        correction_se,
    })
}

/// `-E_{p_0eps(x'|x)}[log q(x|x') - log p_0eps(x'|x)]` with the Tweedie denoiser
/// `q(x|x') = N(x'/alpha + beta^2/alpha s(x', eps), beta^2/alpha^2 I)`.
///
/// With `x' = alpha x + beta z` this is `E[1/2 ||z + beta s||^2 - 1/2 ||z||^2] - D ln alpha`.
fn denoising_correction<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    cfg: &BoundConfig,
    seed: u64,
    mut grad: Option<&mut [f64]>,
) -> Result<(f64, f64)> {
    let eps = spec.epsilon();
    let tp = spec.checked_transition(eps)?;
    let (alpha, beta) = (tp.alpha, tp.sigma);
    let d = x.len();
    let mut r = stream(child_seed(seed, 1), domain::EVAL, 0);
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut vals = Vec::with_capacity(cfg.correction_draws);
    let mut xp = vec![0.0; d];
    let scale = 1.0 / (cfg.correction_draws * signs.len()) as f64;
    for _ in 0..cfg.correction_draws {
        let z = normal_vec(d, &mut r);
        let mut v = 0.0;
        for &sign in signs {
            for k in 0..d {
                xp[k] = alpha * x[k] + beta * sign * z[k];
            }
            let s = model.score(spec, &xp, eps);
            let u: Vec<f64> = s.iter().zip(&z).map(|(s, z)| sign * z + beta * s).collect();
            v += 0.5 * (dot(&u, &u) - dot(&z, &z));
            if let Some(g) = grad.as_deref_mut() {
                let vj = model.score_vjp(spec, &xp, eps, &u);
                let c = scale * alpha * beta;
                for (gi, vi) in g.iter_mut().zip(&vj) {
                    *gi += c * vi;
                }
            }
        }
        vals.push(v / signs.len() as f64);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64 - d as f64 * alpha.ln();
    Ok((mean, iid_se(&vals)))
}

fn bound_kind(form: BoundForm, corrected: bool) -> LikelihoodKind {
    match (form, corrected) {
        (BoundForm::Dsm, false) => LikelihoodKind::BoundDsm,
        (BoundForm::Dsm, true) => LikelihoodKind::BoundDsmCorrected,
        (BoundForm::Sm, false) => LikelihoodKind::BoundSm,
        (BoundForm::Sm, true) => LikelihoodKind::BoundSmCorrected,
    }
}

/// Upper bound on `-log p(x)` as a [`LikelihoodResult`] (`logp_nats` is minus the bound).
pub fn evaluate_bound<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    form: BoundForm,
    corrected: bool,
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<LikelihoodResult> {
    let seed: u64 = rng.random();
    let parts = bound_parts(model, spec, x, form, corrected, cfg, seed, None)?;
    Ok(LikelihoodResult::new(
        bound_kind(form, corrected),
        -parts.value(),
        cfg.n_time_samples,
        parts.std_error(),
        x.len(),
    ))
}

/// Denoising-form bound `L^DSM(x, epsilon)`.
pub fn bound_dsm<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<LikelihoodResult> {
    evaluate_bound(model, spec, x, BoundForm::Dsm, false, cfg, rng)
}

/// Divergence-form bound `L^SM(x, epsilon)`.
pub fn bound_sm<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<LikelihoodResult> {
    evaluate_bound(model, spec, x, BoundForm::Sm, false, cfg, rng)
}

/// `L^DSM(x, epsilon)` plus the denoising correction: a bound on `-log p(x)` of the untruncated model.
pub fn tweedie_corrected_bound<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    x: &[f64],
    cfg: &BoundConfig,
    rng: &mut R,
) -> Result<LikelihoodResult> {
    evaluate_bound(model, spec, x, BoundForm::Dsm, true, cfg, rng)
}

fn gaussian_kl_diag(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    (0..m1.len())
        .map(|i| 0.5 * ((v1[i] / v2[i]) + (m1[i] - m2[i]).powi(2) / v2[i] - 1.0 + (v2[i] / v1[i]).ln()))
        .sum()
}

/// `KL(p_T || pi)` for Gaussian data.
pub fn prior_mismatch_kl(spec: &SdeSpec, data: &AnalyticGaussian) -> f64 {
    let (m, v) = data.analytic_pt(spec, spec.horizon());
    let d = m.len();
    gaussian_kl_diag(&m, &v, &vec![0.0; d], &vec![spec.prior_variance(); d])
}

/// `J_SM(theta; g^2) + KL(p_T || pi)`, an upper bound on `KL(p || p^SDE_theta)`.
pub fn kl_upper_bound<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    data: &AnalyticGaussian,
    n_nodes: usize,
) -> Result<f64> {
    let opts = QuadratureOptions {
        n_nodes,
        ..QuadratureOptions::default()
    };
    let j = quadrature_sm(model, spec, data, WeightingScheme::Likelihood, &opts)?;
    Ok(j + prior_mismatch_kl(spec, data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyForm {
    /// Integrand `2 f^T s - g^2 ||s||^2`.
    #[default]
    DriftDotScore,
    /// Integrand `-(2 div f + g^2 ||s||^2)`.
    DivergenceForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyOptions {
    /// Nodes per quadrature panel (odd, at least 9).
    pub n_nodes: usize,
    /// `H(p_T)`; defaults to the prior entropy.
    pub terminal_entropy: Option<f64>,
    pub seed: u64,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions {
            n_nodes: 101,
            terminal_entropy: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value_nats: f64,
    pub form: EntropyForm,
    pub std_error: f64,
    /// Per-sample time integrals; their mean plus `H(p_T)` is `value_nats`.
    pub per_sample: Vec<f64>,
}

/// Entropy of the data law from i.i.d. samples and a score model.
///
/// Each sample is diffused to `x_t = alpha x + sigma z` at every quadrature node
/// on `[epsilon, T]`, so the inner expectation is over `p_t` as required.
pub fn entropy_estimate<S: ScoreFunction + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    samples: &[Vec<f64>],
    form: EntropyForm,
    opts: &EntropyOptions,
) -> Result<EntropyEstimate> {
    if samples.is_empty() {
        return Err(Error::Input("entropy estimate needs samples".into()));
    }
    let d = model.dim();
    let rule = time_quadrature(spec.epsilon(), spec.horizon(), opts.n_nodes)?;
    let coeffs: Vec<_> = rule
        .iter()
        .map(|&(t, w)| Ok((t, w, spec.checked_transition(t)?, spec.drift_coeff(t), spec.diffusion_sq(t))))
        .collect::<Result<_>>()?;
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut xt = vec![0.0; d];
    for (i, x) in samples.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Input(format!("sample {i} has length {}, model dimension {d}", x.len())));
        }
        let mut r = stream(opts.seed, domain::EVAL, i as u64);
        let mut acc = 0.0;
        for &(t, w, tp, c, g2) in &coeffs {
            for k in 0..d {
                xt[k] = tp.alpha * x[k] + tp.sigma * r.sample::<f64, _>(StandardNormal);
            }
            let s = model.score(spec, &xt, t);
            let s2 = dot(&s, &s);
            let integrand = match form {
                EntropyForm::DriftDotScore => 2.0 * c * dot(&xt, &s) - g2 * s2,
                EntropyForm::DivergenceForm => -(2.0 * c * d as f64 + g2 * s2),
            };
            acc += w * 0.5 * integrand;
        }
        per_sample.push(acc);
    }
    let terminal = opts.terminal_entropy.unwrap_or_else(|| spec.prior_entropy(d));
    let w: crate::stats::Welford = per_sample.iter().copied().collect();
    Ok(EntropyEstimate {
        value_nats: terminal + w.mean(),
        form,
        std_error: w.std_error(),
        per_sample,
    })
}
