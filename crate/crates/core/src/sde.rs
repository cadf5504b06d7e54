//! Forward SDE families (VE, VP, subVP), their Gaussian transition kernels,
//! priors and score-matching weightings.
//!
//! All three families have drift linear in `x`, `f(x, t) = c(t) x`, so the
//! transition kernel `p_{0t}(x' | x) = N(alpha(t) x, sigma(t)^2 I)` is available in
//! closed form.
//!
//! | family | `c(t)` | `g(t)^2` | `sigma(t)^2` | original weighting |
//! |--------|--------|----------|--------------|--------------------|
//! | VE     | 0      | `s(t)^2` | `int_0^t s^2` | `s(t)^2` |
//! | VP     | `-beta/2` | `beta` | `1 - e^{-B}` | `1 - e^{-B}` |
//! | subVP  | `-beta/2` | `beta (1 - e^{-2B})` | `(1 - e^{-B})^2` | `(1 - e^{-B})^2` |
//!
//! with `beta(t) = beta_min + t (beta_max - beta_min)`, `B(t) = int_0^t beta`, and the
//! geometric VE schedule `s(t) = sigma_min (sigma_max / sigma_min)^t`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition standard deviations below this are treated as degenerate.
pub const MIN_TRANSITION_SIGMA: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeKind {
    Ve,
    Vp,
    #[serde(rename = "subvp")]
    SubVp,
}

impl SdeKind {
    pub fn default_epsilon(self) -> f64 {
        match self {
            SdeKind::Vp | SdeKind::Ve => 1e-5,
            SdeKind::SubVp => 1e-2,
        }
    }
}

impl std::fmt::Display for SdeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdeKind::Ve => "ve",
            SdeKind::Vp => "vp",
            SdeKind::SubVp => "subvp",
        })
    }
}

/// Mean coefficient and standard deviation of `p_{0t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl TransitionParams {
    pub fn var(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Weighting `lambda(t)` of the score-matching losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingScheme {
    /// The per-family weighting inherited from earlier score SDE work.
    Original,
    /// `lambda(t) = g(t)^2`.
    Likelihood,
    /// Geometric blend `g^{2c} lambda_orig^{1-c}`, with `c` in `[0, 1]`.
    Interpolated(f64),
}

impl WeightingScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightingScheme::Interpolated(c) if !(0.0..=1.0).contains(&c) => Err(Error::config(
                format!("interpolation coefficient {c} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            WeightingScheme::Original => "original".into(),
            WeightingScheme::Likelihood => "likelihood".into(),
            WeightingScheme::Interpolated(c) => format!("interpolated({c})"),
        }
    }
}

/// One of the three forward SDE families with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SdeConfig", into = "SdeConfig")]
pub struct SdeSpec {
    kind: SdeKind,
    beta_min: f64,
    beta_max: f64,
    sigma_min: f64,
    sigma_max: f64,
    horizon: f64,
    epsilon: f64,
}

/// Serialized form of [`SdeSpec`] (the `[sde]` table of an experiment config).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub kind: SdeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl TryFrom<SdeConfig> for SdeSpec {
    type Error = Error;

    fn try_from(c: SdeConfig) -> Result<Self> {
        let base = match c.kind {
            SdeKind::Ve => SdeSpec::ve(c.sigma_min.unwrap_or(0.01), c.sigma_max.unwrap_or(50.0)),
            SdeKind::Vp => SdeSpec::vp(c.beta_min.unwrap_or(0.1), c.beta_max.unwrap_or(20.0)),
            SdeKind::SubVp => SdeSpec::sub_vp(c.beta_min.unwrap_or(0.1), c.beta_max.unwrap_or(20.0)),
        };
        let spec = SdeSpec {
            horizon: c.horizon.unwrap_or(base.horizon),
            epsilon: c.epsilon.unwrap_or(base.epsilon),
            ..base
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SdeSpec> for SdeConfig {
    fn from(s: SdeSpec) -> Self {
        let (beta, sigma) = match s.kind {
            SdeKind::Ve => ((None, None), (Some(s.sigma_min), Some(s.sigma_max))),
            _ => ((Some(s.beta_min), Some(s.beta_max)), (None, None)),
        };
        SdeConfig {
            kind: s.kind,
            beta_min: beta.0,
            beta_max: beta.1,
            sigma_min: sigma.0,
            sigma_max: sigma.1,
            horizon: Some(s.horizon),
            epsilon: Some(s.epsilon),
        }
    }
}

impl SdeSpec {
    /// Variance-preserving SDE with linear `beta(t)`; `T = 1`, `epsilon = 1e-5`.
    pub fn vp(beta_min: f64, beta_max: f64) -> Self {
        SdeSpec {
            kind: SdeKind::Vp,
            beta_min,
            beta_max,
            sigma_min: 0.0,
            sigma_max: 0.0,
            horizon: 1.0,
            epsilon: SdeKind::Vp.default_epsilon(),
        }
    }

    /// Sub-variance-preserving SDE; `T = 1`, `epsilon = 1e-2`.
    pub fn sub_vp(beta_min: f64, beta_max: f64) -> Self {
        SdeSpec {
            kind: SdeKind::SubVp,
            epsilon: SdeKind::SubVp.default_epsilon(),
            ..SdeSpec::vp(beta_min, beta_max)
        }
    }

    /// Variance-exploding SDE with geometric noise schedule; `T = 1`, `epsilon = 1e-5`.
    pub fn ve(sigma_min: f64, sigma_max: f64) -> Self {
        SdeSpec {
            kind: SdeKind::Ve,
            beta_min: 0.0,
            beta_max: 0.0,
            sigma_min,
            sigma_max,
            horizon: 1.0,
            epsilon: SdeKind::Ve.default_epsilon(),
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.beta_min,
            self.beta_max,
            self.sigma_min,
            self.sigma_max,
            self.horizon,
            self.epsilon,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("SDE parameters must be finite"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("T must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.horizon) {
            return Err(Error::config(format!(
                "epsilon={} must satisfy 0 < epsilon < T={}",
                self.epsilon, self.horizon
            )));
        }
        match self.kind {
            SdeKind::Ve => {
                if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max) {
                    return Err(Error::config("VE requires 0 < sigma_min < sigma_max"));
                }
            }
            SdeKind::Vp | SdeKind::SubVp => {
                if !(self.beta_min >= 0.0 && self.beta_max > 0.0 && self.beta_min <= self.beta_max) {
                    return Err(Error::config("VP/subVP require 0 <= beta_min <= beta_max, beta_max > 0"));
                }
            }
        }
        if !(self.diffusion(self.epsilon) > 0.0) {
            return Err(Error::config("diffusion g(t) must be positive on [epsilon, T]"));
        }
        Ok(())
    }

    pub fn kind(&self) -> SdeKind {
        self.kind
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// Length of the truncated time interval `[epsilon, T]`.
    pub fn time_span(&self) -> f64 {
        self.horizon - self.epsilon
    }

    /// `beta(t)` of the linear schedule (VP/subVP).
    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + t * (self.beta_max - self.beta_min)
    }

    /// `B(t) = int_0^t beta(s) ds`.
    pub fn beta_integral(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
    }

    fn ve_log_ratio(&self) -> f64 {
        (self.sigma_max / self.sigma_min).ln()
    }

    /// Geometric VE schedule `sigma_min (sigma_max/sigma_min)^t`.
    pub fn ve_sigma(&self, t: f64) -> f64 {
        self.sigma_min * (t * self.ve_log_ratio()).exp()
    }

    /// `int_s^t ve_sigma(u)^2 du`.
    fn ve_variance_between(&self, s: f64, t: f64) -> f64 {
        let lr = self.ve_log_ratio();
        let smin2 = self.sigma_min * self.sigma_min;
        smin2 * ((2.0 * s * lr).exp() * (2.0 * (t - s) * lr).exp_m1()) / (2.0 * lr)
    }

    /// Scalar drift coefficient `c(t)` with `f(x, t) = c(t) x`.
    pub fn drift_coeff(&self, t: f64) -> f64 {
        match self.kind {
            SdeKind::Ve => 0.0,
            SdeKind::Vp | SdeKind::SubVp => -0.5 * self.beta(t),
        }
    }

    pub fn drift(&self, x: &[f64], t: f64) -> Vec<f64> {
        let c = self.drift_coeff(t);
        x.iter().map(|v| c * v).collect()
    }

    /// `div_x f(x, t) = D c(t)`.
    pub fn drift_divergence(&self, dim: usize, t: f64) -> f64 {
        dim as f64 * self.drift_coeff(t)
    }

    /// `g(t)^2`.
    pub fn diffusion_sq(&self, t: f64) -> f64 {
        match self.kind {
            SdeKind::Ve => {
                let s = self.ve_sigma(t);
                s * s
            }
            SdeKind::Vp => self.beta(t),
            SdeKind::SubVp => self.beta(t) * -(-2.0 * self.beta_integral(t)).exp_m1(),
        }
    }

    /// `g(t)`.
    pub fn diffusion(&self, t: f64) -> f64 {
        self.diffusion_sq(t).sqrt()
    }

    /// Parameters of `p_{0t}`.
    pub fn transition(&self, t: f64) -> TransitionParams {
        match self.kind {
            SdeKind::Ve => TransitionParams {
                alpha: 1.0,
                sigma: self.ve_variance_between(0.0, t).sqrt(),
            },
            SdeKind::Vp => {
                let b = self.beta_integral(t);
                TransitionParams {
                    alpha: (-0.5 * b).exp(),
                    sigma: (-(-b).exp_m1()).sqrt(),
                }
            }
            SdeKind::SubVp => {
                let b = self.beta_integral(t);
                TransitionParams {
                    alpha: (-0.5 * b).exp(),
                    sigma: -(-b).exp_m1(),
                }
            }
        }
    }

    /// Parameters of the kernel from time `s` to time `t >= s`.
    pub fn transition_between(&self, s: f64, t: f64) -> TransitionParams {
        match self.kind {
            SdeKind::Ve => TransitionParams {
                alpha: 1.0,
                sigma: self.ve_variance_between(s, t).sqrt(),
            },
            SdeKind::Vp => {
                let db = self.beta_integral(t) - self.beta_integral(s);
                TransitionParams {
                    alpha: (-0.5 * db).exp(),
                    sigma: (-(-db).exp_m1()).sqrt(),
                }
            }
            SdeKind::SubVp => {
                // int_s^t e^{-(B_t - B_u)} beta(u) (1 - e^{-2 B_u}) du
                let bs = self.beta_integral(s);
                let bt = self.beta_integral(t);
                let db = bt - bs;
                let var = -(-db).exp_m1() * -(-bt - bs).exp_m1();
                TransitionParams {
                    alpha: (-0.5 * db).exp(),
                    sigma: var.max(0.0).sqrt(),
                }
            }
        }
    }

    /// Transition parameters with the degenerate-kernel guard applied.
    pub fn checked_transition(&self, t: f64) -> Result<TransitionParams> {
        let tp = self.transition(t);
        if !(tp.sigma >= MIN_TRANSITION_SIGMA) || !(t > 0.0) {
            return Err(Error::DegenerateTransition { t, sigma: tp.sigma });
        }
        Ok(tp)
    }

    /// `grad_{x_t} log p_{0t}(x_t | x0) = (alpha x0 - x_t) / sigma^2`.
    pub fn transition_score(&self, x0: &[f64], xt: &[f64], t: f64) -> Result<Vec<f64>> {
        let tp = self.checked_transition(t)?;
        let inv = 1.0 / tp.var();
        Ok(x0
            .iter()
            .zip(xt)
            .map(|(a, b)| (tp.alpha * a - b) * inv)
            .collect())
    }

    /// The original per-family weighting.
    pub fn original_weighting(&self, t: f64) -> f64 {
        match self.kind {
            SdeKind::Ve => self.diffusion_sq(t),
            SdeKind::Vp => -(-self.beta_integral(t)).exp_m1(),
            SdeKind::SubVp => {
                let v = -(-self.beta_integral(t)).exp_m1();
                v * v
            }
        }
    }

    /// `lambda(t)` for the given scheme.
    pub fn weighting(&self, scheme: WeightingScheme, t: f64) -> f64 {
        match scheme {
            WeightingScheme::Original => self.original_weighting(t),
            WeightingScheme::Likelihood => self.diffusion_sq(t),
            WeightingScheme::Interpolated(c) => {
                let lo = self.original_weighting(t);
                let ll = self.diffusion_sq(t);
                (c * ll.ln() + (1.0 - c) * lo.ln()).exp()
            }
        }
    }

    /// Per-coordinate variance of the prior `pi`.
    pub fn prior_variance(&self) -> f64 {
        match self.kind {
            SdeKind::Ve => self.ve_variance_between(0.0, self.horizon),
            SdeKind::Vp | SdeKind::SubVp => 1.0,
        }
    }

    pub fn prior_logpdf(&self, x: &[f64]) -> f64 {
        let v = self.prior_variance();
        let sq: f64 = x.iter().map(|a| a * a).sum();
        -0.5 * sq / v - 0.5 * x.len() as f64 * (LN_2PI + v.ln())
    }

    pub fn prior_sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        let s = self.prior_variance().sqrt();
        (0..dim)
            .map(|_| s * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Differential entropy of the prior in nats.
    pub fn prior_entropy(&self, dim: usize) -> f64 {
        0.5 * dim as f64 * (LN_2PI + 1.0 + self.prior_variance().ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn const_beta_vp() -> SdeSpec {
        SdeSpec::vp(1.0, 1.0)
    }

    /// Independent linear schedule used to cross-check `beta(t)`.
    fn schedule(bmin: f64, bmax: f64, t: f64) -> f64 {
        (1.0 - t) * bmin + t * bmax
    }

    #[test]
    fn drift_examples() {
        assert_eq!(const_beta_vp().drift(&[2.0, -2.0], 0.3), vec![-1.0, 1.0]);
        assert_eq!(SdeSpec::ve(0.01, 50.0).drift(&[3.0], 0.5), vec![0.0]);
        let vp = SdeSpec::vp(0.1, 20.0);
        let d = vp.drift(&[1.0], 0.5)[0];
        assert!((d - -0.5 * schedule(0.1, 20.0, 0.5)).abs() < 1e-12);
        assert!((d - -5.025).abs() < 1e-12);
    }

    #[test]
    fn diffusion_examples() {
        assert!((const_beta_vp().diffusion(0.7) - 1.0).abs() < 1e-15);
        let sub = SdeSpec::sub_vp(1.0, 1.0);
        // B(1) by composite trapezoid on a fine grid.
        let n = 20_000;
        let b: f64 = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                let c = (i + 1) as f64 / n as f64;
                0.5 * (schedule(1.0, 1.0, a) + schedule(1.0, 1.0, c)) / n as f64
            })
            .sum();
        let expect = (1.0 - (-2.0 * b).exp()).sqrt();
        assert!((sub.diffusion(1.0) - expect).abs() < 1e-10);
        assert!((sub.diffusion(1.0) - 0.929_87).abs() < 1e-5);
        assert!((SdeSpec::ve(0.01, 1.0).diffusion(1.0) - 1.0).abs() < 1e-12);
    }

    /// Variance ODE d var/dt = 2 c(t) var + g(t)^2 integrated by RK4.
    fn variance_by_ode(spec: &SdeSpec, t1: f64) -> (f64, f64) {
        let n = 20_000;
        let h = t1 / n as f64;
        let rhs = |t: f64, m: f64, v: f64| {
            let c = spec.drift_coeff(t);
            (c * m, 2.0 * c * v + spec.diffusion_sq(t))
        };
        let (mut m, mut v) = (1.0, 0.0);
        for i in 0..n {
            let t = i as f64 * h;
            let k1 = rhs(t, m, v);
            let k2 = rhs(t + h / 2.0, m + h / 2.0 * k1.0, v + h / 2.0 * k1.1);
            let k3 = rhs(t + h / 2.0, m + h / 2.0 * k2.0, v + h / 2.0 * k2.1);
            let k4 = rhs(t + h, m + h * k3.0, v + h * k3.1);
            m += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (m, v)
    }

    #[test]
    fn transition_examples() {
        for spec in [const_beta_vp(), SdeSpec::sub_vp(1.0, 1.0), SdeSpec::ve(0.01, 1.0)] {
            let tp = spec.transition(0.0);
            assert_eq!(tp.alpha, 1.0);
            assert_eq!(tp.sigma, 0.0);
        }
        let tp = const_beta_vp().transition(1.0);
        assert!((tp.alpha - (-0.5f64).exp()).abs() < 1e-15);
        let (_, v) = variance_by_ode(&const_beta_vp(), 1.0);
        assert!((tp.var() - v).abs() < 1e-10);
        assert!((tp.var() - 0.632_12).abs() < 1e-5);

        let tp = SdeSpec::sub_vp(1.0, 1.0).transition(1.0);
        let (_, v) = variance_by_ode(&SdeSpec::sub_vp(1.0, 1.0), 1.0);
        assert!((tp.var() - v).abs() < 1e-10);
        assert!((tp.var() - 0.399_58).abs() < 1e-5);
    }

    #[test]
    fn ve_variance_closed_form_matches_quadrature() {
        let spec = SdeSpec::ve(0.01, 50.0);
        for &t in &[0.1, 0.5, 1.0] {
            let n = 20_000;
            let h = t / n as f64;
            // composite Simpson
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let s = 0.01 * (50.0f64 / 0.01).powf(i as f64 * h);
                acc += w * s * s;
            }
            let quad = acc * h / 3.0;
            assert!((spec.transition(t).var() - quad).abs() / quad < 1e-9);
        }
    }

    #[test]
    fn moment_odes_reproduce_kernel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for spec in [SdeSpec::vp(0.1, 20.0), SdeSpec::sub_vp(0.1, 20.0), SdeSpec::ve(0.01, 50.0)] {
            for _ in 0..20 {
                let t: f64 = rng.random_range(0.01..1.0);
                let (m, v) = variance_by_ode(&spec, t);
                let tp = spec.transition(t);
                assert!((m - tp.alpha).abs() / tp.alpha < 1e-6);
                assert!((v - tp.var()).abs() / tp.var() < 1e-6, "{spec:?} t={t}");
            }
        }
    }

    #[test]
    fn transition_score_examples() {
        let spec = const_beta_vp();
        let tp = spec.transition(1.0);
        let x0 = [0.3, -1.2];
        let xt: Vec<f64> = x0.iter().map(|v| tp.alpha * v).collect();
        assert!(spec.transition_score(&x0, &xt, 1.0).unwrap().iter().all(|v| v.abs() < 1e-15));

        let s = spec.transition_score(&[0.0], &[1.0], 1.0).unwrap()[0];
        // central finite difference of the Gaussian log-density
        let logp = |y: f64| -0.5 * (y - tp.alpha * 0.0).powi(2) / tp.var();
        let fd = (logp(1.0 + 1e-5) - logp(1.0 - 1e-5)) / 2e-5;
        assert!((s - fd).abs() < 1e-8);
        assert!((s - -1.5820).abs() < 1e-4);

        let s2 = spec.transition_score(&[0.0], &[2.0], 1.0).unwrap()[0];
        assert!((s2 - 2.0 * s).abs() < 1e-14);
    }

    #[test]
    fn degenerate_transition_is_rejected() {
        let spec = SdeSpec::vp(0.1, 20.0);
        assert!(matches!(
            spec.transition_score(&[0.0], &[0.0], 1e-30),
            Err(Error::DegenerateTransition { .. })
        ));
        assert!(spec.transition_score(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn weighting_examples() {
        let ve = SdeSpec::ve(0.01, 50.0);
        for &t in &[1e-3, 0.3, 0.9] {
            assert_eq!(
                ve.weighting(WeightingScheme::Original, t),
                ve.weighting(WeightingScheme::Likelihood, t)
            );
            assert_eq!(ve.weighting(WeightingScheme::Original, t), ve.diffusion_sq(t));
        }
        let vp = const_beta_vp();
        for &t in &[1e-3, 0.3, 1.0] {
            assert_eq!(vp.weighting(WeightingScheme::Likelihood, t), 1.0);
        }
        assert!((vp.weighting(WeightingScheme::Original, 1.0) - 0.632_12).abs() < 1e-5);
        let v = SdeSpec::vp(0.1, 20.0);
        let blend = v.weighting(WeightingScheme::Interpolated(0.5), 0.4);
        let expect = (v.weighting(WeightingScheme::Original, 0.4) * v.diffusion_sq(0.4)).sqrt();
        assert!((blend - expect).abs() < 1e-12);
    }

    #[test]
    fn prior_examples() {
        let vp = SdeSpec::vp(0.1, 20.0);
        let d = 3;
        assert!((vp.prior_logpdf(&vec![0.0; d]) - -(d as f64 / 2.0) * LN_2PI).abs() < 1e-12);
        assert!((vp.prior_logpdf(&[1.0]) - -1.418_94).abs() < 1e-5);

        for spec in [vp, SdeSpec::ve(0.01, 50.0)] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| spec.prior_sample(1, &mut rng)[0]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let pv = spec.prior_variance();
            assert!(mean.abs() < 4.0 * (pv / n as f64).sqrt());
            assert!((var - pv).abs() < 4.0 * pv * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let spec = SdeSpec::sub_vp(0.1, 20.0);
        let text = toml::to_string(&spec).unwrap();
        let back: SdeSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let parsed: SdeSpec = toml::from_str("kind = \"vp\"\n").unwrap();
        assert_eq!(parsed.epsilon(), 1e-5);
        assert!(toml::from_str::<SdeSpec>("kind = \"vp\"\nepsilon = 2.0\n").is_err());
        assert!(toml::from_str::<SdeSpec>("kind = \"vp\"\nbogus = 1.0\n").is_err());
        assert!(toml::from_str::<SdeSpec>("kind = \"ve\"\nsigma_min = 2.0\nsigma_max = 1.0\n").is_err());
    }

    fn arb_spec() -> impl Strategy<Value = SdeSpec> {
        prop_oneof![
            (0.0f64..2.0, 0.5f64..30.0).prop_map(|(a, b)| SdeSpec::vp(a.min(b), a.max(b))),
            (0.0f64..2.0, 0.5f64..30.0).prop_map(|(a, b)| SdeSpec::sub_vp(a.min(b), a.max(b))),
            (0.001f64..0.5, 1.0f64..100.0).prop_map(|(a, b)| SdeSpec::ve(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn weighting_is_positive(spec in arb_spec(), u in 0.0f64..1.0, c in 0.0f64..1.0) {
            let t = spec.epsilon() + u * spec.time_span();
            for scheme in [WeightingScheme::Original, WeightingScheme::Likelihood, WeightingScheme::Interpolated(c)] {
                let w = spec.weighting(scheme, t);
                prop_assert!(w > 0.0 && w.is_finite());
            }
        }

        #[test]
        fn semigroup_holds(spec in arb_spec(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (s, t) = (a.min(b), a.max(b));
            let ts = spec.transition(s);
            let tt = spec.transition(t);
            let st = spec.transition_between(s, t);
            prop_assert!((tt.alpha - ts.alpha * st.alpha).abs() < 1e-10);
            let var = st.alpha * st.alpha * ts.var() + st.var();
            prop_assert!((tt.var() - var).abs() < 1e-10 * tt.var().max(1.0), "{} vs {}", tt.var(), var);
        }

        #[test]
        fn sigma_increases(spec in arb_spec(), a in 0.001f64..1.0, b in 0.001f64..1.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (s, t) = (a.min(b), a.max(b));
            prop_assert!(spec.transition(t).sigma > spec.transition(s).sigma);
        }
    }
}
