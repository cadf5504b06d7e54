//! Samplers and ODE integration: reverse-time Euler-Maruyama, the probability
//! flow vector field, adaptive Dormand-Prince RK45 and divergence estimators.

mod rk45;
mod sde;

pub use rk45::{rk45_integrate, Rk45Options};
pub use sde::{sample_ode, sample_reverse_sde, EulerMaruyama};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::ScoreFunction;
use crate::sde::SdeSpec;

/// A time-dependent vector field `F(x, t)`.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64>;

    /// `v^T (dF/dx)`.
    fn vjp(&self, x: &[f64], t: f64, v: &[f64]) -> Vec<f64>;

    /// `tr(dF/dx)` from `D` vector-Jacobian products.
    fn exact_divergence(&self, x: &[f64], t: f64) -> f64 {
        let d = self.dim();
        let mut e = vec![0.0; d];
        let mut tr = 0.0;
        for i in 0..d {
            e[i] = 1.0;
            tr += self.vjp(x, t, &e)[i];
            e[i] = 0.0;
        }
        tr
    }
}

/// Right-hand side of the probability flow ODE, `f(x, t) - 1/2 g(t)^2 s(x, t)`.
pub fn ode_rhs<S: ScoreFunction + ?Sized>(model: &S, spec: &SdeSpec, x: &[f64], t: f64) -> Vec<f64> {
    let c = spec.drift_coeff(t);
    let half_g2 = 0.5 * spec.diffusion_sq(t);
    model
        .score(spec, x, t)
        .iter()
        .zip(x)
        .map(|(s, x)| c * x - half_g2 * s)
        .collect()
}

/// The probability flow ODE of a score model as a [`VectorField`].
#[derive(Debug, Clone, Copy)]
pub struct ProbabilityFlow<'a, S: ?Sized> {
    pub model: &'a S,
    pub spec: SdeSpec,
}

impl<'a, S: ScoreFunction + ?Sized> ProbabilityFlow<'a, S> {
    pub fn new(model: &'a S, spec: &SdeSpec) -> Self {
        ProbabilityFlow { model, spec: *spec }
    }
}

impl<S: ScoreFunction + ?Sized> VectorField for ProbabilityFlow<'_, S> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        ode_rhs(self.model, &self.spec, x, t)
    }

    fn vjp(&self, x: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        let c = self.spec.drift_coeff(t);
        let half_g2 = 0.5 * self.spec.diffusion_sq(t);
        self.model
            .score_vjp(&self.spec, x, t, v)
            .iter()
            .zip(v)
            .map(|(sv, v)| c * v - half_g2 * sv)
            .collect()
    }

    fn exact_divergence(&self, x: &[f64], t: f64) -> f64 {
        self.spec.drift_divergence(self.dim(), t)
            - 0.5 * self.spec.diffusion_sq(t) * self.model.divergence(&self.spec, x, t)
    }
}

/// Vector field given by a closure. Its `vjp` uses central differences and is
/// meant for tests and small demos only.
pub struct ClosureField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], f64) -> Vec<f64>> ClosureField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        ClosureField { dim, f }
    }
}

impl<F: Fn(&[f64], f64) -> Vec<f64>> VectorField for ClosureField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        (self.f)(x, t)
    }

    fn vjp(&self, x: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        let mut y = x.to_vec();
        (0..self.dim)
            .map(|j| {
                let orig = y[j];
                y[j] = orig + h;
                let fp = (self.f)(&y, t);
                y[j] = orig - h;
                let fm = (self.f)(&y, t);
                y[j] = orig;
                (0..self.dim).map(|i| v[i] * (fp[i] - fm[i]) / (2.0 * h)).sum()
            })
            .collect()
    }
}

/// Distribution of Hutchinson probe vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    #[default]
    Rademacher,
    Gaussian,
}

/// How `tr(dF/dx)` is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DivergenceMode {
    #[default]
    Exact,
    Hutchinson {
        n_probes: usize,
        #[serde(default)]
        probe: ProbeKind,
    },
}

impl DivergenceMode {
    /// Exact for `dim <= 16`, one Rademacher probe above.
    pub fn default_for_dim(dim: usize) -> Self {
        if dim <= 16 {
            DivergenceMode::Exact
        } else {
            DivergenceMode::Hutchinson {
                n_probes: 1,
                probe: ProbeKind::Rademacher,
            }
        }
    }
}

/// Draws `n` probe vectors with identity second moment.
pub fn draw_probes<R: Rng + ?Sized>(dim: usize, n: usize, kind: ProbeKind, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| match kind {
                    ProbeKind::Rademacher => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    ProbeKind::Gaussian => rng.sample(StandardNormal),
                })
                .collect()
        })
        .collect()
}

/// Per-probe values `v^T J v`.
pub fn hutchinson_terms<V: VectorField + ?Sized>(field: &V, x: &[f64], t: f64, probes: &[Vec<f64>]) -> Vec<f64> {
    probes
        .iter()
        .map(|v| field.vjp(x, t, v).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Divergence of `field` at `(x, t)` in the requested mode.
pub fn divergence<V: VectorField + ?Sized, R: Rng + ?Sized>(
    field: &V,
    x: &[f64],
    t: f64,
    mode: DivergenceMode,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        DivergenceMode::Exact => Ok(field.exact_divergence(x, t)),
        DivergenceMode::Hutchinson { n_probes, probe } => {
            if n_probes == 0 {
                return Err(Error::config("Hutchinson estimator needs at least one probe"));
            }
            let probes = draw_probes(field.dim(), n_probes, probe, rng);
            let terms = hutchinson_terms(field, x, t, &probes);
            Ok(terms.iter().sum::<f64>() / n_probes as f64)
        }
    }
}

/// Adaptive solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// `None` selects the first step automatically.
    pub initial_step: Option<f64>,
    pub divergence: DivergenceMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-5,
            atol: 1e-5,
            max_steps: 100_000,
            initial_step: None,
            divergence: DivergenceMode::Exact,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rtol = tol;
        self.atol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::config("rtol and atol must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::config("initial_step must be positive"));
            }
        }
        if let DivergenceMode::Hutchinson { n_probes: 0, .. } = self.divergence {
            return Err(Error::config("Hutchinson estimator needs at least one probe"));
        }
        Ok(())
    }
}

/// Output of an ODE integration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    /// Accepted step times including both endpoints (only the endpoints unless recording).
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Accumulated `delta_logp` at each recorded time.
    pub delta_logp_path: Vec<f64>,
    /// `int_{t0}^{t1} div F dt` (0 unless the divergence was integrated).
    pub delta_logp: f64,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub n_evals: usize,
    pub max_error_estimate: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }

    /// CSV with columns `t, x0..x{D-1}, delta_logp`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.len());
        let cols: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,{},delta_logp", cols.join(","))?;
        for ((t, s), l) in self.times.iter().zip(&self.states).zip(&self.delta_logp_path) {
            let xs: Vec<String> = s.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{t:e},{},{l:e}", xs.join(","))?;
        }
        Ok(())
    }
}
