//! Generative samplers: reverse-time SDE (Euler-Maruyama) and the probability flow ODE.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{rk45_integrate, ProbabilityFlow, Rk45Options, SolverConfig};
use crate::error::{Error, Result};
use crate::score::ScoreFunction;
use crate::sde::SdeSpec;

/// Uniform-grid Euler-Maruyama settings for the reverse SDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EulerMaruyama {
    pub n_steps: usize,
    /// Multiplies the injected noise; 0 leaves the deterministic drift `f - g^2 s`.
    pub noise_scale: f64,
}

impl Default for EulerMaruyama {
    fn default() -> Self {
        EulerMaruyama {
            n_steps: 1000,
            noise_scale: 1.0,
        }
    }
}

impl EulerMaruyama {
    /// One step from `t` to `t - h` of `dx = [f - g^2 s] dt + g dw`.
    pub fn step<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &S,
        spec: &SdeSpec,
        x: &mut [f64],
        t: f64,
        h: f64,
        rng: &mut R,
    ) {
        let c = spec.drift_coeff(t);
        let g2 = spec.diffusion_sq(t);
        let s = model.score(spec, x, t);
        let noise = self.noise_scale * g2.sqrt() * h.sqrt();
        for (xi, si) in x.iter_mut().zip(&s) {
            let drift = c * *xi - g2 * si;
            *xi -= drift * h;
            if noise != 0.0 {
                *xi += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    /// Runs the reverse SDE from `x_T` down to `epsilon`.
    pub fn integrate<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
        &self,
        model: &S,
        spec: &SdeSpec,
        x_t: Vec<f64>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if self.n_steps == 0 {
            return Err(Error::config("Euler-Maruyama needs at least one step"));
        }
        let h = spec.time_span() / self.n_steps as f64;
        let mut x = x_t;
        for i in 0..self.n_steps {
            let t = spec.horizon() - i as f64 * h;
            self.step(model, spec, &mut x, t, h, rng);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "reverse SDE sampling",
                step: self.n_steps,
                t: spec.epsilon(),
                index: 0,
            });
        }
        Ok(x)
    }
}

/// One draw from the reverse-SDE model, started at a prior sample.
pub fn sample_reverse_sde<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    em: &EulerMaruyama,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let x = spec.prior_sample(model.dim(), rng);
    em.integrate(model, spec, x, rng)
}

/// One draw from the probability flow model: a prior sample integrated from `T` to `epsilon`.
pub fn sample_ode<S: ScoreFunction + ?Sized, R: Rng + ?Sized>(
    model: &S,
    spec: &SdeSpec,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let x = spec.prior_sample(model.dim(), rng);
    let field = ProbabilityFlow::new(model, spec);
    let rec = rk45_integrate(&field, &x, spec.horizon(), spec.epsilon(), cfg, Rk45Options::default(), rng)?;
    Ok(rec.final_state().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::AnalyticGaussian;
    use crate::solvers::ClosureField;
    use crate::stats::Welford;
    use rand::SeedableRng;

    #[test]
    fn noiseless_em_matches_rk_of_the_reverse_drift() {
        let spec = SdeSpec::vp(0.1, 20.0);
        let g = AnalyticGaussian::new(vec![1.0], vec![0.5]).unwrap();
        let em = EulerMaruyama {
            n_steps: 20_000,
            noise_scale: 0.0,
        };
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = em.integrate(&g, &spec, vec![0.8], &mut r1).unwrap();
        let b = em.integrate(&g, &spec, vec![0.8], &mut r2).unwrap();
        assert_eq!(a, b);
        let field = ClosureField::new(1, |x: &[f64], t| {
            let s = g.score(&spec, x, t)[0];
            vec![spec.drift_coeff(t) * x[0] - spec.diffusion_sq(t) * s]
        });
        let rk = rk45_integrate(
            &field,
            &[0.8],
            spec.horizon(),
            spec.epsilon(),
            &SolverConfig::default().with_tolerance(1e-10),
            Rk45Options::default(),
            &mut r1,
        )
        .unwrap();
        assert!((a[0] - rk.final_state()[0]).abs() < 1e-3, "{} vs {}", a[0], rk.final_state()[0]);
    }

    #[test]
    fn em_samples_match_gaussian_marginal() {
        let spec = SdeSpec::vp(0.1, 20.0);
        let g = AnalyticGaussian::new(vec![1.0, -0.5], vec![0.3, 2.0]).unwrap();
        let em = EulerMaruyama {
            n_steps: 200,
            noise_scale: 1.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut w = [Welford::new(), Welford::new()];
        for _ in 0..n {
            let x = sample_reverse_sde(&g, &spec, &em, &mut rng).unwrap();
            w[0].push(x[0]);
            w[1].push(x[1]);
        }
        let (m, v) = g.analytic_pt(&spec, spec.epsilon());
        for i in 0..2 {
            // discretization bias at 200 steps is well below this band
            assert!((w[i].mean() - m[i]).abs() < 5.0 * w[i].std_error() + 0.02, "dim {i}");
            assert!((w[i].variance() - v[i]).abs() < 0.1 * v[i], "dim {i}: {} vs {}", w[i].variance(), v[i]);
        }
    }
}
