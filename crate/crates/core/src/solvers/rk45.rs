//! Dormand-Prince 5(4) with an elementary step-size controller.

use rand::Rng;

use super::{draw_probes, DivergenceMode, SolverConfig, TrajectoryRecord, VectorField};
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order solution minus embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// What to integrate alongside the state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rk45Options {
    /// Integrate `div F` as an extra state component (the `delta_logp` of a flow).
    pub integrate_divergence: bool,
    /// Keep every accepted step in the record.
    pub record_trajectory: bool,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &SolverConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let scale = cfg.atol + cfg.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / err.len() as f64).sqrt()
}

/// Integrates `dx/dt = F(x, t)` from `t0` to `t1` (either direction).
///
/// With `integrate_divergence` the augmented state `(x, delta_logp)` is solved
/// with `d delta_logp / dt = div F(x, t)`, computed exactly or with Hutchinson
/// probes that are drawn once per integration. Both components enter the
/// error norm.
pub fn rk45_integrate<V: VectorField + ?Sized, R: Rng + ?Sized>(
    field: &V,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &SolverConfig,
    opts: Rk45Options,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if t0 == t1 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::config(format!("integration interval [{t0}, {t1}] is empty or not finite")));
    }
    let d = field.dim();
    if x0.len() != d {
        return Err(Error::Input(format!("initial state has length {}, field dimension {d}", x0.len())));
    }
    let aug = opts.integrate_divergence;
    let probes = match cfg.divergence {
        DivergenceMode::Hutchinson { n_probes, probe } if aug => draw_probes(d, n_probes, probe, rng),
        _ => Vec::new(),
    };
    let mut n_evals = 0usize;
    let mut rhs = |y: &[f64], t: f64| -> Vec<f64> {
        n_evals += 1;
        let x = &y[..d];
        let mut f = field.eval(x, t);
        if aug {
            let div = if probes.is_empty() {
                field.exact_divergence(x, t)
            } else {
                probes
                    .iter()
                    .map(|v| field.vjp(x, t, v).iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
                    .sum::<f64>()
                    / probes.len() as f64
            };
            f.push(div);
        }
        f
    };

    let n = d + aug as usize;
    let mut y: Vec<f64> = x0.to_vec();
    if aug {
        y.push(0.0);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    k[0] = rhs(&y, t);

    let mut h = match cfg.initial_step {
        Some(h) => h.min(span),
        None => {
            // Hairer-Norsett-Wanner starting step heuristic.
            let sc: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
            let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
            let d1 = (k[0].iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            let h0 = h0.min(span);
            let y1: Vec<f64> = y.iter().zip(&k[0]).map(|(v, f)| v + dir * h0 * f).collect();
            let f1 = rhs(&y1, t + dir * h0);
            let d2 = (f1
                .iter()
                .zip(&k[0])
                .zip(&sc)
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum::<f64>()
                / n as f64)
                .sqrt()
                / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1).min(span)
        }
    };

    let mut rec = TrajectoryRecord::default();
    let push = |rec: &mut TrajectoryRecord, t: f64, y: &[f64]| {
        rec.times.push(t);
        rec.states.push(y[..d].to_vec());
        rec.delta_logp_path.push(if aug { y[d] } else { 0.0 });
    };
    push(&mut rec, t, &y);

    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut rejected_last = false;
    loop {
        if rec.n_accepted + rec.n_rejected >= cfg.max_steps {
            return Err(Error::Stiffness {
                max_steps: cfg.max_steps,
                t,
            });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = dir * step;

        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += hs * A[s][j] * k[j][i];
                }
                stage[i] = acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
            k[s] = rhs(&stage, t + C[s] * hs);
        }
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            err[i] = hs * e;
        }
        let finite = y_new.iter().all(|v| v.is_finite()) && k[6].iter().all(|v| v.is_finite());
        let norm = if finite { error_norm(&err, &y, &y_new, cfg) } else { f64::INFINITY };

        if norm <= 1.0 {
            rec.n_accepted += 1;
            rec.max_error_estimate = rec.max_error_estimate.max(norm);
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            if opts.record_trajectory || last {
                push(&mut rec, t, &y);
            }
            if last {
                break;
            }
            let mut factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if rejected_last {
                factor = factor.min(1.0);
            }
            h = step * factor;
            rejected_last = false;
        } else {
            rec.n_rejected += 1;
            let factor = if norm.is_finite() {
                (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h = step * factor;
            rejected_last = true;
        }
    }
    rec.delta_logp = if aug { y[d] } else { 0.0 };
    if !rec.delta_logp.is_finite() {
        return Err(Error::NonFinite {
            context: "ODE divergence integral",
            step: rec.n_accepted,
            t,
            index: 0,
        });
    }
    rec.n_evals = n_evals;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::ClosureField;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn exponential_decay_at_default_tolerance() {
        let f = ClosureField::new(1, |x: &[f64], _| vec![-x[0]]);
        let r = rk45_integrate(&f, &[1.0], 0.0, 1.0, &SolverConfig::default(), Rk45Options::default(), &mut rng())
            .unwrap();
        let e = (r.final_state()[0] - (-1f64).exp()).abs();
        // scipy.integrate.solve_ivp(method="RK45", rtol=atol=1e-5) lands at 2.2926e-6
        assert!((e - 2.2926e-6).abs() < 1e-9, "error {e}");
        assert_eq!(*r.times.last().unwrap(), 1.0);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let f = ClosureField::new(2, |x: &[f64], _| vec![x[1], -x[0]]);
        let cfg = SolverConfig::default().with_tolerance(1e-8);
        let tau = 2.0 * std::f64::consts::PI;
        let r = rk45_integrate(&f, &[1.0, 0.0], 0.0, 10.0 * tau, &cfg, Rk45Options::default(), &mut rng()).unwrap();
        let s = r.final_state();
        let energy = 0.5 * (s[0] * s[0] + s[1] * s[1]);
        assert!((energy - 0.5).abs() < 1e-6, "energy drift {}", energy - 0.5);
    }

    #[test]
    fn tighter_tolerance_gives_smaller_error() {
        let f = ClosureField::new(2, |x: &[f64], t: f64| vec![x[1], -x[0] * (1.0 + 0.5 * t.sin())]);
        let reference = rk45_integrate(
            &f,
            &[1.0, 0.0],
            0.0,
            5.0,
            &SolverConfig::default().with_tolerance(1e-12),
            Rk45Options::default(),
            &mut rng(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..6 {
            let tol = 1e-4 / 2f64.powi(2 * k);
            let cfg = SolverConfig::default().with_tolerance(tol);
            let r = rk45_integrate(&f, &[1.0, 0.0], 0.0, 5.0, &cfg, Rk45Options::default(), &mut rng()).unwrap();
            let e = r
                .final_state()
                .iter()
                .zip(reference.final_state())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(e < prev, "tol {tol}: {e} !< {prev}");
            prev = e;
        }
    }

    #[test]
    fn backward_integration_and_divergence() {
        // dx/dt = a x has divergence a and delta = a (t1 - t0)
        let f = ClosureField::new(1, |x: &[f64], _| vec![-0.7 * x[0]]);
        let opts = Rk45Options {
            integrate_divergence: true,
            record_trajectory: true,
        };
        let fwd = rk45_integrate(&f, &[2.0], 0.0, 1.0, &SolverConfig::default(), opts, &mut rng()).unwrap();
        assert!((fwd.delta_logp - -0.7).abs() < 1e-6);
        let back = rk45_integrate(&f, fwd.final_state(), 1.0, 0.0, &SolverConfig::default(), opts, &mut rng()).unwrap();
        assert!((back.final_state()[0] - 2.0).abs() < 1e-4);
        assert!((fwd.delta_logp + back.delta_logp).abs() < 1e-6);
        assert!(fwd.times.len() > 2 && fwd.times.windows(2).all(|w| w[1] > w[0]));
        let mut csv = Vec::new();
        fwd.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("t,x0,delta_logp\n"));
    }

    #[test]
    fn too_few_steps_is_a_stiffness_error() {
        let f = ClosureField::new(1, |x: &[f64], _| vec![-1e4 * (x[0] - 1.0)]);
        let cfg = SolverConfig {
            max_steps: 20,
            ..SolverConfig::default().with_tolerance(1e-10)
        };
        let r = rk45_integrate(&f, &[0.0], 0.0, 10.0, &cfg, Rk45Options::default(), &mut rng());
        assert!(matches!(r, Err(Error::Stiffness { .. })));
        assert!(rk45_integrate(&f, &[0.0], 1.0, 1.0, &SolverConfig::default(), Rk45Options::default(), &mut rng()).is_err());
    }
}
