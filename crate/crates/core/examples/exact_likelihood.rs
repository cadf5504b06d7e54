//! Exact ODE likelihood and the variational bound for a Gaussian with a known score.
//!
//! The ODE starts from the prior rather than from `p_T`, so its exact value is
//! `log p_eps(x) + log pi(x_T) - log p_T(x_T)` with `x_T` the (linear) flow map of `x`.

use scoreflow::likelihood::{bound_parts, ode_log_likelihood, BoundConfig, BoundForm};
use scoreflow::oracles::gaussian_logpdf;
use scoreflow::rng::{domain, stream};
use scoreflow::score::AnalyticGaussian;
use scoreflow::sde::SdeSpec;
use scoreflow::solvers::SolverConfig;

fn main() -> scoreflow::Result<()> {
    let mu = vec![0.5, -1.0];
    let var = vec![0.2, 3.0];
    let model = AnalyticGaussian::new(mu.clone(), var.clone())?;
    let solver = SolverConfig::default();

    for spec in [SdeSpec::vp(0.1, 20.0), SdeSpec::sub_vp(0.1, 20.0), SdeSpec::ve(0.01, 50.0)] {
        println!("{:?}", spec.kind());
        for (i, x) in [[0.5, -1.0], [1.2, 0.4], [-0.3, -4.0]].iter().enumerate() {
            let ode = ode_log_likelihood(&model, &spec, x, &solver, &mut stream(0, domain::EVAL, i as u64))?;
            let (me, ve) = model.analytic_pt(&spec, spec.epsilon());
            let (mt, vt) = model.analytic_pt(&spec, spec.horizon());
            let xt: Vec<f64> = (0..2).map(|k| mt[k] + (vt[k] / ve[k]).sqrt() * (x[k] - me[k])).collect();
            let reference = gaussian_logpdf(x, &me, &ve) + gaussian_logpdf(&xt, &[0.0; 2], &[spec.prior_variance(); 2])
                - gaussian_logpdf(&xt, &mt, &vt);
            let bound = bound_parts(&model, &spec, x, BoundForm::Dsm, false, &BoundConfig::default(), i as u64, None)?;
            println!(
                "  x = {x:?}  -log p = {:.5}  reference = {:.5}  ode = {:.5}  bound = {:.4} +- {:.4}  ({} steps)",
                -gaussian_logpdf(x, &mu, &var),
                -reference,
                ode.nll(),
                bound.value(),
                bound.std_error(),
                ode.n_time_samples,
            );
        }
    }
    Ok(())
}
