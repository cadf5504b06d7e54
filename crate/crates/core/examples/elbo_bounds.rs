//! Score-matching and denoising bounds, with and without the small-time
//! correction, next to the exact ODE likelihood of a briefly trained model.

use scoreflow::data::{Dataset, DatasetKind, Split};
use scoreflow::likelihood::{bound_parts, ode_log_likelihood, BoundConfig, BoundForm};
use scoreflow::rng::{domain, stream};
use scoreflow::sde::SdeSpec;
use scoreflow::solvers::SolverConfig;
use scoreflow::stats::Welford;
use scoreflow::training::{train_score_model, ModelConfig, TrainConfig};

fn main() -> scoreflow::Result<()> {
    let spec = SdeSpec::vp(0.1, 20.0);
    let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 0)?;
    let cfg = TrainConfig {
        steps: 1500,
        batch_size: 128,
        ..TrainConfig::default()
    };
    let model = train_score_model(&spec, &ds, &ModelConfig::default(), &cfg)?.model;
    let pts = ds.with_split(Split::Test).draw(40).continuous()?;
    let bcfg = BoundConfig {
        n_time_samples: 2000,
        ..BoundConfig::default()
    };

    let mut ode = Welford::new();
    for (i, x) in pts.iter().enumerate() {
        ode.push(ode_log_likelihood(&model, &spec, x, &SolverConfig::default(), &mut stream(0, domain::EVAL, i as u64))?.nll());
    }
    println!("ode NLL            {:.4} +- {:.4}", ode.mean(), ode.std_error());
    for (form, corrected) in [(BoundForm::Dsm, false), (BoundForm::Sm, false), (BoundForm::Dsm, true), (BoundForm::Sm, true)] {
        let mut w = Welford::new();
        let mut prior = Welford::new();
        for (i, x) in pts.iter().enumerate() {
            let b = bound_parts(&model, &spec, x, form, corrected, &bcfg, i as u64, None)?;
            w.push(b.value());
            prior.push(b.prior_term);
        }
        println!(
            "{:<18} {:.4} +- {:.4}  (prior term {:.4})",
            format!("{form:?}{}", if corrected { " corrected" } else { "" }),
            w.mean(),
            w.std_error(),
            prior.mean()
        );
    }
    Ok(())
}
