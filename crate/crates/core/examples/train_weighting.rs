//! Train on a 2D mixture with likelihood weighting (importance-sampled times)
//! and with the original weighting, then compare held-out NLL.
//!
//! `cargo run --release --example train_weighting -- 3000`

use scoreflow::data::{Dataset, DatasetKind, Split};
use scoreflow::likelihood::ode_log_likelihood;
use scoreflow::objectives::Proposal;
use scoreflow::rng::{domain, stream};
use scoreflow::sde::{SdeSpec, WeightingScheme};
use scoreflow::solvers::SolverConfig;
use scoreflow::stats::Welford;
use scoreflow::training::{train_score_model, ModelConfig, TrainConfig};

fn main() -> scoreflow::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let spec = SdeSpec::vp(0.1, 20.0);
    let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 0)?;
    let test = ds.with_split(Split::Test).draw(200).continuous()?;
    let truth: Welford = test.iter().map(|x| -ds.true_logpdf(x).unwrap()).collect();
    println!("true NLL of the test points: {:.4}", truth.mean());

    for (scheme, proposal) in [
        (WeightingScheme::Likelihood, Proposal::ImportanceSampled),
        (WeightingScheme::Likelihood, Proposal::UniformTime),
        (WeightingScheme::Original, Proposal::UniformTime),
    ] {
        let cfg = TrainConfig {
            steps,
            batch_size: 128,
            scheme,
            proposal,
            ..TrainConfig::default()
        };
        let out = train_score_model(&spec, &ds, &ModelConfig::default(), &cfg)?;
        let ema = out.history.ema(0.99);
        let mut nll = Welford::new();
        for (i, x) in test.iter().enumerate() {
            let r = ode_log_likelihood(&out.model, &spec, x, &SolverConfig::default(), &mut stream(1, domain::EVAL, i as u64))?;
            nll.push(r.nll());
        }
        println!(
            "{:<12} {:<18} final loss {:>8.4}  test NLL {:.4} +- {:.4}",
            out.history.scheme,
            out.history.proposal,
            ema.last().copied().unwrap_or(f64::NAN),
            nll.mean(),
            nll.std_error()
        );
    }
    Ok(())
}
