//! Variance of the likelihood-weighted objective under uniform and
//! importance-sampled diffusion times.

use scoreflow::data::{Dataset, DatasetKind, Split};
use scoreflow::objectives::{mc_objective_importance, mc_objective_uniform, TimeProposal};
use scoreflow::rng::{domain, stream};
use scoreflow::score::{ScoreMlp, ScoreMlpLayout};
use scoreflow::sde::{SdeSpec, WeightingScheme};
use scoreflow::stats::{bootstrap_variance_ratio, Welford};

fn main() -> scoreflow::Result<()> {
    let spec = SdeSpec::vp(0.1, 20.0);
    let proposal = TimeProposal::new(&spec)?;
    println!("proposal normalizer Z = {:.4}", proposal.normalizer());
    for t in [1e-5, 1e-3, 0.01, 0.1, 0.5, 1.0] {
        println!("  t = {t:<7} density {:>12.4}  weight {:.4e}", proposal.density(t), proposal.importance_weight(t));
    }

    let ds = Dataset::new(DatasetKind::default_mixture(), Split::Test, 0)?;
    let model = ScoreMlp::new(&ScoreMlpLayout::new(2, vec![64, 64]), 0.1, &mut stream(0, domain::INIT, 0));
    let mut data = stream(0, domain::TEST_DATA, 0);
    let (mut ru, mut ri) = (stream(0, domain::EVAL, 0), stream(0, domain::EVAL, 1));
    let (mut u, mut s) = (Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let x = ds.sample_batch(1, &mut data).continuous()?;
        u.push(mc_objective_uniform(&model, &spec, &x, &mut ru, WeightingScheme::Likelihood)?.value);
        s.push(mc_objective_importance(&model, &spec, &x, &mut ri)?.value);
    }
    let wu: Welford = u.iter().copied().collect();
    let ws: Welford = s.iter().copied().collect();
    println!("uniform    mean {:.4} +- {:.4}  variance {:.4e}", wu.mean(), wu.std_error(), wu.variance());
    println!("importance mean {:.4} +- {:.4}  variance {:.4e}", ws.mean(), ws.std_error(), ws.variance());
    let (ratio, lo, hi) = bootstrap_variance_ratio(&s, &u, 200, 0.99, &mut stream(0, domain::EVAL, 2));
    println!("variance ratio {ratio:.3e}, 99% bootstrap interval [{lo:.3e}, {hi:.3e}]");
    Ok(())
}
