//! Uniform against learned (variational) dequantization on small discrete images.
//!
//! `cargo run --release --example dequantization -- 4000 1500`

use scoreflow::data::{Dataset, DatasetKind, Split};
use scoreflow::dequant::{uniform_deq_objective, var_deq_objective, DequantObjectiveConfig};
use scoreflow::likelihood::BoundConfig;
use scoreflow::rng::{domain, stream};
use scoreflow::sde::SdeSpec;
use scoreflow::stats::{mean, Welford};
use scoreflow::training::{train_dequant_flow, train_score_model, DequantTrainConfig, ModelConfig, TrainConfig};

fn main() -> scoreflow::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|a| a.parse().ok());
    let score_steps = args.next().unwrap_or(3000);
    let flow_steps = args.next().unwrap_or(800);
    let spec = SdeSpec::vp(0.1, 20.0);
    let ds = Dataset::new(DatasetKind::default_image(), Split::Train, 0)?;
    let dim = ds.dim();

    let model_cfg = ModelConfig {
        hidden: vec![128, 128],
        ..ModelConfig::default()
    };
    let cfg = TrainConfig {
        steps: score_steps,
        ..TrainConfig::default()
    };
    let score = train_score_model(&spec, &ds, &model_cfg, &cfg)?.model;
    println!("score model trained for {score_steps} steps");

    let dcfg = DequantTrainConfig {
        steps: flow_steps,
        learning_rate: 3e-3,
        objective: DequantObjectiveConfig {
            bound: BoundConfig {
                n_time_samples: 32,
                ..BoundConfig::default()
            },
            noise_draws: 1,
        },
        ..DequantTrainConfig::default()
    };
    let trained = train_dequant_flow(&spec, &score, &ds, &dcfg)?;
    let losses = trained.history.losses();
    let k = losses.len().min(50);
    println!(
        "flow objective {:.3} -> {:.3} nats (mean of first and last {k} batches)",
        mean(&losses[..k]),
        mean(&losses[losses.len() - k..])
    );

    let eval = DequantObjectiveConfig {
        bound: BoundConfig {
            n_time_samples: 256,
            ..BoundConfig::default()
        },
        noise_draws: 4,
    };
    let (mut uni, mut var, mut diff) = (Welford::new(), Welford::new(), Welford::new());
    for (i, x) in ds.with_split(Split::Test).draw(32).discrete()?.iter().enumerate() {
        let u = uniform_deq_objective(&score, &spec, x, 8, &eval, &mut stream(0, domain::EVAL, i as u64))?;
        let v = var_deq_objective(&trained.flow, &score, &spec, x, &eval, &mut stream(0, domain::EVAL, i as u64))?;
        uni.push(u.bits_per_dim(dim));
        var.push(v.bits_per_dim(dim));
        diff.push(v.value - u.value);
    }
    println!("uniform     {:.4} bits/dim", uni.mean());
    println!("variational {:.4} bits/dim", var.mean());
    println!("difference  {:.3} +- {:.3} nats per image", diff.mean(), diff.std_error());
    Ok(())
}
