//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=2,5,9` runs a subset. The process exits non-zero on a
//! failure only when `ACCEPTANCE_STRICT=1` is set.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use scoreflow::data::{Dataset, DatasetKind, Split};
use scoreflow::dequant::{
    objective_grad_at, uniform_deq_objective, var_deq_objective, DequantFlow, DequantLayout, DequantObjectiveConfig,
};
use scoreflow::likelihood::{bound_parts, entropy_estimate, ode_log_likelihood, BoundConfig, BoundForm, EntropyForm, EntropyOptions};
use scoreflow::objectives::{
    mc_objective_importance, mc_objective_uniform, quadrature_dsm, quadrature_sm, DataLaw, Proposal, QuadratureOptions,
};
use scoreflow::oracles::{finite_diff_grad, gaussian_entropy, gaussian_kl, gaussian_logpdf};
use scoreflow::rng::{domain, stream};
use scoreflow::score::{AnalyticGaussian, OutputScaling, ScoreFunction, ScoreMlp, ScoreMlpLayout, TimeEmbedding};
use scoreflow::sde::{SdeSpec, WeightingScheme};
use scoreflow::solvers::{
    draw_probes, hutchinson_terms, rk45_integrate, sample_ode, sample_reverse_sde, ClosureField, EulerMaruyama,
    ProbabilityFlow, ProbeKind, Rk45Options, SolverConfig, VectorField,
};
use scoreflow::stats::{bootstrap_variance_ratio, mean, Welford};
use scoreflow::training::{train_dequant_flow, train_score_model, DequantTrainConfig, ModelConfig, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Models trained on the 2D mixture, shared by criteria 6 to 8.
#[derive(Default)]
struct Fixtures {
    mixture: Vec<(u64, ScoreMlp, ScoreMlp)>,
    training_secs: f64,
}

const MIXTURE_SEEDS: [u64; 3] = [0, 1, 2];
const MIXTURE_TEST_POINTS: usize = 200;

fn mixture_train_config(seed: u64, scheme: WeightingScheme, proposal: Proposal) -> TrainConfig {
    TrainConfig {
        steps: 8000,
        batch_size: 256,
        seed,
        scheme,
        proposal,
        ..TrainConfig::default()
    }
}

fn mixture_dataset(seed: u64) -> Dataset {
    Dataset::new(DatasetKind::default_mixture(), Split::Train, seed).unwrap()
}

impl Fixtures {
    /// `(seed, likelihood+IS model, original-weighting model)` for each seed.
    fn mixture_models(&mut self) -> &[(u64, ScoreMlp, ScoreMlp)] {
        if self.mixture.is_empty() {
            let t0 = Instant::now();
            let spec = SdeSpec::vp(0.1, 20.0);
            let model = ModelConfig::default();
            for seed in MIXTURE_SEEDS {
                let ds = mixture_dataset(seed);
                let lw = mixture_train_config(seed, WeightingScheme::Likelihood, Proposal::ImportanceSampled);
                let ow = mixture_train_config(seed, WeightingScheme::Original, Proposal::UniformTime);
                let a = train_score_model(&spec, &ds, &model, &lw).unwrap().model;
                let b = train_score_model(&spec, &ds, &model, &ow).unwrap().model;
                self.mixture.push((seed, a, b));
            }
            self.training_secs = t0.elapsed().as_secs_f64();
        }
        &self.mixture
    }
}

fn mixture_test_points(seed: u64) -> Vec<Vec<f64>> {
    mixture_dataset(seed).with_split(Split::Test).draw(MIXTURE_TEST_POINTS).continuous().unwrap()
}

fn mean_ode_nll<S: ScoreFunction + ?Sized>(model: &S, spec: &SdeSpec, pts: &[Vec<f64>]) -> Vec<f64> {
    pts.iter()
        .enumerate()
        .map(|(i, x)| {
            let mut r = stream(11, domain::EVAL, i as u64);
            -ode_log_likelihood(model, spec, x, &SolverConfig::default(), &mut r).unwrap().logp_nats
        })
        .collect()
}

fn c1() -> Outcome {
    let readme = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&readme).unwrap_or_default().to_lowercase();
    let stated = text.contains("2.83") && text.contains("3.76") && text.contains("not reproduced");
    outcome(
        stated,
        format!(
            "README states that the large-scale bits/dim figures are not reproduced ({}); criteria 2-14 substitute",
            if stated { "found" } else { "missing" }
        ),
    )
}

fn c2() -> Outcome {
    let t0 = Instant::now();
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = AnalyticGaussian::isotropic(2, 0.0, 1.0).unwrap();
    let mut r = stream(2, domain::TEST_DATA, 0);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let x: Vec<f64> = (0..2).map(|_| r.sample(StandardNormal)).collect();
        let mut pr = stream(2, domain::EVAL, i);
        let lp = ode_log_likelihood(&model, &spec, &x, &SolverConfig::default(), &mut pr).unwrap().logp_nats;
        worst = worst.max((lp - gaussian_logpdf(&x, &[0.0; 2], &[1.0; 2])).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst < 1e-4 && secs < 10.0, format!("max |error| {worst:.2e} nats over 100 points (< 1e-4), {secs:.2}s (< 10s)"))
}

fn c3() -> Outcome {
    let t0 = Instant::now();
    let spec = SdeSpec::vp(0.1, 20.0);
    let g = AnalyticGaussian::new(vec![0.5, -1.0], vec![0.2, 3.0]).unwrap();
    let data = Dataset::new(DatasetKind::Gaussian { mu0: vec![0.5, -1.0], var0: vec![0.2, 3.0] }, Split::Test, 3).unwrap();
    let pts = data.draw(64).continuous().unwrap();
    let cfg = BoundConfig {
        n_time_samples: 10_000,
        draws_per_time: 128,
        ..BoundConfig::default()
    };
    // The identity holds in expectation over x ~ p_0, so the gap is averaged over data draws.
    let mut gap = Welford::new();
    for (i, x) in pts.iter().enumerate() {
        let mut r = stream(3, domain::EVAL, i as u64);
        let ode = ode_log_likelihood(&g, &spec, x, &SolverConfig::default(), &mut r).unwrap().logp_nats;
        let b = bound_parts(&g, &spec, x, BoundForm::Dsm, false, &cfg, 300 + i as u64, None).unwrap();
        gap.push(b.value() + ode);
    }
    let (m_t, v_t) = g.analytic_pt(&spec, spec.horizon());
    let kl = gaussian_kl(&m_t, &v_t, &[0.0; 2], &[spec.prior_variance(); 2]);
    let err = (gap.mean() - kl).abs();
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        err < 5e-3 && secs < 60.0,
        format!(
            "|E[bound - (-ode)] - KL| = {err:.2e} (< 5e-3; SE {:.1e}, KL {kl:.2e}) over 64 data points, 1e4 time samples x 128 draws, {secs:.1}s (< 60s)",
            gap.std_error()
        ),
    )
}

fn c4() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = ScoreMlp::new(&ScoreMlpLayout::new(2, vec![32, 32]), 1.0, &mut stream(4, domain::INIT, 0));
    let cfg = BoundConfig {
        n_time_samples: 100_000,
        ..BoundConfig::default()
    };
    let mut r = stream(4, domain::TEST_DATA, 0);
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let x: Vec<f64> = (0..2).map(|_| 1.5 * r.sample::<f64, _>(StandardNormal)).collect();
        let sm = bound_parts(&model, &spec, &x, BoundForm::Sm, false, &cfg, 100 + i, None).unwrap();
        let dsm = bound_parts(&model, &spec, &x, BoundForm::Dsm, false, &cfg, 100 + i, None).unwrap();
        let se = (sm.std_error().powi(2) + dsm.std_error().powi(2)).sqrt();
        worst = worst.max((sm.value() - dsm.value()).abs() / se);
    }
    outcome(worst < 3.0, format!("max |L_SM - L_DSM| / combined SE = {worst:.2} over 10 points (< 3)"))
}

fn c5() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let data = AnalyticGaussian::new(vec![0.5, -1.0], vec![0.2, 3.0]).unwrap();
    let opts = QuadratureOptions::default();
    let mut r = stream(5, domain::INIT, 0);
    let random_model = |r: &mut rand_chacha::ChaCha8Rng| {
        let mu: Vec<f64> = (0..2).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let var: Vec<f64> = (0..2).map(|_| 0.1 + 3.0 * r.random::<f64>()).collect();
        AnalyticGaussian::new(mu, var).unwrap()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let a = random_model(&mut r);
        let b = random_model(&mut r);
        for scheme in [WeightingScheme::Likelihood, WeightingScheme::Original] {
            let dsm = |m: &AnalyticGaussian| quadrature_dsm(m, &spec, DataLaw::Gaussian(&data), scheme, &opts).unwrap();
            let sm = |m: &AnalyticGaussian| quadrature_sm(m, &spec, &data, scheme, &opts).unwrap();
            worst = worst.max(((dsm(&a) - dsm(&b)) - (sm(&a) - sm(&b))).abs());
        }
    }
    outcome(worst < 1e-6, format!("max offset mismatch {worst:.2e} over 5 pairs x 2 weightings (< 1e-6)"))
}

fn c6(fx: &mut Fixtures) -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = fx.mixture_models()[0].1.clone();
    let test = mixture_dataset(0).with_split(Split::Test);
    let n = 1_000_000u64;
    let mut data = stream(6, domain::TEST_DATA, 0);
    let mut ru = stream(6, domain::EVAL, 0);
    let mut ri = stream(6, domain::EVAL, 1);
    let mut u = Vec::with_capacity(n as usize);
    let mut s = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let x = test.sample_batch(1, &mut data).continuous().unwrap();
        u.push(mc_objective_uniform(&model, &spec, &x, &mut ru, WeightingScheme::Likelihood).unwrap().value);
        s.push(mc_objective_importance(&model, &spec, &x, &mut ri).unwrap().value);
    }
    let wu: Welford = u.iter().copied().collect();
    let ws: Welford = s.iter().copied().collect();
    let z = (wu.mean() - ws.mean()).abs() / (wu.std_error().powi(2) + ws.std_error().powi(2)).sqrt();
    let (ratio, lo, hi) = bootstrap_variance_ratio(&s, &u, 200, 0.99, &mut stream(6, domain::EVAL, 2));
    outcome(
        z < 3.0 && hi < 1.0,
        format!(
            "means {:.4} (uniform) vs {:.4} (importance), |diff| = {z:.2} SE (< 3); var ratio {ratio:.3e}, 99% CI [{lo:.3e}, {hi:.3e}] (excludes 1)",
            wu.mean(),
            ws.mean()
        ),
    )
}

fn c7(fx: &mut Fixtures) -> Outcome {
    let t0 = Instant::now();
    let spec = SdeSpec::vp(0.1, 20.0);
    let mut wins = 0;
    let mut parts = Vec::new();
    for (seed, lw, ow) in fx.mixture_models().to_vec() {
        let pts = mixture_test_points(seed);
        let a = mean(&mean_ode_nll(&lw, &spec, &pts));
        let b = mean(&mean_ode_nll(&ow, &spec, &pts));
        if a <= b {
            wins += 1;
        }
        parts.push(format!("seed {seed}: {a:.4} vs {b:.4}"));
    }
    let secs = t0.elapsed().as_secs_f64() + fx.training_secs;
    outcome(
        wins >= 2 && secs < 1800.0,
        format!("test ODE NLL likelihood+IS vs original: {} ; {wins}/3 hold (majority needed), {secs:.0}s including training (< 1800s)", parts.join(", ")),
    )
}

fn c8(fx: &mut Fixtures) -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = fx.mixture_models()[0].1.clone();
    let pts = mixture_test_points(0);
    let nll = mean_ode_nll(&model, &spec, &pts);
    let cfg = BoundConfig {
        n_time_samples: 10_000,
        ..BoundConfig::default()
    };
    let mut held = 0;
    let mut se = Welford::new();
    let mut gaps = Welford::new();
    for (i, x) in pts.iter().enumerate() {
        let b = bound_parts(&model, &spec, x, BoundForm::Dsm, false, &cfg, 800 + i as u64, None).unwrap();
        if b.value() >= nll[i] {
            held += 1;
        }
        se.push(b.std_error());
        gaps.push(b.value() - nll[i]);
    }
    let frac = held as f64 / pts.len() as f64;
    outcome(
        frac >= 0.95,
        format!(
            "bound >= ODE NLL on {held}/{} points ({:.1}%, >= 95%); mean gap {:.3} nats, mean bound SE {:.3}",
            pts.len(),
            100.0 * frac,
            gaps.mean(),
            se.mean()
        ),
    )
}

fn c9() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = AnalyticGaussian::isotropic(2, 0.0, 4.0).unwrap();
    let mut r = stream(9, domain::TEST_DATA, 0);
    let samples: Vec<Vec<f64>> = (0..10_000).map(|_| (0..2).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect()).collect();
    let opts = EntropyOptions {
        seed: 9,
        ..EntropyOptions::default()
    };
    let a = entropy_estimate(&model, &spec, &samples, EntropyForm::DriftDotScore, &opts).unwrap();
    let b = entropy_estimate(&model, &spec, &samples, EntropyForm::DivergenceForm, &opts).unwrap();
    let truth = gaussian_entropy(&[4.0, 4.0]);
    let diff: Welford = a.per_sample.iter().zip(&b.per_sample).map(|(x, y)| x - y).collect();
    let ra = (a.value_nats - truth).abs() / truth;
    let rb = (b.value_nats - truth).abs() / truth;
    let z = diff.mean().abs() / diff.std_error();
    outcome(
        ra < 0.01 && rb < 0.01 && z < 3.0,
        format!(
            "H = {truth:.4}; drift form {:.4} ({:.2}%), divergence form {:.4} ({:.2}%) (< 1%); forms differ by {z:.2} SE (< 3)",
            a.value_nats,
            100.0 * ra,
            b.value_nats,
            100.0 * rb
        ),
    )
}

fn c10() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let model = ScoreMlp::new(&ScoreMlpLayout::new(8, vec![32, 32]), 1.0, &mut stream(10, domain::INIT, 0));
    let field = ProbabilityFlow::new(&model, &spec);
    let mut r = stream(10, domain::EVAL, 0);
    let mut worst: f64 = 0.0;
    for &t in &[0.05, 0.3, 0.9] {
        let x: Vec<f64> = (0..8).map(|_| r.sample(StandardNormal)).collect();
        let probes = draw_probes(8, 10_000, ProbeKind::Rademacher, &mut r);
        let w: Welford = hutchinson_terms(&field, &x, t, &probes).into_iter().collect();
        worst = worst.max((w.mean() - field.exact_divergence(&x, t)).abs() / w.std_error());
    }
    outcome(worst < 3.0, format!("max |Hutchinson - exact| = {worst:.2} SE at 3 (x, t) pairs, 1e4 probes, D=8 (< 3)"))
}

fn score_mlp_gradients(n: usize) -> f64 {
    let spec = SdeSpec::vp(0.1, 20.0);
    let mut r = stream(11, domain::INIT, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let dim = r.random_range(1..=5);
        let depth = r.random_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| r.random_range(3..=12)).collect();
        let layout = ScoreMlpLayout {
            dim,
            hidden,
            embedding: TimeEmbedding {
                num_frequencies: r.random_range(1..=4),
                scale: 0.3,
            },
            output_scaling: if r.random::<bool>() { OutputScaling::InverseSigma } else { OutputScaling::Identity },
        };
        let model = ScoreMlp::new(&layout, 1.0, &mut r);
        let x: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        let h: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        let t = 0.01 + 0.99 * r.random::<f64>();
        let loss = |m: &ScoreMlp, x: &[f64]| {
            let s = m.score(&spec, x, t);
            0.5 * s.iter().zip(&h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let s = model.score(&spec, &x, t);
        let up: Vec<f64> = s.iter().zip(&h).map(|(a, b)| a - b).collect();
        let g = model.score_grad_params(&spec, &x, t, &up);
        for _ in 0..8 {
            let j = r.random_range(0..model.n_params());
            let fd = finite_diff_grad(
                |p| {
                    let mut m = model.clone();
                    m.params_mut()[j] = p[0];
                    loss(&m, &x)
                },
                &[model.params()[j]],
                1e-5,
            )[0];
            worst = worst.max(rel_err(g[j], fd));
        }
        let gx = model.score_vjp(&spec, &x, t, &up);
        let fdx = finite_diff_grad(|y| loss(&model, y), &x, 1e-5);
        for (a, b) in gx.iter().zip(&fdx) {
            worst = worst.max(rel_err(*a, *b));
        }
    }
    worst
}

fn flow_gradients(n: usize) -> f64 {
    let spec = SdeSpec::vp(0.1, 20.0);
    let mut r = stream(11, domain::FLOW, 0);
    let mut worst: f64 = 0.0;
    let bound = BoundConfig {
        n_time_samples: 6,
        correction_draws: 2,
        ..BoundConfig::default()
    };
    for _ in 0..n {
        let dim = r.random_range(2..=6);
        let levels = r.random_range(4..=16);
        let layout = DequantLayout {
            n_couplings: r.random_range(2..=4),
            hidden: vec![r.random_range(4..=12)],
            ..DequantLayout::new(dim, levels, None)
        };
        let flow = DequantFlow::new(&layout, 0.5, &mut r).unwrap();
        let score = ScoreMlp::new(&ScoreMlpLayout::new(dim, vec![8]), 1.0, &mut r);
        let x: Vec<u32> = (0..dim).map(|_| r.random_range(0..levels)).collect();
        let eps: Vec<f64> = (0..dim).map(|_| r.random_range(-2.0..2.0)).collect();
        let seed: u64 = r.random();
        let (_, g) = objective_grad_at(&flow, &score, &spec, &x, &eps, seed, &bound).unwrap();
        for _ in 0..8 {
            let j = r.random_range(0..flow.n_params());
            let fd = finite_diff_grad(
                |p| {
                    let mut f = flow.clone();
                    f.params_mut()[j] = p[0];
                    objective_grad_at(&f, &score, &spec, &x, &eps, seed, &bound).unwrap().0
                },
                &[flow.params()[j]],
                1e-5,
            )[0];
            worst = worst.max(rel_err(g[j], fd));
        }
    }
    worst
}

fn c11() -> Outcome {
    let a = score_mlp_gradients(10);
    let b = flow_gradients(10);
    outcome(
        a < 1e-4 && b < 1e-4,
        format!("max relative error: score MLP {a:.2e}, dequantization flow {b:.2e} over 10 random configurations each (< 1e-4)"),
    )
}

fn c12() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let ds = Dataset::new(DatasetKind::default_image(), Split::Train, 0).unwrap();
    let model_cfg = ModelConfig {
        hidden: vec![128, 128],
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        steps: 4000,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let score = train_score_model(&spec, &ds, &model_cfg, &train).unwrap().model;
    let cfg = DequantTrainConfig {
        steps: 1500,
        batch_size: 16,
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
    let flow = train_dequant_flow(&spec, &score, &ds, &cfg).unwrap().flow;
    let xs = ds.with_split(Split::Test).draw(64).discrete().unwrap();
    let eval = DequantObjectiveConfig {
        bound: BoundConfig {
            n_time_samples: 256,
            ..BoundConfig::default()
        },
        noise_draws: 4,
    };
    let mut uni = Welford::new();
    let mut var = Welford::new();
    let mut diff = Welford::new();
    for (i, x) in xs.iter().enumerate() {
        let u = uniform_deq_objective(&score, &spec, x, 8, &eval, &mut stream(12, domain::EVAL, i as u64)).unwrap();
        let v = var_deq_objective(&flow, &score, &spec, x, &eval, &mut stream(12, domain::EVAL, i as u64)).unwrap();
        uni.push(u.value);
        var.push(v.value);
        diff.push(v.value - u.value);
    }
    let d = 16.0 * std::f64::consts::LN_2;
    outcome(
        var.mean() <= uni.mean(),
        format!(
            "held-out bound: variational {:.4} vs uniform {:.4} bits/dim (diff {:.3} +- {:.3} nats) on 64 images",
            var.mean() / d,
            uni.mean() / d,
            diff.mean(),
            diff.std_error()
        ),
    )
}

fn c13() -> Outcome {
    let spec = SdeSpec::vp(0.1, 20.0);
    let g = AnalyticGaussian::new(vec![0.5, -1.0], vec![0.2, 3.0]).unwrap();
    let n = 100_000;
    let em = EulerMaruyama::default();
    let solver = SolverConfig::default();
    let stats = |ode: bool| {
        let mut w = vec![Welford::new(); 4];
        for i in 0..n {
            let mut r = stream(13, if ode { domain::EVAL } else { domain::TEST_DATA }, i);
            let x = if ode {
                sample_ode(&g, &spec, &solver, &mut r).unwrap()
            } else {
                sample_reverse_sde(&g, &spec, &em, &mut r).unwrap()
            };
            for k in 0..2 {
                w[k].push(x[k]);
                w[2 + k].push(x[k] * x[k]);
            }
        }
        w
    };
    let a = stats(true);
    let b = stats(false);
    let worst = (0..4)
        .map(|k| (a[k].mean() - b[k].mean()).abs() / (a[k].std_error().powi(2) + b[k].std_error().powi(2)).sqrt())
        .fold(0.0, f64::max);
    outcome(
        worst < 4.0,
        format!(
            "max moment difference {worst:.2} SE over first and second moments, 1e5 samples each (< 4); ODE mean ({:.4}, {:.4}), SDE mean ({:.4}, {:.4})",
            a[0].mean(),
            a[1].mean(),
            b[0].mean(),
            b[1].mean()
        ),
    )
}

fn c14() -> Outcome {
    let field = ClosureField::new(1, |x: &[f64], _t| vec![-x[0]]);
    let solve = |tol: f64| {
        let cfg = SolverConfig::default().with_tolerance(tol);
        let rec = rk45_integrate(&field, &[1.0], 0.0, 1.0, &cfg, Rk45Options::default(), &mut stream(14, domain::EVAL, 0)).unwrap();
        ((rec.final_state()[0] - (-1.0f64).exp()).abs(), rec.n_accepted)
    };
    let (err, steps) = solve(1e-5);
    let (tight, tight_steps) = solve(1e-7);
    outcome(
        err < 1e-7,
        format!(
            "|x(1) - e^-1| = {err:.3e} at rtol=atol=1e-5 in {steps} steps (< 1e-7 required; tolerance 1e-7 gives {tight:.2e} in {tight_steps} steps)"
        ),
    )
}

const TITLES: [&str; 14] = [
    "large-scale results disclaimer",
    "exact-score likelihood oracle",
    "bound tightness at the exact score",
    "SM and DSM bounds agree",
    "constant-offset equivalence",
    "importance sampling unbiased, lower variance",
    "likelihood weighting improves test NLL",
    "bound above ODE NLL",
    "entropy estimators",
    "Hutchinson divergence",
    "gradient checks",
    "variational dequantization improves the bound",
    "ODE and SDE samplers agree",
    "RK45 baseline accuracy",
];

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut fx = Fixtures::default();
    let mut failed = Vec::new();
    let mut ran = 0;
    for n in 1..=14usize {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(|| match n {
            1 => c1(),
            2 => c2(),
            3 => c3(),
            4 => c4(),
            5 => c5(),
            6 => c6(&mut fx),
            7 => c7(&mut fx),
            8 => c8(&mut fx),
            9 => c9(),
            10 => c10(),
            11 => c11(),
            12 => c12(),
            13 => c13(),
            _ => c14(),
        }));
        let out = res.unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.pass {
            failed.push(n);
        }
        println!(
            "criterion {n:>2} {} [{:.1}s] {}: {}",
            if out.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            TITLES[n - 1],
            out.detail
        );
    }
    println!("acceptance: {}/{ran} passed; failed: {failed:?}", ran - failed.len());
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
