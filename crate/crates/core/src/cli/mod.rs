//! Command-line front end.
//!
//! Every subcommand reads an [`ExperimentConfig`], writes its outputs under
//! `output_dir`, and leaves a `<command>.manifest.json` next to them.
//! Failures print one JSON object on stderr and exit with 2 (configuration),
//! 3 (numerical failure) or 4 (I/O).

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use config::{EvalConfig, ExperimentConfig};
pub use output::{summarize, Manifest, Summary};

use crate::data::{uniform_dequantize, Batch, Split};
use crate::dequant::{uniform_deq_objective, var_deq_objective, DequantFlow, DequantObjectiveConfig};
use crate::error::{Error, Result};
use crate::likelihood::{
    bits_per_dim, bound_parts, ode_log_likelihood, BoundForm, EntropyForm, EntropyOptions, LikelihoodKind,
};
use crate::objectives::{mc_objective_importance, mc_objective_uniform};
use crate::rng::{child_seed, domain, stream};
use crate::score::{ScoreFunction, ScoreMlp, ScoreModel};
use crate::sde::WeightingScheme;
use crate::solvers::{sample_ode, sample_reverse_sde};
use crate::training::{param_hash, train_dequant_flow, train_score_model};
use output::{par_map, write_json, write_jsonl};

#[derive(Debug, Parser)]
#[command(name = "scoreflow", version, about = "Likelihood training and evaluation for score-based diffusion models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sde,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Sm,
    Dsm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyArg {
    Drift,
    Divergence,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a score model and write `score.ckpt` and `loss_history.csv`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Write the exact score of a Gaussian dataset instead of training.
        #[arg(long)]
        exact: bool,
    },
    /// Draw samples to CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "ode")]
        method: Method,
        #[arg(long, short, default_value_t = 1000)]
        n: usize,
    },
    /// Exact ODE negative log-likelihood of held-out points.
    Nll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Variational upper bounds on the negative log-likelihood of held-out points.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "dsm")]
        form: FormArg,
        /// Add the denoising correction (bound on the untruncated model).
        #[arg(long)]
        corrected: bool,
    },
    /// Entropy of the data law from held-out samples.
    Entropy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "drift")]
        form: EntropyArg,
    },
    /// Compare uniform and importance-sampled objective estimators.
    BenchVariance {
        #[command(flatten)]
        common: Common,
        /// Score model to evaluate; a fresh initialization when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
    },
    /// Train a dequantization flow against a frozen score model.
    DequantTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Uniform and variational dequantization bounds on held-out discrete data.
    DequantEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Flow checkpoint; only the uniform bound is reported without it.
        #[arg(long)]
        flow: Option<PathBuf>,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::CheckpointMismatch(_) | Error::Input(_) | Error::Unsupported(_) | Error::Serde(_) => 2,
        Error::DegenerateTransition { .. } | Error::Stiffness { .. } | Error::NonFinite { .. } | Error::InverseCdf { .. } => 3,
        Error::Io(_) => 4,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::CheckpointMismatch(_) => "checkpoint_mismatch",
        Error::Input(_) => "input",
        Error::Unsupported(_) => "unsupported",
        Error::Serde(_) => "serialization",
        Error::DegenerateTransition { .. } => "degenerate_transition",
        Error::Stiffness { .. } => "stiffness",
        Error::NonFinite { .. } => "non_finite",
        Error::InverseCdf { .. } => "inverse_cdf",
        Error::Io(_) => "io",
    }
}

/// Machine-readable error object printed on stderr.
pub fn error_json(e: &Error) -> serde_json::Value {
    json!({ "error": { "kind": error_kind(e), "message": e.to_string(), "exit_code": exit_code(e) } })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    manifest: Manifest,
}

impl Ctx {
    fn new(command: &str, common: &Common, args: serde_json::Value) -> Result<Ctx> {
        let cfg = ExperimentConfig::load(&common.config)?;
        let out = common.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
        std::fs::create_dir_all(&out)?;
        let manifest = Manifest::new(command, &cfg, args)?;
        Ok(Ctx { cfg, out, manifest })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(mut self, summary: &serde_json::Value) -> Result<()> {
        let name = format!("{}.summary.json", self.manifest.command);
        write_json(&self.path(&name), summary)?;
        self.manifest.record(&self.path(&name))?;
        std::fs::write(self.path("config.toml"), self.cfg.to_toml()?)?;
        self.manifest.write(&self.out)?;
        let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Serde(e.to_string()))?;
        // a closed stdout is not a failure of the run
        let _ = writeln!(std::io::stdout(), "{text}");
        Ok(())
    }
}

/// Loads a score checkpoint and checks it against the configuration.
pub fn load_score(cfg: &ExperimentConfig, path: &Path) -> Result<ScoreModel> {
    let model = ScoreModel::load(path)?;
    let dim = cfg.dataset.dim();
    if model.dim() != dim {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint has dimension {}, dataset has {dim}",
            model.dim()
        )));
    }
    if let ScoreModel::Mlp(m) = &model {
        let expected = cfg.model.layout(dim);
        if m.layout() != expected {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint layout {:?} differs from configured {:?}",
                m.layout(),
                expected
            )));
        }
    }
    Ok(model)
}

/// Held-out evaluation points; discrete data are uniformly dequantized onto `[0, 1)`.
pub fn eval_points(cfg: &ExperimentConfig) -> Result<(Vec<Vec<f64>>, Option<u32>)> {
    let test = cfg.dataset.with_split(Split::Test);
    match test.draw(cfg.eval.n_eval_points) {
        Batch::Continuous(v) => Ok((v, None)),
        Batch::Discrete(v) => {
            let levels = test.levels().expect("discrete data has levels");
            let pts = v
                .iter()
                .enumerate()
                .map(|(i, x)| uniform_dequantize(x, levels, &mut stream(cfg.eval.seed, domain::EVAL, i as u64)))
                .collect::<Result<_>>()?;
            Ok((pts, Some(levels)))
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Train { common, exact } => cmd_train(common, *exact),
        Command::Sample {
            common,
            checkpoint,
            method,
            n,
        } => cmd_sample(common, checkpoint, *method, *n),
        Command::Nll { common, checkpoint } => cmd_nll(common, checkpoint),
        Command::Bound {
            common,
            checkpoint,
            form,
            corrected,
        } => cmd_bound(common, checkpoint, *form, *corrected),
        Command::Entropy { common, checkpoint, form } => cmd_entropy(common, checkpoint, *form),
        Command::BenchVariance {
            common,
            checkpoint,
            draws,
        } => cmd_bench_variance(common, checkpoint.as_deref(), *draws),
        Command::DequantTrain { common, checkpoint } => cmd_dequant_train(common, checkpoint),
        Command::DequantEval {
            common,
            checkpoint,
            flow,
        } => cmd_dequant_eval(common, checkpoint, flow.as_deref()),
    }
}

fn cmd_train(common: &Common, exact: bool) -> Result<()> {
    let mut ctx = Ctx::new("train", common, json!({ "exact": exact }))?;
    let cfg = &ctx.cfg;
    let ckpt = ctx.path("score.ckpt");
    let summary = if exact {
        let g = cfg
            .dataset
            .analytic_gaussian()
            .ok_or_else(|| Error::Unsupported("--exact needs a gaussian dataset".into()))?;
        ScoreModel::AnalyticGaussian(g).save(&ckpt)?;
        json!({ "model": "analytic_gaussian", "checkpoint": ckpt })
    } else {
        let out = train_score_model(&cfg.sde, &cfg.dataset, &cfg.model, &cfg.train)?;
        let hist = ctx.path("loss_history.csv");
        out.history.save_csv(&hist)?;
        let params_sha256 = param_hash(out.model.params());
        ScoreModel::Mlp(out.model).save(&ckpt)?;
        ctx.manifest.record(&hist)?;
        let tail = &out.history.losses()[out.history.rows.len().saturating_sub(100)..];
        json!({
            "model": "score_mlp",
            "checkpoint": ckpt,
            "steps": cfg.train.steps,
            "scheme": out.history.scheme,
            "proposal": out.history.proposal,
            "final_loss_mean_last_100": crate::stats::mean(tail),
            "params_sha256": params_sha256,
            "held_out": out.history.evals.iter().map(|(s, v)| json!({ "step": s, "objective": v })).collect::<Vec<_>>(),
        })
    };
    ctx.manifest.record(&ckpt)?;
    ctx.finish(&summary)
}

fn cmd_sample(common: &Common, checkpoint: &Path, method: Method, n: usize) -> Result<()> {
    let args = json!({ "checkpoint": checkpoint, "method": format!("{method:?}").to_lowercase(), "n": n });
    let mut ctx = Ctx::new("sample", common, args)?;
    let cfg = ctx.cfg.clone();
    let model = load_score(&cfg, checkpoint)?;
    let seed = child_seed(cfg.eval.seed, 7);
    let samples = par_map(n, |i| {
        let mut rng = stream(seed, domain::EVAL, i as u64);
        match method {
            Method::Sde => sample_reverse_sde(&model, &cfg.sde, &cfg.sampler, &mut rng),
            Method::Ode => sample_ode(&model, &cfg.sde, &cfg.solver, &mut rng),
        }
    })?;
    let name = match method {
        Method::Sde => "samples_sde.csv",
        Method::Ode => "samples_ode.csv",
    };
    let path = ctx.path(name);
    let d = model.dim();
    let mut mean = vec![0.0; d];
    let mut second = vec![0.0; d];
    for s in &samples {
        for k in 0..d {
            mean[k] += s[k] / n as f64;
            second[k] += s[k] * s[k] / n as f64;
        }
    }
    Batch::Continuous(samples).save_csv(&path)?;
    ctx.manifest.record(&path)?;
    ctx.finish(&json!({ "samples": path, "n": n, "mean": mean, "second_moment": second }))
}

fn cmd_nll(common: &Common, checkpoint: &Path) -> Result<()> {
    let mut ctx = Ctx::new("nll", common, json!({ "checkpoint": checkpoint }))?;
    let cfg = ctx.cfg.clone();
    let model = load_score(&cfg, checkpoint)?;
    let (pts, levels) = eval_points(&cfg)?;
    let results = par_map(pts.len(), |i| {
        let mut rng = stream(child_seed(cfg.eval.seed, 1), domain::EVAL, i as u64);
        ode_log_likelihood(&model, &cfg.sde, &pts[i], &cfg.solver, &mut rng)
    })?;
    let rows: Vec<_> = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "index": i,
                "nll_nats": r.nll(),
                "bits_per_dim": bits_per_dim(r.logp_nats, r.dim, levels),
                "solver_steps": r.n_time_samples,
            })
        })
        .collect();
    let path = ctx.path("nll.jsonl");
    write_jsonl(&path, &rows)?;
    ctx.manifest.record(&path)?;
    let nll: Vec<f64> = results.iter().map(|r| r.nll()).collect();
    let summary = json!({
        "kind": LikelihoodKind::OdeExact.label(),
        "nll": summarize(&nll, pts[0].len(), levels),
        "rows": path,
    });
    ctx.finish(&summary)
}

fn cmd_bound(common: &Common, checkpoint: &Path, form: FormArg, corrected: bool) -> Result<()> {
    let form = match form {
        FormArg::Sm => BoundForm::Sm,
        FormArg::Dsm => BoundForm::Dsm,
    };
    let args = json!({ "checkpoint": checkpoint, "form": form, "corrected": corrected });
    let mut ctx = Ctx::new("bound", common, args)?;
    let cfg = ctx.cfg.clone();
    let model = load_score(&cfg, checkpoint)?;
    let (pts, levels) = eval_points(&cfg)?;
    let bcfg = cfg.eval.bound_config();
    let parts = par_map(pts.len(), |i| {
        let seed = child_seed(child_seed(cfg.eval.seed, 2), i as u64);
        bound_parts(&model, &cfg.sde, &pts[i], form, corrected, &bcfg, seed, None)
    })?;
    let vals: Vec<f64> = parts.iter().map(|p| p.value()).collect();
    let rows: Vec<_> = parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            json!({
                "index": i,
                "bound_nats": p.value(),
                "std_error": p.std_error(),
                "bits_per_dim": bits_per_dim(-p.value(), pts[i].len(), levels),
                "prior_term": p.prior_term,
                "time_integral": p.time_integral,
                "correction": p.correction,
            })
        })
        .collect();
    let name = format!("bound_{}{}.jsonl", if form == BoundForm::Sm { "sm" } else { "dsm" }, if corrected { "_corrected" } else { "" });
    let path = ctx.path(&name);
    write_jsonl(&path, &rows)?;
    ctx.manifest.record(&path)?;
    let kind = match (form, corrected) {
        (BoundForm::Dsm, false) => LikelihoodKind::BoundDsm,
        (BoundForm::Dsm, true) => LikelihoodKind::BoundDsmCorrected,
        (BoundForm::Sm, false) => LikelihoodKind::BoundSm,
        (BoundForm::Sm, true) => LikelihoodKind::BoundSmCorrected,
    };
    let summary = json!({
        "kind": kind.label(),
        "n_time_samples": bcfg.n_time_samples,
        "use_importance": bcfg.use_importance,
        "bound": summarize(&vals, pts[0].len(), levels),
        "rows": path,
    });
    ctx.finish(&summary)
}

fn cmd_entropy(common: &Common, checkpoint: &Path, form: EntropyArg) -> Result<()> {
    let form = match form {
        EntropyArg::Drift => EntropyForm::DriftDotScore,
        EntropyArg::Divergence => EntropyForm::DivergenceForm,
    };
    let ctx = Ctx::new("entropy", common, json!({ "checkpoint": checkpoint, "form": form }))?;
    let cfg = &ctx.cfg;
    let model = load_score(cfg, checkpoint)?;
    let (pts, _) = eval_points(cfg)?;
    let opts = EntropyOptions {
        n_nodes: cfg.eval.entropy_nodes,
        terminal_entropy: None,
        seed: child_seed(cfg.eval.seed, 3),
    };
    let est = crate::likelihood::entropy_estimate(&model, &cfg.sde, &pts, form, &opts)?;
    let truth = match cfg.dataset.true_entropy(100_000, &mut stream(cfg.eval.seed, domain::EVAL, u64::MAX)) {
        Ok((v, hw)) => json!({ "value_nats": v, "ci95": hw }),
        Err(Error::Unsupported(_)) => serde_json::Value::Null,
        Err(e) => return Err(e),
    };
    let ci = crate::stats::student_t_half_width(&est.per_sample, 0.95);
    let summary = json!({
        "form": est.form,
        "entropy_nats": est.value_nats,
        "std_error": est.std_error,
        "ci95": ci,
        "n_samples": pts.len(),
        "reference": truth,
    });
    ctx.finish(&summary)
}

fn cmd_bench_variance(common: &Common, checkpoint: Option<&Path>, draws: usize) -> Result<()> {
    let args = json!({ "checkpoint": checkpoint, "draws": draws });
    let mut ctx = Ctx::new("bench-variance", common, args)?;
    let cfg = ctx.cfg.clone();
    if draws < 2 {
        return Err(Error::config("bench-variance needs at least two draws"));
    }
    let model = match checkpoint {
        Some(p) => load_score(&cfg, p)?,
        None => {
            let layout = cfg.model.layout(cfg.dataset.dim());
            let init = &mut stream(cfg.train.seed, domain::INIT, 0);
            ScoreModel::Mlp(ScoreMlp::new(&layout, cfg.model.output_gain, init))
        }
    };
    let seed = child_seed(cfg.eval.seed, 4);
    let rows = par_map(draws, |i| {
        let mut data = stream(seed, domain::TEST_DATA, i as u64);
        let mut noise = stream(seed, domain::TEST_DATA, (i as u64) | (1 << 63));
        let batch = match cfg.dataset.with_split(Split::Test).sample_batch(cfg.train.batch_size, &mut data) {
            Batch::Continuous(v) => v,
            Batch::Discrete(v) => {
                let l = cfg.dataset.levels().expect("discrete data has levels");
                v.iter().map(|x| uniform_dequantize(x, l, &mut noise)).collect::<Result<_>>()?
            }
        };
        let mut ru = stream(seed, domain::EVAL, 2 * i as u64);
        let mut ri = stream(seed, domain::EVAL, 2 * i as u64 + 1);
        let u = mc_objective_uniform(&model, &cfg.sde, &batch, &mut ru, WeightingScheme::Likelihood)?;
        let s = mc_objective_importance(&model, &cfg.sde, &batch, &mut ri)?;
        Ok((u, s))
    })?;
    let path = ctx.path("variance.csv");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "draw,proposal,t,value")?;
        for (i, (u, s)) in rows.iter().enumerate() {
            writeln!(w, "{i},uniform,{:e},{:e}", u.t_sampled, u.value)?;
            writeln!(w, "{i},importance,{:e},{:e}", s.t_sampled, s.value)?;
        }
        w.flush()?;
    }
    ctx.manifest.record(&path)?;
    let uv: Vec<f64> = rows.iter().map(|r| r.0.value).collect();
    let iv: Vec<f64> = rows.iter().map(|r| r.1.value).collect();
    let (ratio, lo, hi) = crate::stats::bootstrap_variance_ratio(&iv, &uv, 1000, 0.99, &mut stream(seed, domain::EVAL, u64::MAX));
    let stat = |v: &[f64]| {
        let w: crate::stats::Welford = v.iter().copied().collect();
        json!({ "mean": w.mean(), "std_error": w.std_error(), "variance": w.variance() })
    };
    let summary = json!({
        "draws": draws,
        "batch_size": cfg.train.batch_size,
        "uniform": stat(&uv),
        "importance": stat(&iv),
        "variance_ratio_importance_over_uniform": ratio,
        "variance_ratio_ci99": [lo, hi],
        "rows": path,
    });
    ctx.finish(&summary)
}

fn cmd_dequant_train(common: &Common, checkpoint: &Path) -> Result<()> {
    let mut ctx = Ctx::new("dequant-train", common, json!({ "checkpoint": checkpoint }))?;
    let cfg = ctx.cfg.clone();
    let model = load_score(&cfg, checkpoint)?;
    let before = match &model {
        ScoreModel::Mlp(m) => param_hash(m.params()),
        ScoreModel::AnalyticGaussian(_) => String::new(),
    };
    let out = train_dequant_flow(&cfg.sde, &model, &cfg.dataset, &cfg.dequant)?;
    let flow_path = ctx.path("flow.ckpt");
    out.flow.save(&flow_path)?;
    let hist = ctx.path("dequant_history.csv");
    out.history.save_csv(&hist)?;
    ctx.manifest.record(&flow_path)?;
    ctx.manifest.record(&hist)?;
    let ema = out.history.ema(0.95);
    let summary = json!({
        "flow": flow_path,
        "steps": cfg.dequant.steps,
        "n_params": out.flow.n_params(),
        "first_loss": out.history.rows.first().map(|r| r.loss),
        "final_ema_loss": ema.last(),
        "score_params_sha256": before,
    });
    ctx.finish(&summary)
}

fn cmd_dequant_eval(common: &Common, checkpoint: &Path, flow: Option<&Path>) -> Result<()> {
    let mut ctx = Ctx::new("dequant-eval", common, json!({ "checkpoint": checkpoint, "flow": flow }))?;
    let cfg = ctx.cfg.clone();
    let model = load_score(&cfg, checkpoint)?;
    let levels = cfg
        .dataset
        .levels()
        .ok_or_else(|| Error::config("dequant-eval needs a discrete_image dataset"))?;
    let flow = flow.map(DequantFlow::load).transpose()?;
    if let Some(f) = &flow {
        if f.layout().dim != cfg.dataset.dim() || f.layout().levels != levels {
            return Err(Error::CheckpointMismatch("flow layout differs from the dataset".into()));
        }
    }
    let xs = cfg.dataset.with_split(Split::Test).draw(cfg.eval.n_eval_points).discrete()?;
    let ocfg = DequantObjectiveConfig {
        bound: cfg.eval.bound_config(),
        noise_draws: cfg.eval.noise_draws,
    };
    // both bounds see the same base noise and time draws
    let seed = child_seed(cfg.eval.seed, 5);
    let res = par_map(xs.len(), |i| {
        let u = uniform_deq_objective(&model, &cfg.sde, &xs[i], levels, &ocfg, &mut stream(seed, domain::EVAL, i as u64))?;
        let v = match &flow {
            Some(f) => Some(var_deq_objective(f, &model, &cfg.sde, &xs[i], &ocfg, &mut stream(seed, domain::EVAL, i as u64))?),
            None => None,
        };
        Ok((u, v))
    })?;
    let d = cfg.dataset.dim();
    let rows: Vec<_> = res
        .iter()
        .enumerate()
        .map(|(i, (u, v))| {
            json!({
                "index": i,
                "uniform_nats": u.value,
                "uniform_bpd": u.bits_per_dim(d),
                "variational_nats": v.as_ref().map(|v| v.value),
                "variational_bpd": v.as_ref().map(|v| v.bits_per_dim(d)),
            })
        })
        .collect();
    let path = ctx.path("dequant_eval.jsonl");
    write_jsonl(&path, &rows)?;
    ctx.manifest.record(&path)?;
    let uv: Vec<f64> = res.iter().map(|r| r.0.value).collect();
    let vv: Option<Vec<f64>> = res.iter().map(|r| r.1.as_ref().map(|v| v.value)).collect();
    // values already include D ln L, so no level offset here
    let summary = json!({
        "uniform": summarize(&uv, d, None),
        "variational": vv.as_ref().map(|v| summarize(v, d, None)),
        "rows": path,
    });
    ctx.finish(&summary)
}
