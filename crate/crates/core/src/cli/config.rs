//! Experiment configuration file (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, DatasetKind, Split};
use crate::error::{Error, Result};
use crate::likelihood::{BoundConfig, EntropyOptions};
use crate::sde::SdeSpec;
use crate::solvers::{EulerMaruyama, SolverConfig};
use crate::training::{DequantTrainConfig, ModelConfig, TrainConfig};

/// Evaluation settings shared by `nll`, `bound`, `entropy` and `dequant-eval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub n_time_samples: usize,
    pub use_importance: bool,
    /// Held-out points drawn from the test split.
    pub n_eval_points: usize,
    pub draws_per_time: usize,
    pub correction_draws: usize,
    /// Noise draws per point for the dequantized bounds.
    pub noise_draws: usize,
    /// Quadrature nodes per panel for the entropy estimate.
    pub entropy_nodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_time_samples: 1000,
            use_importance: true,
            n_eval_points: 200,
            draws_per_time: 1,
            correction_draws: 16,
            noise_draws: 4,
            entropy_nodes: EntropyOptions::default().n_nodes,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn bound_config(&self) -> BoundConfig {
        BoundConfig {
            n_time_samples: self.n_time_samples,
            use_importance: self.use_importance,
            draws_per_time: self.draws_per_time,
            correction_draws: self.correction_draws,
            ..BoundConfig::default()
        }
    }
}

fn default_sde() -> SdeSpec {
    SdeSpec::vp(0.1, 20.0)
}

fn default_dataset() -> Dataset {
    Dataset::new(DatasetKind::default_mixture(), Split::Train, 0).expect("default mixture is valid")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

/// Everything a subcommand needs; unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_sde")]
    pub sde: SdeSpec,
    #[serde(default = "default_dataset")]
    pub dataset: Dataset,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sampler: EulerMaruyama,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub dequant: DequantTrainConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sde: default_sde(),
            dataset: default_dataset(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            solver: SolverConfig::default(),
            sampler: EulerMaruyama::default(),
            eval: EvalConfig::default(),
            dequant: DequantTrainConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sde.validate()?;
        self.dataset.validate()?;
        self.train.validate()?;
        self.solver.validate()?;
        self.dequant.validate()?;
        self.eval.bound_config().validate()?;
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) {
            return Err(Error::config("model.hidden needs at least one positive width"));
        }
        if self.sampler.n_steps == 0 {
            return Err(Error::config("sampler.n_steps must be positive"));
        }
        if self.eval.n_eval_points == 0 || self.eval.noise_draws == 0 {
            return Err(Error::config("eval.n_eval_points and eval.noise_draws must be positive"));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// SHA-256 of [`ExperimentConfig::to_toml`] with `output_dir` blanked, so the
    /// same job written to two places hashes the same.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(hex(&Sha256::digest(c.to_toml()?.as_bytes())))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
output_dir = "out"
[sde]
kind = "subvp"
epsilon = 0.01
[dataset]
kind = "gaussian"
mu0 = [0.5, -1.0]
var0 = [0.2, 3.0]
[train]
steps = 10
scheme = "original"
proposal = "uniform_time"
[solver]
rtol = 1e-6
divergence = { mode = "hutchinson", n_probes = 2 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.train.steps, 10);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
        let moved = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..cfg.clone()
        };
        assert_eq!(moved.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("[train]\nstepz = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("stepz"), "{err}");
        let err = ExperimentConfig::from_toml("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("[train]\nsteps = 0\n").is_err());
        assert!(ExperimentConfig::from_toml("[sde]\nkind = \"vp\"\nbeta_min = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[dataset]\nkind = \"gaussian\"\nlevels = 4\n").is_err());
    }
}
