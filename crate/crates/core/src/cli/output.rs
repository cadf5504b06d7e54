//! Result files: JSON lines, summaries with confidence intervals, run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use crate::error::{Error, Result};
use crate::stats::{student_t_half_width, Welford};

/// Mean of per-point negative log-likelihoods (or bounds) with 95% Student-t half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean_nats: f64,
    pub std_error: f64,
    pub ci95_nats: f64,
    pub mean_bits_per_dim: f64,
    pub ci95_bits_per_dim: f64,
}

/// `values` are in nats on `-log p`; `levels` adds `log2 L` to bits/dim.
pub fn summarize(values: &[f64], dim: usize, levels: Option<u32>) -> Summary {
    let w: Welford = values.iter().copied().collect();
    let hw = student_t_half_width(values, 0.95);
    let per_bit = dim as f64 * std::f64::consts::LN_2;
    Summary {
        n: values.len(),
        mean_nats: w.mean(),
        std_error: w.std_error(),
        ci95_nats: hw,
        mean_bits_per_dim: w.mean() / per_bit + levels.map_or(0.0, |l| (l as f64).log2()),
        ci95_bits_per_dim: hw / per_bit,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: serde_json::Value,
    pub args: serde_json::Value,
    /// Resolved configuration; feeding it back reproduces the run.
    pub config: String,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, args: serde_json::Value) -> Result<Self> {
        Ok(Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash()?,
            seeds: serde_json::json!({
                "dataset": cfg.dataset.seed,
                "train": cfg.train.seed,
                "dequant": cfg.dequant.seed,
                "eval": cfg.eval.seed,
            }),
            args,
            config: cfg.to_toml()?,
            outputs: Vec::new(),
        })
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.outputs.push(OutputFile {
            path: path.to_path_buf(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        write_json(&path, &serde_json::to_value(self).map_err(|e| Error::Serde(e.to_string()))?)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_jsonl(path: &Path, rows: &[serde_json::Value]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Serde(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// `(0..n).map(f)` spread over the available cores, in order. The first error wins.
pub fn par_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| s.spawn(move || (k * chunk..((k + 1) * chunk).min(n)).map(f).collect::<Result<Vec<T>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
