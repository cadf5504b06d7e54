//! Synthetic datasets: Gaussians, Gaussian mixtures and small discrete images.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, stream, StreamRng};
use crate::score::AnalyticGaussian;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// `N(mu0, diag(var0))`.
    Gaussian { mu0: Vec<f64>, var0: Vec<f64> },
    /// Mixture of diagonal Gaussians.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
    },
    /// `side x side` images with values in `0..levels`, from a quantized smooth random field.
    DiscreteImage { side: usize, levels: u32, generator_seed: u64 },
}

impl DatasetKind {
    /// Two equal-weight unit-variance components at `+-(2, 2)`.
    pub fn default_mixture() -> Self {
        DatasetKind::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![vec![2.0, 2.0], vec![-2.0, -2.0]],
            vars: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        }
    }

    /// 4x4 images on 8 levels.
    pub fn default_image() -> Self {
        DatasetKind::DiscreteImage {
            side: 4,
            levels: 8,
            generator_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl Split {
    fn domain(self) -> u64 {
        match self {
            Split::Train => domain::TRAIN_DATA,
            Split::Test => domain::TEST_DATA,
        }
    }
}

/// A batch of points, continuous or discrete.
#[derive(Debug, Clone, PartialEq)]
pub enum Batch {
    Continuous(Vec<Vec<f64>>),
    Discrete(Vec<Vec<u32>>),
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::Continuous(v) => v.len(),
            Batch::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn continuous(self) -> Result<Vec<Vec<f64>>> {
        match self {
            Batch::Continuous(v) => Ok(v),
            Batch::Discrete(_) => Err(Error::Input("expected continuous data, got discrete images".into())),
        }
    }

    pub fn discrete(self) -> Result<Vec<Vec<u32>>> {
        match self {
            Batch::Discrete(v) => Ok(v),
            Batch::Continuous(_) => Err(Error::Input("expected discrete images, got continuous data".into())),
        }
    }

    /// One row per point, comma separated, with a `x0,x1,...` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = match self {
            Batch::Continuous(v) => v.first().map_or(0, |r| r.len()),
            Batch::Discrete(v) => v.first().map_or(0, |r| r.len()),
        };
        let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        match self {
            Batch::Continuous(rows) => {
                for r in rows {
                    let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
            Batch::Discrete(rows) => {
                for r in rows {
                    let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    /// Reads a CSV written by [`Batch::write_csv`]; integer-only files load as discrete.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Batch> {
        let mut lines = r.lines();
        match lines.next() {
            Some(h) => {
                h?;
            }
            None => return Err(Error::Input("empty CSV".into())),
        }
        let rows: Vec<Vec<String>> = lines
            .filter_map(|l| match l {
                Ok(l) if l.trim().is_empty() => None,
                other => Some(other),
            })
            .map(|l| Ok(l?.split(',').map(|c| c.trim().to_string()).collect()))
            .collect::<Result<_>>()?;
        let integral = rows.iter().flatten().all(|c| c.parse::<u32>().is_ok());
        if integral && !rows.is_empty() {
            let v = rows.iter().map(|r| r.iter().map(|c| c.parse::<u32>().unwrap()).collect()).collect();
            return Ok(Batch::Discrete(v));
        }
        let v = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .map(|c| c.parse::<f64>().map_err(|e| Error::Input(format!("row {i}: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Batch::Continuous(v))
    }

    pub fn load_csv(path: &Path) -> Result<Batch> {
        Batch::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// A synthetic dataset with deterministic, split-specific streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetConfig", into = "DatasetConfig")]
pub struct Dataset {
    pub kind: DatasetKind,
    pub split: Split,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Gaussian,
    GaussianMixture,
    DiscreteImage,
}

/// Flat on-disk form of [`Dataset`]; omitted parameters take the kind's defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetConfig {
    kind: Option<KindTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    var0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    means: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vars: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    side: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generator_seed: Option<u64>,
    split: Option<Split>,
    seed: Option<u64>,
}

impl TryFrom<DatasetConfig> for Dataset {
    type Error = Error;

    fn try_from(c: DatasetConfig) -> Result<Self> {
        let tag = c.kind.unwrap_or(KindTag::GaussianMixture);
        let stray = |present: bool, name: &str| -> Result<()> {
            if present {
                Err(Error::config(format!("dataset key `{name}` does not apply to this kind")))
            } else {
                Ok(())
            }
        };
        let kind = match tag {
            KindTag::Gaussian => {
                stray(c.weights.is_some() || c.means.is_some() || c.vars.is_some(), "weights/means/vars")?;
                stray(c.side.is_some() || c.levels.is_some() || c.generator_seed.is_some(), "side/levels/generator_seed")?;
                let mu0 = c.mu0.unwrap_or_else(|| vec![0.0, 0.0]);
                let var0 = c.var0.unwrap_or_else(|| vec![1.0; mu0.len()]);
                DatasetKind::Gaussian { mu0, var0 }
            }
            KindTag::GaussianMixture => {
                stray(c.mu0.is_some() || c.var0.is_some(), "mu0/var0")?;
                stray(c.side.is_some() || c.levels.is_some() || c.generator_seed.is_some(), "side/levels/generator_seed")?;
                match (c.weights, c.means, c.vars) {
                    (None, None, None) => DatasetKind::default_mixture(),
                    (w, Some(means), v) => {
                        let k = means.len();
                        let d = means.first().map_or(0, |m| m.len());
                        DatasetKind::GaussianMixture {
                            weights: w.unwrap_or_else(|| vec![1.0 / k as f64; k]),
                            vars: v.unwrap_or_else(|| vec![vec![1.0; d]; k]),
                            means,
                        }
                    }
                    _ => return Err(Error::config("mixture weights/vars given without means")),
                }
            }
            KindTag::DiscreteImage => {
                stray(c.mu0.is_some() || c.var0.is_some(), "mu0/var0")?;
                stray(c.weights.is_some() || c.means.is_some() || c.vars.is_some(), "weights/means/vars")?;
                DatasetKind::DiscreteImage {
                    side: c.side.unwrap_or(4),
                    levels: c.levels.unwrap_or(8),
                    generator_seed: c.generator_seed.unwrap_or(0),
                }
            }
        };
        Dataset::new(kind, c.split.unwrap_or_default(), c.seed.unwrap_or(0))
    }
}

impl From<Dataset> for DatasetConfig {
    fn from(d: Dataset) -> Self {
        let mut c = DatasetConfig {
            split: Some(d.split),
            seed: Some(d.seed),
            ..DatasetConfig::default()
        };
        match d.kind {
            DatasetKind::Gaussian { mu0, var0 } => {
                c.kind = Some(KindTag::Gaussian);
                c.mu0 = Some(mu0);
                c.var0 = Some(var0);
            }
            DatasetKind::GaussianMixture { weights, means, vars } => {
                c.kind = Some(KindTag::GaussianMixture);
                c.weights = Some(weights);
                c.means = Some(means);
                c.vars = Some(vars);
            }
            DatasetKind::DiscreteImage {
                side,
                levels,
                generator_seed,
            } => {
                c.kind = Some(KindTag::DiscreteImage);
                c.side = Some(side);
                c.levels = Some(levels);
                c.generator_seed = Some(generator_seed);
            }
        }
        c
    }
}

impl Dataset {
    pub fn new(kind: DatasetKind, split: Split, seed: u64) -> Result<Self> {
        let ds = Dataset { kind, split, seed };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_split(&self, split: Split) -> Self {
        Dataset { split, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DatasetKind::Gaussian { mu0, var0 } => {
                AnalyticGaussian::new(mu0.clone(), var0.clone())?;
            }
            DatasetKind::GaussianMixture { weights, means, vars } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
                    return Err(Error::config("mixture weights, means and vars must have equal nonzero length"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::config("mixture weights must be positive"));
                }
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::config("mixture weights must sum to 1"));
                }
                let d = means[0].len();
                if d == 0 || means.iter().chain(vars).any(|m| m.len() != d) {
                    return Err(Error::config("mixture components must share a nonzero dimension"));
                }
                if vars.iter().flatten().any(|v| !(*v > 0.0)) {
                    return Err(Error::config("mixture variances must be positive"));
                }
            }
            DatasetKind::DiscreteImage { side, levels, .. } => {
                if *side == 0 || *levels < 2 {
                    return Err(Error::config("discrete images need side >= 1 and levels >= 2"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DatasetKind::Gaussian { mu0, .. } => mu0.len(),
            DatasetKind::GaussianMixture { means, .. } => means[0].len(),
            DatasetKind::DiscreteImage { side, .. } => side * side,
        }
    }

    pub fn levels(&self) -> Option<u32> {
        match &self.kind {
            DatasetKind::DiscreteImage { levels, .. } => Some(*levels),
            _ => None,
        }
    }

    /// The stream this dataset's split draws from.
    pub fn split_rng(&self) -> StreamRng {
        stream(self.seed, self.split.domain(), 0)
    }

    /// First `n` points of this split.
    pub fn draw(&self, n: usize) -> Batch {
        self.sample_batch(n, &mut self.split_rng())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        match &self.kind {
            DatasetKind::Gaussian { mu0, var0 } => Batch::Continuous(
                (0..n)
                    .map(|_| {
                        mu0.iter()
                            .zip(var0)
                            .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect(),
            ),
            DatasetKind::GaussianMixture { weights, means, vars } => Batch::Continuous(
                (0..n)
                    .map(|_| {
                        let k = pick(weights, rng.random::<f64>());
                        means[k]
                            .iter()
                            .zip(&vars[k])
                            .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect(),
            ),
            DatasetKind::DiscreteImage {
                side,
                levels,
                generator_seed,
            } => {
                let field = FieldBasis::new(*side, *generator_seed);
                Batch::Discrete((0..n).map(|_| field.sample(*levels, rng)).collect())
            }
        }
    }

    /// Exact log-density of the continuous kinds.
    pub fn true_logpdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!("point has length {}, dataset dimension {}", x.len(), self.dim())));
        }
        match &self.kind {
            DatasetKind::Gaussian { mu0, var0 } => Ok(diag_logpdf(x, mu0, var0)),
            DatasetKind::GaussianMixture { weights, means, vars } => {
                let terms: Vec<f64> = (0..weights.len())
                    .map(|k| weights[k].ln() + diag_logpdf(x, &means[k], &vars[k]))
                    .collect();
                let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
            }
            DatasetKind::DiscreteImage { .. } => {
                Err(Error::Unsupported("true_logpdf is not defined for discrete images".into()))
            }
        }
    }

    /// Differential entropy and a 95% confidence half-width (zero when exact).
    ///
    /// Gaussians use the closed form; mixtures average `-log p` over `n_mc`
    /// fresh samples from `rng`.
    pub fn true_entropy<R: Rng + ?Sized>(&self, n_mc: usize, rng: &mut R) -> Result<(f64, f64)> {
        match &self.kind {
            DatasetKind::Gaussian { var0, .. } => {
                Ok((var0.iter().map(|v| 0.5 * (LN_2PI + 1.0 + v.ln())).sum(), 0.0))
            }
            DatasetKind::GaussianMixture { .. } => {
                if n_mc < 2 {
                    return Err(Error::config("mixture entropy needs at least two Monte Carlo samples"));
                }
                let mut w = crate::stats::Welford::new();
                let chunk = 4096;
                let mut left = n_mc;
                while left > 0 {
                    let m = left.min(chunk);
                    for x in self.sample_batch(m, rng).continuous()? {
                        w.push(-self.true_logpdf(&x)?);
                    }
                    left -= m;
                }
                Ok((w.mean(), 1.959_963_984_540_054 * w.std_error()))
            }
            DatasetKind::DiscreteImage { .. } => {
                Err(Error::Unsupported("differential entropy is not defined for discrete images".into()))
            }
        }
    }

    /// The Gaussian data law as an exact score oracle, when this is a Gaussian dataset.
    pub fn analytic_gaussian(&self) -> Option<AnalyticGaussian> {
        match &self.kind {
            DatasetKind::Gaussian { mu0, var0 } => AnalyticGaussian::new(mu0.clone(), var0.clone()).ok(),
            _ => None,
        }
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

fn diag_logpdf(x: &[f64], m: &[f64], v: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| -0.5 * ((x[i] - m[i]).powi(2) / v[i] + LN_2PI + v[i].ln()))
        .sum()
}

/// Per-pixel white noise added to the smooth field.
const PIXEL_NOISE: f64 = 0.15;

/// The three lowest cosine modes, shared by every image of a dataset.
struct FieldBasis {
    side: usize,
    /// (fx, fy, phase, amplitude)
    modes: Vec<(f64, f64, f64, f64)>,
    offset: Vec<f64>,
}

impl FieldBasis {
    fn new(side: usize, generator_seed: u64) -> Self {
        let mut r = stream(generator_seed, domain::TRAIN_DATA, u64::MAX);
        let mut modes = Vec::new();
        for (fx, fy) in [(1u32, 0u32), (0, 1), (1, 1)] {
            let amp = 1.0 / (1.0 + (fx * fx + fy * fy) as f64);
            modes.push((fx as f64, fy as f64, r.random::<f64>() * std::f64::consts::TAU, amp));
        }
        let offset = (0..side * side).map(|_| 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
        FieldBasis { side, modes, offset }
    }

    fn sample<R: Rng + ?Sized>(&self, levels: u32, rng: &mut R) -> Vec<u32> {
        let coef: Vec<(f64, f64)> = self
            .modes
            .iter()
            .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let norm: f64 = self.modes.iter().map(|m| m.3 * m.3).sum::<f64>().sqrt();
        let n = self.side as f64;
        let mut out = Vec::with_capacity(self.side * self.side);
        for i in 0..self.side {
            for j in 0..self.side {
                let mut v = self.offset[i * self.side + j] + PIXEL_NOISE * rng.sample::<f64, _>(StandardNormal);
                for ((fx, fy, ph, amp), (a, b)) in self.modes.iter().zip(&coef) {
                    let arg = std::f64::consts::TAU * (fx * i as f64 + fy * j as f64) / n + ph;
                    v += amp * (a * arg.cos() + b * arg.sin()) / norm;
                }
                // logistic squashing of a roughly unit-variance field
                let u = 1.0 / (1.0 + (-1.7 * v).exp());
                out.push(((u * levels as f64) as u32).min(levels - 1));
            }
        }
        out
    }
}

/// `(x + u) / L` for a given noise vector `u` in `[0, 1)^D`.
pub fn dequantize(x: &[u32], u: &[f64], levels: u32) -> Result<Vec<f64>> {
    check_levels(x, levels)?;
    if u.len() != x.len() {
        return Err(Error::Input("noise and data lengths differ".into()));
    }
    Ok(x.iter().zip(u).map(|(&k, u)| (k as f64 + u) / levels as f64).collect())
}

/// `(x + u) / L` with `u ~ U[0, 1)^D`.
pub fn uniform_dequantize<R: Rng + ?Sized>(x: &[u32], levels: u32, rng: &mut R) -> Result<Vec<f64>> {
    let u: Vec<f64> = x.iter().map(|_| rng.random::<f64>()).collect();
    dequantize(x, &u, levels)
}

pub(crate) fn check_levels(x: &[u32], levels: u32) -> Result<()> {
    if let Some((i, k)) = x.iter().enumerate().find(|(_, k)| **k >= levels) {
        return Err(Error::Input(format!("level {k} at index {i} is outside 0..{levels}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use rand::SeedableRng;

    #[test]
    fn standard_gaussian_logpdf_at_origin() {
        let ds = Dataset::new(
            DatasetKind::Gaussian {
                mu0: vec![0.0, 0.0],
                var0: vec![1.0, 1.0],
            },
            Split::Train,
            0,
        )
        .unwrap();
        assert!((ds.true_logpdf(&[0.0, 0.0]).unwrap() + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        assert!((ds.true_logpdf(&[0.0, 0.0]).unwrap() + 1.83788).abs() < 1e-5);
    }

    #[test]
    fn mixture_logpdf_is_log_average_at_symmetry_point() {
        let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 0).unwrap();
        let x = [0.0, 0.0];
        let a = oracles::gaussian_logpdf(&x, &[2.0, 2.0], &[1.0, 1.0]);
        let b = oracles::gaussian_logpdf(&x, &[-2.0, -2.0], &[1.0, 1.0]);
        let want = (0.5 * a.exp() + 0.5 * b.exp()).ln();
        assert!((ds.true_logpdf(&x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mixture_entropy_monte_carlo_oracle() {
        let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 0).unwrap();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (h, hw) = ds.true_entropy(1_000_000, &mut r).unwrap();
        // well separated components: close to ln 2 + the component entropy
        let comp = oracles::gaussian_entropy(&[1.0, 1.0]);
        assert!(hw > 0.0 && hw < 5e-3);
        assert!(h < comp + 2f64.ln() + 3.0 * hw);
        assert!(h > comp + 2f64.ln() - 0.05);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let kind = DatasetKind::GaussianMixture {
            weights: vec![0.5, 0.6],
            means: vec![vec![0.0], vec![1.0]],
            vars: vec![vec![1.0], vec![1.0]],
        };
        assert!(Dataset::new(kind, Split::Train, 0).is_err());
    }

    #[test]
    fn discrete_images_in_range_and_logpdf_unsupported() {
        let ds = Dataset::new(DatasetKind::default_image(), Split::Train, 3).unwrap();
        let b = ds.draw(500).discrete().unwrap();
        assert!(b.iter().flatten().all(|v| *v < 8));
        assert_eq!(b[0].len(), 16);
        // the field spreads over the level range
        let mut counts = [0usize; 8];
        b.iter().flatten().for_each(|v| counts[*v as usize] += 1);
        assert!(counts.iter().filter(|c| **c > 0).count() >= 6, "{counts:?}");
        assert!(matches!(ds.true_logpdf(&[0.0; 16]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn splits_are_reproducible_and_distinct() {
        let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 11).unwrap();
        assert_eq!(ds.draw(50), ds.draw(50));
        assert_ne!(ds.draw(50), ds.with_split(Split::Test).draw(50));
        let other_seed = Dataset { seed: 12, ..ds.clone() };
        assert_ne!(ds.draw(50), other_seed.draw(50));
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset::new(DatasetKind::default_mixture(), Split::Train, 1).unwrap();
        let b = ds.draw(20);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        assert_eq!(Batch::read_csv(&buf[..]).unwrap(), b);
        let img = Dataset::new(DatasetKind::default_image(), Split::Test, 1).unwrap().draw(5);
        let mut buf = Vec::new();
        img.write_csv(&mut buf).unwrap();
        assert_eq!(Batch::read_csv(&buf[..]).unwrap(), img);
    }

    #[test]
    fn dataset_config_parses() {
        let ds: Dataset = toml::from_str("kind = \"gaussian_mixture\"\nweights = [1.0]\nmeans = [[0.0]]\nvars = [[2.0]]\nseed = 4")
            .unwrap();
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.seed, 4);
        assert!(toml::from_str::<Dataset>("kind = \"discrete_image\"\nside = 4\nbogus = 1").is_err());
        assert!(toml::from_str::<Dataset>("kind = \"gaussian\"\nside = 4").is_err());
        let img: Dataset = toml::from_str("kind = \"discrete_image\"").unwrap();
        assert_eq!(img.kind, DatasetKind::default_image());
        let back: Dataset = toml::from_str(&toml::to_string(&img).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn uniform_dequantization_cells() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let x = [0u32, 3, 7];
        for _ in 0..1000 {
            let y = uniform_dequantize(&x, 8, &mut r).unwrap();
            for (k, v) in x.iter().zip(&y) {
                assert!(*k as f64 / 8.0 <= *v && *v < (*k + 1) as f64 / 8.0);
            }
        }
        assert!(uniform_dequantize(&[8], 8, &mut r).is_err());
        assert_eq!(dequantize(&[5, 0], &[0.0, 0.0], 8).unwrap(), vec![0.625, 0.0]);
        let vals: Vec<f64> = (0..100_000).map(|_| uniform_dequantize(&[5], 8, &mut r).unwrap()[0]).collect();
        let d = oracles::ks_statistic(&vals, |v| ((v - 0.625) * 8.0).clamp(0.0, 1.0));
        assert!(oracles::ks_p_value(d, vals.len() as f64) > 1e-3);
    }
}
