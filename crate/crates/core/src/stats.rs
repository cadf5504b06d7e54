//! Small summary-statistics helpers.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two observations).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<Welford>().variance()
}

/// Half-width of the two-sided Student-t confidence interval for the mean.
pub fn student_t_half_width(xs: &[f64], level: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let w: Welford = xs.iter().copied().collect();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    dist.inverse_cdf(0.5 + level / 2.0) * w.std_error()
}

/// Percentile bootstrap interval for `var(a) / var(b)` with independent resampling of both samples.
pub fn bootstrap_variance_ratio<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    n_boot: usize,
    level: f64,
    rng: &mut R,
) -> (f64, f64, f64) {
    let point = variance(a) / variance(b);
    let resample_var = |xs: &[f64], rng: &mut R| {
        let mut w = Welford::new();
        for _ in 0..xs.len() {
            w.push(xs[rng.random_range(0..xs.len())]);
        }
        w.variance()
    };
    let mut ratios: Vec<f64> = (0..n_boot)
        .map(|_| resample_var(a, rng) / resample_var(b, rng))
        .collect();
    ratios.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let lo_idx = (((1.0 - level) / 2.0) * n_boot as f64).floor() as usize;
    let hi_idx = ((((1.0 + level) / 2.0) * n_boot as f64).ceil() as usize).min(n_boot - 1);
    (point, ratios[lo_idx], ratios[hi_idx])
}
