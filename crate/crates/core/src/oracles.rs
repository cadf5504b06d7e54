//! Reference implementations used to check the main code paths.
//!
//! Nothing in here calls into the estimators it is meant to verify: the SDE
//! coefficients needed by the rejection sampler are re-derived locally, and the
//! quadrature and Gaussian formulas are written from scratch.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::sde::{SdeKind, SdeSpec};

/// Node/weight table of a quadrature rule over `[a, b]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Composite Simpson rule with `n` (odd, >= 3) equally spaced nodes.
    pub fn simpson(a: f64, b: f64, n: usize) -> Self {
        assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd node count >= 3");
        let h = (b - a) / (n - 1) as f64;
        let nodes = (0..n).map(|i| a + i as f64 * h).collect();
        let weights = (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        QuadratureRule { nodes, weights }
    }

    /// Simpson in `u = ln t`, suited to integrands with `1/t` behaviour near `a > 0`.
    pub fn simpson_log(a: f64, b: f64, n: usize) -> Self {
        let base = Self::simpson(a.ln(), b.ln(), n);
        let nodes: Vec<f64> = base.nodes.iter().map(|u| u.exp()).collect();
        let weights = base.weights.iter().zip(&nodes).map(|(w, t)| w * t).collect();
        QuadratureRule { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Simpson integral of `f` over `[a, b]` with `n` odd nodes.
pub fn simpson(f: impl FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    QuadratureRule::simpson(a, b, n).integrate(f)
}

/// `KL(N(m1, diag v1) || N(m2, diag v2))`.
pub fn gaussian_kl(m1: &[f64], v1: &[f64], m2: &[f64], v2: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..m1.len() {
        let d = m1[i] - m2[i];
        kl += 0.5 * ((v2[i] / v1[i]).ln() + (v1[i] + d * d) / v2[i] - 1.0);
    }
    kl
}

/// Log-density of `N(m, diag v)`.
pub fn gaussian_logpdf(x: &[f64], m: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - m[i];
        acc += -0.5 * d * d / v[i] - 0.5 * (2.0 * std::f64::consts::PI * v[i]).ln();
    }
    acc
}

/// Differential entropy of `N(., diag v)`.
pub fn gaussian_entropy(v: &[f64]) -> f64 {
    v.iter()
        .map(|v| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * v).ln())
        .sum()
}

/// Central finite-difference gradient with step `h`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = y[i];
        y[i] = orig + h;
        let fp = f(&y);
        y[i] = orig - h;
        let fm = f(&y);
        y[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Unnormalized proposal density `g(t)^2 / lambda_orig(t)` from locally derived coefficients.
pub fn proposal_unnormalized(spec: &SdeSpec, t: f64) -> f64 {
    match spec.kind() {
        SdeKind::Ve => 1.0,
        SdeKind::Vp | SdeKind::SubVp => {
            let b0 = spec.beta_min();
            let b1 = spec.beta_max();
            let beta = b0 * (1.0 - t) + b1 * t;
            // trapezoid is exact for a linear integrand
            let big_b = 0.5 * t * (b0 + beta);
            let one_minus = 1.0 - (-big_b).exp();
            if spec.kind() == SdeKind::Vp {
                beta / one_minus
            } else {
                beta * (1.0 - (-2.0 * big_b).exp()) / (one_minus * one_minus)
            }
        }
    }
}

/// One draw of `t ~ p(t) ∝ g^2 / lambda_orig` on `[epsilon, T]` by rejection.
///
/// VE proposals are uniform. VP/subVP use a log-uniform envelope, since the
/// density behaves like `1/t` near zero; the envelope constant is 5% above the
/// maximum of `t p(t)` over a fine log grid.
pub fn rejection_sample_proposal<R: Rng + ?Sized>(spec: &SdeSpec, rng: &mut R) -> f64 {
    rejection_sample_proposal_counted(spec, rng).0
}

/// Like [`rejection_sample_proposal`] but also returns the number of candidates tried.
pub fn rejection_sample_proposal_counted<R: Rng + ?Sized>(spec: &SdeSpec, rng: &mut R) -> (f64, usize) {
    let (a, b) = (spec.epsilon(), spec.horizon());
    if spec.kind() == SdeKind::Ve {
        return (a + (b - a) * rng.random::<f64>(), 1);
    }
    let (la, lb) = (a.ln(), b.ln());
    let envelope = (0..=2000)
        .map(|i| {
            let t = (la + (lb - la) * i as f64 / 2000.0).exp();
            t * proposal_unnormalized(spec, t)
        })
        .fold(0.0, f64::max)
        * 1.05;
    let mut tries = 0;
    loop {
        tries += 1;
        let t = (la + (lb - la) * rng.random::<f64>()).exp();
        let ratio = t * proposal_unnormalized(spec, t) / envelope;
        if rng.random::<f64>() < ratio {
            return (t, tries);
        }
    }
}

/// Pearson chi-square statistic and its upper-tail p-value with `observed.len() - 1` degrees of freedom.
pub fn chi_square_test(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic p-value of the Kolmogorov distribution for statistic `d` and effective size `n`.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}
