#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const RISK_PRIOR1: &str = include_str!("../data/risk_prior1.tsv");
pub const RISK_PRIOR2: &str = include_str!("../data/risk_prior2.tsv");
pub const RISK_JS: &str = include_str!("../data/risk_js.tsv");
pub const PHI_PRIOR1: &str = include_str!("../data/phi_prior1.tsv");
pub const PHI_PRIOR2: &str = include_str!("../data/phi_prior2.tsv");
pub const LOG_PI_PRIOR1: &str = include_str!("../data/log_pi_prior1.tsv");
pub const LOG_PI_PRIOR2: &str = include_str!("../data/log_pi_prior2.tsv");

/// Two-column whitespace-separated table; `#` starts a comment line.
pub fn table(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

/// Standard deviation of the noise in a tabulated smooth curve, estimated
/// from second differences in a window of `half_window` rows around `idx`.
///
/// For independent noise of variance σ², `x_i − (x_{i−1} + x_{i+1})/2` has
/// variance 1.5σ²; any curvature of the underlying curve only inflates the
/// estimate.
pub fn local_noise_sd(rows: &[(f64, f64)], idx: usize, half_window: usize) -> f64 {
    let lo = idx.saturating_sub(half_window).max(1);
    let hi = (idx + half_window).min(rows.len() - 2);
    let resid: Vec<f64> = (lo..=hi)
        .map(|i| rows[i].1 - 0.5 * (rows[i - 1].1 + rows[i + 1].1))
        .collect();
    let ms = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    (ms / 1.5).sqrt()
}

/// `log ∫₀¹ κ^s e^{−wκ} (1−κ)^{b−1} dκ = log B(s+1, b) − w + log M(b; s+1+b; w)`,
/// the confluent hypergeometric series after Kummer's transformation (all
/// terms positive), summed in log space.
pub fn ln_constant_integral_oracle(s: f64, b: f64, w: f64) -> f64 {
    statrs::function::beta::ln_beta(s + 1.0, b) - w + ln_kummer_positive(b, s + 1.0 + b, w)
}

fn ln_kummer_positive(alpha: f64, gamma: f64, w: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let ln_w = w.ln();
    let mut term = 0.0_f64;
    let mut max = 0.0_f64;
    let mut terms = vec![0.0_f64];
    let mut n = 1.0_f64;
    loop {
        term += (alpha + n - 1.0).ln() - (gamma + n - 1.0).ln() + ln_w - n.ln();
        terms.push(term);
        max = max.max(term);
        if n > 2.0 * w && term < max - 40.0 {
            break;
        }
        n += 1.0;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Trapezoid rule with `n` intervals on `[lo, hi]`, in log space.
pub fn ln_trapezoid(lo: f64, hi: f64, n: usize, ln_f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let x = if i == n { hi } else { lo + i as f64 * h };
            let w: f64 = if i == 0 || i == n { 0.5 } else { 1.0 };
            ln_f(x) + w.ln()
        })
        .collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + h.ln()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A Haar-ish random orthogonal matrix (Gram–Schmidt on a Gaussian matrix),
/// rows stored contiguously.
pub fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    while q.len() < p {
        let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q
}

pub fn mat_vec(q: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    q.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Kolmogorov–Smirnov distance of a sample from a continuous CDF.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level `alpha` for `n` draws.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
