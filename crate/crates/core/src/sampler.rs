//! Metropolis-within-Gibbs for the posterior of `(β, κ)`.
//!
//! Starting from `κ₀ = 0.5`, each iteration
//!
//! 1. records `β_t ~ N_p((1−κ_{t−1})y, (1−κ_{t−1})I_p)`, or in
//!    Rao–Blackwell mode its conditional mean `(1−κ_{t−1})y`;
//! 2. proposes `κ̃ ~ Beta(ã, b̃)` independently of the current state and
//!    accepts it with probability
//!    `min{1, (κ̃/κ)^(a−ã+p/2) ((1−κ̃)/(1−κ))^(b−b̃) e^(−‖y‖²(κ̃−κ)/2) h(κ̃)/h(κ)}`.
//!
//! The Beta proposal is drawn as `X/(X+Y)` from two Gamma variates. A
//! uniform variate is consumed on every iteration, including those whose
//! proposal rounds to 0 or 1 and is rejected outright.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prior::{check_open_unit, h_logratio, PriorSpec};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total number of iterations, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Stream selector; independent chains use distinct ids.
    pub chain_id: u64,
    /// `ã`; [`SamplerConfig::for_spec`] sets it to `max(a, 0.5)`.
    pub proposal_a: f64,
    /// `b̃`.
    pub proposal_b: f64,
    pub rao_blackwell: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            burn_in: 1_000,
            seed: 0,
            chain_id: 0,
            proposal_a: 0.5,
            proposal_b: 0.5,
            rao_blackwell: true,
        }
    }
}

impl SamplerConfig {
    /// Defaults with the proposal `Beta(max(a, 0.5), 0.5)`.
    pub fn for_spec(spec: &PriorSpec<f64>) -> Self {
        Self {
            proposal_a: spec.a().max(0.5),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        for (name, v) in [("proposal_a", self.proposal_a), ("proposal_b", self.proposal_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// The recorded chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    /// `κ_t` for `t = 1..=iterations`.
    pub kappa_draws: Vec<f64>,
    /// Whether the proposal at iteration `t` was accepted.
    pub accepted: Vec<bool>,
    /// `β_t` (or `(1−κ_{t−1})y`), flattened with stride `p`.
    pub beta_records: Vec<f64>,
    pub accept_count: usize,
    pub y: Vec<f64>,
    pub burn_in: usize,
    pub rao_blackwell: bool,
}

impl ChainTrace {
    pub fn iterations(&self) -> usize {
        self.kappa_draws.len()
    }

    pub fn p(&self) -> usize {
        self.y.len()
    }

    pub fn accept_rate(&self) -> f64 {
        self.accept_count as f64 / self.iterations() as f64
    }

    pub fn beta(&self, t: usize) -> &[f64] {
        let p = self.p();
        &self.beta_records[t * p..(t + 1) * p]
    }

    /// Post-burn-in `κ` draws.
    pub fn kept_kappa(&self) -> &[f64] {
        &self.kappa_draws[self.burn_in.min(self.iterations())..]
    }

    /// Posterior mean of `κ` with its batch-means standard error.
    pub fn kappa_mean(&self) -> Result<(f64, f64)> {
        let kept = self.kept_kappa();
        if kept.is_empty() {
            return Err(Error::Config("no draws after burn-in".into()));
        }
        Ok((mean(kept), batch_means_se(kept)))
    }

    /// CSV `iter,kappa,accept` with optional `beta_1..beta_p` columns.
    pub fn write_csv<W: Write>(&self, mut out: W, with_beta: bool) -> io::Result<()> {
        write!(out, "iter,kappa,accept")?;
        if with_beta {
            for i in 1..=self.p() {
                write!(out, ",beta_{i}")?;
            }
        }
        writeln!(out)?;
        for t in 0..self.iterations() {
            write!(out, "{},{:.16e},{}", t + 1, self.kappa_draws[t], u8::from(self.accepted[t]))?;
            if with_beta {
                for v in self.beta(t) {
                    write!(out, ",{v:.16e}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Batch-means Monte Carlo standard error with `⌊√n⌋`-long batches.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    let size = ((n as f64).sqrt() as usize).max(1);
    let batches = n / size;
    if batches < 2 {
        return f64::INFINITY;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// `min(0, log q)` for a move `κ_old → κ_new`.
pub fn mh_log_accept(spec: &PriorSpec<f64>, cfg: &SamplerConfig, y_norm_sq: f64, kappa_new: f64, kappa_old: f64) -> Result<f64> {
    check_open_unit("kappa_new", kappa_new)?;
    check_open_unit("kappa_old", kappa_old)?;
    if !(y_norm_sq >= 0.0 && y_norm_sq.is_finite()) {
        return Err(domain("squared norm of y", y_norm_sq, "[0, ∞)"));
    }
    Ok(log_accept_unchecked(spec, cfg, y_norm_sq, kappa_new, kappa_old)?.min(0.0))
}

fn log_accept_unchecked(spec: &PriorSpec<f64>, cfg: &SamplerConfig, y_norm_sq: f64, kappa_new: f64, kappa_old: f64) -> Result<f64> {
    if kappa_new == kappa_old {
        return Ok(0.0);
    }
    let power_kappa = spec.a() - cfg.proposal_a + spec.p_real() / 2.0;
    let power_one_minus = spec.b() - cfg.proposal_b;
    let log_q = power_kappa * (kappa_new.ln() - kappa_old.ln())
        + power_one_minus * ((-kappa_new).ln_1p() - (-kappa_old).ln_1p())
        - 0.5 * y_norm_sq * (kappa_new - kappa_old)
        + h_logratio(spec.h(), kappa_new, kappa_old)?;
    Ok(log_q)
}

/// Runs one chain; deterministic given `cfg.seed` and `cfg.chain_id`.
pub fn run_chain(spec: &PriorSpec<f64>, y: &[f64], cfg: &SamplerConfig) -> Result<ChainTrace> {
    cfg.validate()?;
    let p = spec.p();
    if y.len() != p {
        return Err(Error::Dimension { expected: p, found: y.len() });
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(domain("coordinate of y", *bad, "finite reals"));
    }
    let y_norm_sq: f64 = y.iter().map(|v| v * v).sum();
    let gamma_a = Gamma::new(cfg.proposal_a, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let gamma_b = Gamma::new(cfg.proposal_b, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = stream_rng(cfg.seed, cfg.chain_id);

    let n = cfg.iterations;
    let mut kappa_draws = Vec::with_capacity(n);
    let mut accepted = Vec::with_capacity(n);
    let mut beta_records = Vec::with_capacity(n * p);
    let mut accept_count = 0;
    let mut kappa = 0.5_f64;

    for _ in 0..n {
        let keep = 1.0 - kappa;
        if cfg.rao_blackwell {
            beta_records.extend(y.iter().map(|&v| keep * v));
        } else {
            let sd = keep.sqrt();
            for &v in y {
                let z: f64 = StandardNormal.sample(&mut rng);
                beta_records.push(keep * v + sd * z);
            }
        }

        let x = gamma_a.sample(&mut rng);
        let w = gamma_b.sample(&mut rng);
        let proposal = x / (x + w);
        let u: f64 = rng.random();
        let accept = if proposal > 0.0 && proposal < 1.0 {
            let log_q = log_accept_unchecked(spec, cfg, y_norm_sq, proposal, kappa)?;
            u.ln() < log_q
        } else {
            false
        };
        if accept {
            kappa = proposal;
            accept_count += 1;
        }
        kappa_draws.push(kappa);
        accepted.push(accept);
    }

    Ok(ChainTrace {
        kappa_draws,
        accepted,
        beta_records,
        accept_count,
        y: y.to_vec(),
        burn_in: cfg.burn_in,
        rao_blackwell: cfg.rao_blackwell,
    })
}

/// Average of the post-burn-in `β` records.
pub fn posterior_mean(trace: &ChainTrace) -> Result<Vec<f64>> {
    let p = trace.p();
    let kept = trace.iterations().saturating_sub(trace.burn_in);
    if kept == 0 {
        return Err(Error::Config("no draws after burn-in".into()));
    }
    let mut acc = vec![0.0; p];
    for t in trace.burn_in..trace.iterations() {
        for (a, v) in acc.iter_mut().zip(trace.beta(t)) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|v| v / kept as f64).collect())
}

/// Per-coordinate batch-means standard errors of [`posterior_mean`].
pub fn posterior_mean_se(trace: &ChainTrace) -> Vec<f64> {
    let p = trace.p();
    (0..p)
        .map(|i| {
            let column: Vec<f64> = (trace.burn_in..trace.iterations()).map(|t| trace.beta(t)[i]).collect();
            batch_means_se(&column)
        })
        .collect()
}
