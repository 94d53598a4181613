//! Monte Carlo quadratic risk over a grid of `‖β‖`, and the deterministic
//! shrinkage-factor and prior-density sweeps.
//!
//! Every estimator is orthogonally equivariant, so `β = r·e₁`. Replication
//! `rep` at grid index `g` draws its noise from its own stream (see
//! [`crate::rng`]), and all estimators see the same `y` (common random
//! numbers). Losses are collected in replication order and summed
//! sequentially, so the result does not depend on the number of threads.

use std::io::{self, Write};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::estimator::{bayes_estimate, james_stein, ShrinkCurve};
use crate::prior::PriorSpec;
use crate::quadrature::QuadConfig;
use crate::rng::{replication_stream, stream_rng};

/// Environment variable capping the worker count (`0` or unset = automatic).
pub const THREADS_ENV: &str = "SHRINKPRIOR_THREADS";

pub const DEFAULT_REPS: usize = 20_000;
pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Bayes { label: String, spec: PriorSpec<f64> },
    JamesStein,
    Identity,
}

impl Estimator {
    pub fn label(&self) -> &str {
        match self {
            Estimator::Bayes { label, .. } => label,
            Estimator::JamesStein => "js",
            Estimator::Identity => "identity",
        }
    }

    pub fn estimate(&self, y: &[f64], cfg: &QuadConfig<f64>) -> Result<Vec<f64>> {
        match self {
            Estimator::Bayes { spec, .. } => bayes_estimate(spec, y, cfg),
            Estimator::JamesStein => james_stein(y),
            Estimator::Identity => Ok(y.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskCurve {
    pub grid: Vec<f64>,
    pub estimators: Vec<Estimator>,
    /// `risks[g][e]`: estimated risk of estimator `e` at `grid[g]`.
    pub risks: Vec<Vec<f64>>,
    pub mc_se: Vec<Vec<f64>>,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
}

impl RiskCurve {
    /// CSV `beta_norm,<est1>,<est1>_se,<est2>,<est2>_se,...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "beta_norm")?;
        for e in &self.estimators {
            write!(out, ",{0},{0}_se", e.label())?;
        }
        writeln!(out)?;
        for (g, r) in self.grid.iter().enumerate() {
            write!(out, "{r:.16e}")?;
            for e in 0..self.estimators.len() {
                write!(out, ",{:.16e},{:.16e}", self.risks[g][e], self.mc_se[g][e])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Worker pool sized by [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn one_replication(estimators: &[Estimator], p: usize, r: f64, seed: u64, stream: u64, cfg: &QuadConfig<f64>) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, stream);
    let mut y: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    y[0] += r;
    estimators
        .iter()
        .map(|e| {
            let est = e.estimate(&y, cfg)?;
            let loss = est
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let beta = if i == 0 { r } else { 0.0 };
                    (v - beta) * (v - beta)
                })
                .sum::<f64>();
            Ok(loss)
        })
        .collect()
}

/// Estimated risk `E‖β̂ − β‖²` of each estimator at `β = r·e₁` for each
/// `r` in `grid`.
pub fn risk_sweep(estimators: &[Estimator], p: usize, grid: &[f64], reps: usize, seed: u64, cfg: &QuadConfig<f64>) -> Result<RiskCurve> {
    if reps < MIN_REPS {
        return Err(Error::Config(format!("reps must be at least {MIN_REPS}, got {reps}")));
    }
    if reps > u32::MAX as usize {
        return Err(Error::Config("reps must fit in 32 bits".into()));
    }
    if estimators.is_empty() {
        return Err(Error::Config("at least one estimator is required".into()));
    }
    for e in estimators {
        if let Estimator::Bayes { spec, .. } = e {
            if spec.p() != p {
                return Err(Error::Dimension { expected: p, found: spec.p() });
            }
        }
    }
    if p < 3 && estimators.contains(&Estimator::JamesStein) {
        return Err(domain("dimension p", p as f64, "p ≥ 3 for James–Stein"));
    }
    if let Some(bad) = grid.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(domain("grid value ‖β‖", *bad, "[0, ∞)"));
    }
    cfg.validate()?;

    let pool = thread_pool()?;
    let k = estimators.len();
    let mut risks = Vec::with_capacity(grid.len());
    let mut mc_se = Vec::with_capacity(grid.len());
    for (g, &r) in grid.iter().enumerate() {
        let losses: Vec<Vec<f64>> = pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|rep| one_replication(estimators, p, r, seed, replication_stream(g, rep), cfg))
                .collect::<Result<Vec<_>>>()
        })?;
        let n = reps as f64;
        let mut means = vec![0.0; k];
        for row in &losses {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut ses = vec![0.0; k];
        for row in &losses {
            for e in 0..k {
                let d = row[e] - means[e];
                ses[e] += d * d;
            }
        }
        ses.iter_mut().for_each(|s| *s = (*s / (n - 1.0) / n).sqrt());
        risks.push(means);
        mc_se.push(ses);
    }
    Ok(RiskCurve {
        grid: grid.to_vec(),
        estimators: estimators.to_vec(),
        risks,
        mc_se,
        p,
        reps,
        seed,
    })
}

/// `φ` over a grid of `‖y‖` by quadrature.
pub fn shrink_sweep(spec: &PriorSpec<f64>, y_norms: &[f64], cfg: &QuadConfig<f64>) -> Result<ShrinkCurve<f64>> {
    ShrinkCurve::evaluate(spec, y_norms, cfg)
}

/// `(κ, log π(κ))` over a grid interior to `(0, 1)`.
pub fn prior_density_sweep(spec: &PriorSpec<f64>, kappas: &[f64]) -> Result<Vec<(f64, f64)>> {
    kappas.iter().map(|&k| Ok((k, spec.log_prior_kappa(k)?))).collect()
}

/// CSV `y_norm,phi`.
pub fn write_shrink_csv<W: Write>(curve: &ShrinkCurve<f64>, mut out: W) -> io::Result<()> {
    writeln!(out, "y_norm,phi")?;
    for (r, phi) in &curve.points {
        writeln!(out, "{r:.16e},{phi:.16e}")?;
    }
    Ok(())
}

/// CSV `kappa,log_pi`.
pub fn write_prior_csv<W: Write>(rows: &[(f64, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "kappa,log_pi")?;
    for (k, v) in rows {
        writeln!(out, "{k:.16e},{v:.16e}")?;
    }
    Ok(())
}
