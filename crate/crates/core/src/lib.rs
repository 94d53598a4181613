//! Shrinkage estimation of a multivariate normal mean under scale-mixture
//! priors of half-Cauchy type.
//!
//! With `y ~ N_p(β, I)` and `β | κ ~ N_p(0, (1/κ − 1) I)`, the prior on the
//! shrinkage coefficient is `π(κ) = κ^(a−1) (1−κ)^(b−1) h(κ)`. The crate
//! provides
//!
//! * the prior family and its derived functions ([`prior`]);
//! * log-space quadrature for the integrals behind the marginal density and
//!   the posterior mean of `κ` ([`quadrature`]);
//! * the generalized Bayes estimator, its shrinkage factor and the
//!   James–Stein comparator ([`estimator`]);
//! * exact minimaxity certificates and the two named minimax priors
//!   ([`minimax`]);
//! * a Metropolis-within-Gibbs sampler ([`sampler`]) and Monte Carlo risk
//!   sweeps ([`risk`]);
//! * the `shrinkprior` command line ([`cli`]).
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar type. Simulation code works in `f64`.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with
// out-of-range values; fixed-width array kernels index several arrays in step.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod minimax;
pub mod prior;
pub mod quadrature;
pub mod real;
pub mod risk;
pub mod rng;
pub mod sampler;
mod special;

pub use error::{Error, Result};
pub use minimax::{NamedPrior, Rule, Verdict};
pub use prior::{Monotonicity, Propriety, ProprietyReport};
pub use quadrature::Scheme;
pub use real::Real;
pub use risk::{Estimator, RiskCurve};
pub use sampler::{ChainTrace, SamplerConfig};

pub type PriorSpec = prior::PriorSpec<f64>;
pub type PriorSpec32 = prior::PriorSpec<f32>;
pub type HFamily = prior::HFamily<f64>;
pub type HFamily32 = prior::HFamily<f32>;
pub type QuadConfig = quadrature::QuadConfig<f64>;
pub type QuadConfig32 = quadrature::QuadConfig<f32>;
pub type IntegralResult = quadrature::IntegralResult<f64>;
pub type IntegralResult32 = quadrature::IntegralResult<f32>;
pub type MinimaxReport = minimax::MinimaxReport<f64>;
pub type MinimaxReport32 = minimax::MinimaxReport<f32>;
pub type ShrinkCurve = estimator::ShrinkCurve<f64>;
pub type ShrinkCurve32 = estimator::ShrinkCurve<f32>;
pub type PriorBetaDensity = prior::PriorBetaDensity<f64>;
