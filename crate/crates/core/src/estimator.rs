//! The generalized Bayes estimator through Tweedie's formula, its shrinkage
//! factor `φ(‖y‖²) = ‖y‖²·E[κ | y]`, and the James–Stein comparator.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::prior::PriorSpec;
use crate::quadrature::{posterior_kappa_mean, QuadConfig};
use crate::real::Real;

/// `φ` evaluated over a grid of `‖y‖`, with its large-`‖y‖` limit `p + 2a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkCurve<T: Real> {
    /// `(‖y‖, φ(‖y‖²))` pairs in grid order.
    pub points: Vec<(T, T)>,
    pub spec: PriorSpec<T>,
    pub limit: T,
}

impl<T: Real> ShrinkCurve<T> {
    pub fn evaluate(spec: &PriorSpec<T>, y_norms: &[T], cfg: &QuadConfig<T>) -> Result<Self> {
        let points = y_norms
            .iter()
            .map(|&r| {
                if !(r >= T::zero() && r.is_finite()) {
                    return Err(domain("norm of y", r.as_f64(), "[0, ∞)"));
                }
                Ok((r, shrinkage_factor(spec, r * r, cfg)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            spec: *spec,
            limit: phi_limit(spec),
        })
    }
}

fn squared_norm<T: Real>(y: &[T]) -> T {
    y.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

fn check_dimension<T: Real>(spec: &PriorSpec<T>, y: &[T]) -> Result<()> {
    if y.len() != spec.p() {
        return Err(Error::Dimension {
            expected: spec.p(),
            found: y.len(),
        });
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(domain("coordinate of y", bad.as_f64(), "finite reals"));
    }
    Ok(())
}

/// `φ(‖y‖²) = ‖y‖² · I_{p/2+a}(w) / I_{p/2+a−1}(w)` with `w = ‖y‖²/2`;
/// `φ(0) = 0`.
pub fn shrinkage_factor<T: Real>(spec: &PriorSpec<T>, y_norm_sq: T, cfg: &QuadConfig<T>) -> Result<T> {
    let mean = posterior_kappa_mean(spec, y_norm_sq, cfg)?;
    if y_norm_sq == T::zero() {
        return Ok(T::zero());
    }
    Ok(y_norm_sq * mean)
}

/// `β̂(y) = y + ∇log m(y) = (1 − E[κ | y]) y`.
pub fn bayes_estimate<T: Real>(spec: &PriorSpec<T>, y: &[T], cfg: &QuadConfig<T>) -> Result<Vec<T>> {
    check_dimension(spec, y)?;
    let r2 = squared_norm(y);
    let mean = posterior_kappa_mean(spec, r2, cfg)?;
    let keep = T::one() - mean;
    Ok(y.iter().map(|&v| keep * v).collect())
}

/// Plain (not positive-part) James–Stein: `(1 − (p−2)/‖y‖²) y`.
pub fn james_stein<T: Real>(y: &[T]) -> Result<Vec<T>> {
    let p = y.len();
    if p < 3 {
        return Err(domain("dimension p", p as f64, "p ≥ 3"));
    }
    let r2 = squared_norm(y);
    if !(r2 > T::zero()) || !r2.is_finite() {
        return Err(domain("squared norm of y", r2.as_f64(), "(0, ∞)"));
    }
    let keep = T::one() - T::from_usize_lossy(p - 2) / r2;
    Ok(y.iter().map(|&v| keep * v).collect())
}

/// `lim φ = p + 2a` as `‖y‖ → ∞`.
pub fn phi_limit<T: Real>(spec: &PriorSpec<T>) -> T {
    spec.p_real() + spec.a() + spec.a()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::HFamily;

    fn prior1() -> PriorSpec<f64> {
        crate::minimax::named_prior(crate::minimax::NamedPrior::Prior1, 10).unwrap()
    }

    #[test]
    fn phi_vanishes_at_origin() {
        let cfg = QuadConfig::default();
        assert_eq!(shrinkage_factor(&prior1(), 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(bayes_estimate(&prior1(), &[0.0; 10], &cfg).unwrap(), vec![0.0; 10]);
    }

    #[test]
    fn james_stein_arithmetic() {
        let mut y = vec![0.0_f64; 10];
        y[0] = 4.0;
        y[1] = 3.0;
        let js = james_stein(&y).unwrap();
        assert!((js[0] - 0.68 * 4.0).abs() < 1e-15 && (js[1] - 0.68 * 3.0).abs() < 1e-15);
        let on_shell = vec![8.0_f64.sqrt() / 10.0_f64.sqrt(); 10];
        assert!(james_stein(&on_shell).unwrap().iter().all(|v| v.abs() < 1e-15));
        assert!(james_stein(&[0.0; 10]).is_err());
        assert!(james_stein(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn bayes_estimate_shape_checks() {
        let cfg = QuadConfig::default();
        assert!(matches!(bayes_estimate(&prior1(), &[1.0; 3], &cfg), Err(Error::Dimension { .. })));
        let mut y = vec![0.0; 10];
        y[0] = 5.0;
        let est = bayes_estimate(&prior1(), &y, &cfg).unwrap();
        let phi = shrinkage_factor(&prior1(), 25.0, &cfg).unwrap();
        assert!((est[0] - (1.0 - phi / 25.0) * 5.0).abs() < 1e-13);
        assert!(est[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn limits() {
        assert!((phi_limit(&prior1()) - 11.730_919_862_656).abs() < 1e-11);
        let boundary = PriorSpec::relaxed(3, -1.5, 0.5, HFamily::Constant).unwrap();
        assert_eq!(phi_limit(&boundary), 0.0);
    }

    #[test]
    fn shrink_curve_in_f32() {
        let spec = crate::minimax::named_prior::<f32>(crate::minimax::NamedPrior::Prior1, 10).unwrap();
        let curve = ShrinkCurve::evaluate(&spec, &[0.0, 5.0], &QuadConfig::default()).unwrap();
        assert_eq!(curve.points[0].1, 0.0);
        assert!((curve.points[1].1 - 11.807).abs() < 0.01);
    }
}
