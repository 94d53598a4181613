//! The prior family on the shrinkage coefficient
//! `π(κ) = κ^(a−1) (1−κ)^(b−1) h(κ)` and the functions derived from `h`.
//!
//! `h` is one of three slowly varying factors ([`HFamily`]). The certificate
//! engine needs `H(κ) = κ h'(κ)/h(κ)`, its running infimum `H₁` and the
//! excess `H₂ = H − H₁`; those live here as well.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, IntegralResult, Piece, QuadConfig};
use crate::real::Real;

/// Number of subintervals of the uniform `[0, 1]` grid used when `H` is not
/// known to be monotone.
pub const H_GRID_INTERVALS: usize = 10_000;

/// Iterations of golden-section refinement around a grid extremum.
pub const GOLDEN_ITERATIONS: usize = 50;

/// The slowly varying factor `h(κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HFamily<T: Real> {
    /// `h ≡ 1`.
    Constant,
    /// `h(κ) = {1 + c1·log(1/κ)}^c2`, `c1 > 0`.
    LogAdjusted { c1: T, c2: T },
    /// `h(κ) = (1 + c3·κ)^c4 · exp(d·κ)`, `c3 > 0`.
    HyperIb { c3: T, c4: T, d: T },
}

/// Shape of `H` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    /// `H ≡ 0`.
    Flat,
    NonIncreasing,
    NonDecreasing,
    NonMonotone,
}

impl<T: Real> HFamily<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HFamily::Constant => Ok(()),
            HFamily::LogAdjusted { c1, c2 } => {
                if !(c1 > T::zero() && c1.is_finite()) {
                    return Err(Error::InvalidSpec(format!("log_adjusted needs c1 > 0, got {c1}")));
                }
                if !c2.is_finite() {
                    return Err(Error::InvalidSpec(format!("log_adjusted needs finite c2, got {c2}")));
                }
                Ok(())
            }
            HFamily::HyperIb { c3, c4, d } => {
                if !(c3 > T::zero() && c3.is_finite()) {
                    return Err(Error::InvalidSpec(format!("hyper_ib needs c3 > 0, got {c3}")));
                }
                if !(c4.is_finite() && d.is_finite()) {
                    return Err(Error::InvalidSpec("hyper_ib needs finite c4 and d".into()));
                }
                Ok(())
            }
        }
    }

    /// `log h(κ)` given both `κ` and `log κ`; `κ` may have underflowed to 0
    /// while `log κ` is still exact.
    #[inline]
    pub(crate) fn ln_h_at(&self, kappa: T, ln_kappa: T) -> T {
        match *self {
            HFamily::Constant => T::zero(),
            HFamily::LogAdjusted { c1, c2 } => c2 * (T::one() - c1 * ln_kappa).ln(),
            HFamily::HyperIb { c3, c4, d } => c4 * (c3 * kappa).ln_1p() + d * kappa,
        }
    }

    /// `log h(κ)` for `κ` in `(0, 1]`.
    pub fn ln_h(&self, kappa: T) -> T {
        self.ln_h_at(kappa, kappa.ln())
    }

    /// `H(κ) = κ h'(κ) / h(κ)` on `[0, 1]`, with `H(0) = 0`.
    pub fn big_h(&self, kappa: T) -> Result<T> {
        check_closed_unit(kappa)?;
        Ok(self.big_h_unchecked(kappa))
    }

    #[inline]
    pub(crate) fn big_h_unchecked(&self, kappa: T) -> T {
        match *self {
            HFamily::Constant => T::zero(),
            HFamily::LogAdjusted { c1, c2 } => {
                if kappa == T::zero() {
                    T::zero()
                } else {
                    -c2 * c1 / (T::one() - c1 * kappa.ln())
                }
            }
            HFamily::HyperIb { c3, c4, d } => d * kappa + c4 * c3 * kappa / (T::one() + c3 * kappa),
        }
    }

    /// Monotonicity of `H` on `[0, 1]`, decided analytically.
    ///
    /// For the hypergeometric inverted-beta factor `H'` is monotone in `κ`,
    /// so `H` is monotone exactly when `H'(0)` and `H'(1)` do not have
    /// opposite signs; the regimes below are that condition written in
    /// terms of `(c3, c4, d)`.
    pub fn monotonicity(&self) -> Monotonicity {
        match *self {
            HFamily::Constant => Monotonicity::Flat,
            HFamily::LogAdjusted { c2, .. } => {
                if c2 > T::zero() {
                    Monotonicity::NonIncreasing
                } else if c2 < T::zero() {
                    Monotonicity::NonDecreasing
                } else {
                    Monotonicity::Flat
                }
            }
            HFamily::HyperIb { c3, c4, d } => {
                let zero = T::zero();
                let sq = (c3 + T::one()) * (c3 + T::one());
                let non_increasing =
                    (d >= zero && c4 <= -sq * d / c3) || (d < zero && c4 <= -d / c3);
                let non_decreasing =
                    (d >= zero && c4 >= -d / c3) || (d < zero && c4 > -sq * d / c3);
                match (non_increasing, non_decreasing) {
                    (true, true) => Monotonicity::Flat,
                    (true, false) => Monotonicity::NonIncreasing,
                    (false, true) => Monotonicity::NonDecreasing,
                    (false, false) => Monotonicity::NonMonotone,
                }
            }
        }
    }

    /// Whether `∫₀¹ κ⁻¹ h(κ) dκ` is finite.
    pub fn boundary_integral_finite(&self) -> bool {
        match *self {
            HFamily::Constant | HFamily::HyperIb { .. } => false,
            HFamily::LogAdjusted { c2, .. } => c2 < -T::one(),
        }
    }

    /// `(H₁(κ), H₂(κ))` where `H₁` is the running infimum of `H` over
    /// `[0, κ]` and `H₂ = H − H₁`.
    pub fn h1_h2(&self, kappa: T) -> Result<(T, T)> {
        check_closed_unit(kappa)?;
        let h = self.big_h_unchecked(kappa);
        let h1 = match self.monotonicity() {
            Monotonicity::Flat => return Ok((T::zero(), T::zero())),
            Monotonicity::NonIncreasing => h.min(T::zero()),
            Monotonicity::NonDecreasing => T::zero(),
            Monotonicity::NonMonotone => HGrid::new(self).running_min_at(kappa).min(h),
        };
        Ok((h1, h - h1))
    }
}

/// `H` tabulated on the uniform grid with `H_GRID_INTERVALS` subintervals,
/// plus its running minimum (starting from `H(0) = 0`).
#[derive(Debug, Clone)]
pub struct HGrid<T: Real> {
    family: HFamily<T>,
    values: Vec<T>,
    running_min: Vec<T>,
}

impl<T: Real> HGrid<T> {
    pub fn new(family: &HFamily<T>) -> Self {
        let n = H_GRID_INTERVALS;
        let mut values = Vec::with_capacity(n + 1);
        let mut running_min = Vec::with_capacity(n + 1);
        let mut current = T::zero();
        for i in 0..=n {
            let kappa = grid_point::<T>(i, n);
            let v = family.big_h_unchecked(kappa);
            current = current.min(v);
            values.push(v);
            running_min.push(current);
        }
        Self {
            family: *family,
            values,
            running_min,
        }
    }

    fn running_min_at(&self, kappa: T) -> T {
        let n = H_GRID_INTERVALS;
        let idx = (kappa * T::from_usize_lossy(n)).floor().to_usize().unwrap_or(0).min(n);
        self.running_min[idx]
    }

    /// `max_{[0,1]} H₂`, refined by golden-section search around the grid
    /// argmax.
    pub fn max_h2(&self) -> T {
        let n = H_GRID_INTERVALS;
        let (arg, best) = (0..=n)
            .map(|i| (i, self.values[i] - self.running_min[i]))
            .fold((0, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
        // Near an interior maximum of H₂ the running minimum is flat, so the
        // value just before the bracket is the floor throughout it.
        let floor = self.running_min[arg.saturating_sub(1)];
        let (lo, hi) = (grid_point::<T>(arg.saturating_sub(1), n), grid_point::<T>((arg + 1).min(n), n));
        let refined = golden_max(|k| self.family.big_h_unchecked(k), lo, hi) - floor;
        best.max(refined).max(T::zero())
    }

    /// `H₁(1) = min(0, min_{[0,1]} H)`, refined around the grid argmin.
    pub fn h1_at_one(&self) -> T {
        let n = H_GRID_INTERVALS;
        let (arg, best) = (0..=n)
            .map(|i| (i, self.values[i]))
            .fold((0, T::infinity()), |acc, x| if x.1 < acc.1 { x } else { acc });
        let (lo, hi) = (grid_point::<T>(arg.saturating_sub(1), n), grid_point::<T>((arg + 1).min(n), n));
        let refined = -golden_max(|k| -self.family.big_h_unchecked(k), lo, hi);
        best.min(refined).min(T::zero())
    }
}

#[inline]
fn grid_point<T: Real>(i: usize, n: usize) -> T {
    T::from_usize_lossy(i) / T::from_usize_lossy(n)
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
fn golden_max<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    f1.max(f2).max(f(lo)).max(f(hi))
}

/// A member of the prior family together with the ambient dimension `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPriorSpec<T>", into = "RawPriorSpec<T>")]
pub struct PriorSpec<T: Real> {
    p: usize,
    a: T,
    b: T,
    h: HFamily<T>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPriorSpec<T: Real> {
    p: usize,
    a: T,
    b: T,
    h: HFamily<T>,
}

impl<T: Real> TryFrom<RawPriorSpec<T>> for PriorSpec<T> {
    type Error = Error;

    fn try_from(raw: RawPriorSpec<T>) -> Result<Self> {
        PriorSpec::relaxed(raw.p, raw.a, raw.b, raw.h)
    }
}

impl<T: Real> From<PriorSpec<T>> for RawPriorSpec<T> {
    fn from(spec: PriorSpec<T>) -> Self {
        RawPriorSpec {
            p: spec.p,
            a: spec.a,
            b: spec.b,
            h: spec.h,
        }
    }
}

impl<T: Real> PriorSpec<T> {
    /// A prior with `a < 1` and `0 < b < 1`.
    pub fn new(p: usize, a: T, b: T, h: HFamily<T>) -> Result<Self> {
        let spec = Self::relaxed(p, a, b, h)?;
        if !spec.is_compliant() {
            return Err(Error::RelaxedSpec {
                a: a.as_f64(),
                b: b.as_f64(),
            });
        }
        Ok(spec)
    }

    /// Any finite `(a, b)`; used to express baselines such as `b ≥ 1`.
    /// Minimaxity checks refuse these unless they happen to satisfy
    /// `a < 1` and `0 < b < 1`.
    pub fn relaxed(p: usize, a: T, b: T, h: HFamily<T>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidSpec("dimension p must be positive".into()));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidSpec(format!("a and b must be finite, got a = {a}, b = {b}")));
        }
        h.validate()?;
        Ok(Self { p, a, b, h })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn h(&self) -> &HFamily<T> {
        &self.h
    }

    pub fn p_real(&self) -> T {
        T::from_usize_lossy(self.p)
    }

    pub fn with_p(mut self, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidSpec("dimension p must be positive".into()));
        }
        self.p = p;
        Ok(self)
    }

    /// `a < 1` and `0 < b < 1`.
    pub fn is_compliant(&self) -> bool {
        self.a < T::one() && self.b > T::zero() && self.b < T::one()
    }

    /// Unnormalized `log π(κ)` for `κ` in `(0, 1)`.
    pub fn log_prior_kappa(&self, kappa: T) -> Result<T> {
        check_open_unit("kappa", kappa)?;
        let ln_k = kappa.ln();
        let ln_1mk = (-kappa).ln_1p();
        Ok((self.a - T::one()) * ln_k + (self.b - T::one()) * ln_1mk + self.h.ln_h_at(kappa, ln_k))
    }

    /// Which integrability clause applies to `π(κ)` and to the marginal of `y`.
    pub fn classify_propriety(&self) -> ProprietyReport {
        if self.b <= T::zero() {
            let reason = format!("b = {} ≤ 0: not integrable at κ = 1", self.b);
            return ProprietyReport {
                prior: Propriety::Improper,
                marginal: Propriety::Improper,
                reason,
            };
        }
        let boundary_ok = self.h.boundary_integral_finite();
        let half_p = self.p_real() / T::lit(2.0);
        let (prior, prior_reason) = if self.a > T::zero() {
            (Propriety::Proper, format!("a = {} > 0", self.a))
        } else if self.a == T::zero() && boundary_ok {
            (Propriety::ProperBoundary, "a = 0 and ∫κ⁻¹h(κ)dκ < ∞".to_string())
        } else if self.a == T::zero() {
            (Propriety::Improper, "a = 0 but ∫κ⁻¹h(κ)dκ = ∞".to_string())
        } else {
            (Propriety::Improper, format!("a = {} < 0", self.a))
        };
        let (marginal, marginal_reason) = if self.a > -half_p {
            (Propriety::Proper, format!("a > −p/2 = {}", -half_p))
        } else if self.a == -half_p && boundary_ok {
            (Propriety::ProperBoundary, "a = −p/2 and ∫κ⁻¹h(κ)dκ < ∞".to_string())
        } else if self.a == -half_p {
            (Propriety::Improper, "a = −p/2 but ∫κ⁻¹h(κ)dκ = ∞".to_string())
        } else {
            (Propriety::Improper, format!("a < −p/2 = {}", -half_p))
        };
        ProprietyReport {
            prior,
            marginal,
            reason: format!("prior: {prior_reason}; marginal: {marginal_reason}"),
        }
    }

    /// `log π(β)`, the κ-mixture of centered normals, by quadrature.
    ///
    /// Depends on `β` only through `‖β‖²`.
    pub fn log_prior_beta(&self, beta: &[T], cfg: &QuadConfig<T>) -> Result<PriorBetaDensity<T>> {
        if beta.len() != self.p {
            return Err(Error::Dimension {
                expected: self.p,
                found: beta.len(),
            });
        }
        let r2 = beta.iter().fold(T::zero(), |acc, &x| acc + x * x);
        self.log_prior_beta_norm_sq(r2, cfg)
    }

    pub fn log_prior_beta_norm_sq(&self, r2: T, cfg: &QuadConfig<T>) -> Result<PriorBetaDensity<T>> {
        cfg.validate()?;
        if !(r2 >= T::zero() && r2.is_finite()) {
            return Err(domain("squared norm of beta", r2.as_f64(), "[0, ∞)"));
        }
        let half_p = self.p_real() / T::lit(2.0);
        let zero_exponent = self.a + half_p;
        if self.b <= T::zero() {
            return Ok(PriorBetaDensity::Divergent {
                reason: "b ≤ 0: integrand not integrable at κ = 1".into(),
            });
        }
        if zero_exponent < T::zero()
            || (zero_exponent == T::zero() && !self.h.boundary_integral_finite())
        {
            return Ok(PriorBetaDensity::Divergent {
                reason: format!("κ^(a+p/2−1) with a + p/2 = {zero_exponent} is not integrable at 0"),
            });
        }
        if r2 == T::zero() && self.b <= half_p {
            return Ok(PriorBetaDensity::Divergent {
                reason: format!("at β = 0 the integrand behaves like (1−κ)^(b−1−p/2) with b = {} ≤ p/2", self.b),
            });
        }
        if zero_exponent == T::zero() {
            return Err(Error::Integrability(
                "log_prior_beta at a = −p/2 is not supported by the quadrature".into(),
            ));
        }
        let two_pi = T::lit(2.0) * T::PI();
        let norm = -half_p * two_pi.ln();
        let half_r2 = r2 / T::lit(2.0);
        let a = self.a;
        let b = self.b;
        let h = self.h;
        // Mass sits near κ ≈ (a + p/2)/(‖β‖²/2) for large ‖β‖ and near κ = 1
        // for small ‖β‖.
        let near_zero = (zero_exponent + T::one()) / (half_r2 + zero_exponent + T::one());
        let near_one = half_r2 / (half_p + T::one() - b + half_r2);
        let pieces = quadrature::geometric_pieces(Some(near_zero), Some(near_one));
        let [res] = quadrature::tanh_sinh(&pieces, cfg, |piece: &Piece<T>, node| {
            let pt = piece.point(node);
            let odds = pt.kappa / pt.one_minus;
            [norm + half_p * (pt.ln_kappa - pt.ln_one_minus) - odds * half_r2
                + (a - T::one()) * pt.ln_kappa
                + (b - T::one()) * pt.ln_one_minus
                + h.ln_h_at(pt.kappa, pt.ln_kappa)]
        });
        Ok(PriorBetaDensity::Finite(res))
    }
}

/// `log π(β)` or the reason the defining integral diverges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PriorBetaDensity<T: Real> {
    Finite(IntegralResult<T>),
    Divergent { reason: String },
}

impl<T: Real> PriorBetaDensity<T> {
    pub fn log_value(&self) -> Option<T> {
        match self {
            PriorBetaDensity::Finite(r) => Some(r.log_value),
            PriorBetaDensity::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, PriorBetaDensity::Divergent { .. })
    }
}

/// Integrability verdict; for the marginal, `Proper` reads as "finite for
/// every y".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Propriety {
    Proper,
    ProperBoundary,
    Improper,
}

impl Propriety {
    pub fn is_finite(self) -> bool {
        !matches!(self, Propriety::Improper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProprietyReport {
    pub prior: Propriety,
    pub marginal: Propriety,
    pub reason: String,
}

pub(crate) fn check_open_unit<T: Real>(what: &'static str, kappa: T) -> Result<()> {
    if kappa > T::zero() && kappa < T::one() {
        Ok(())
    } else {
        Err(domain(what, kappa.as_f64(), "(0, 1)"))
    }
}

fn check_closed_unit<T: Real>(kappa: T) -> Result<()> {
    if kappa >= T::zero() && kappa <= T::one() {
        Ok(())
    } else {
        Err(domain("kappa", kappa.as_f64(), "[0, 1]"))
    }
}

/// `log h(κ_new) − log h(κ_old)` without forming `h`.
pub fn h_logratio<T: Real>(h: &HFamily<T>, kappa_new: T, kappa_old: T) -> Result<T> {
    check_open_unit("kappa_new", kappa_new)?;
    check_open_unit("kappa_old", kappa_old)?;
    Ok(match *h {
        HFamily::Constant => T::zero(),
        HFamily::LogAdjusted { c1, c2 } => {
            if kappa_new == kappa_old {
                T::zero()
            } else {
                c2 * ((T::one() - c1 * kappa_new.ln()) / (T::one() - c1 * kappa_old.ln())).ln()
            }
        }
        HFamily::HyperIb { c3, c4, d } => {
            c4 * ((c3 * kappa_new).ln_1p() - (c3 * kappa_old).ln_1p()) + d * (kappa_new - kappa_old)
        }
    })
}
