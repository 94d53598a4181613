//! Minimaxity certificates and the named minimax configurations.
//!
//! The certifying inequality is
//!
//! ```text
//! 3p/2 + a − (p + 2a + 2 + 2·max H₂)/b + min{0, p/2 + a + 2 + H₁(1)} ≥ 0,
//! with −p/2 ≤ a < p/2 − 2.
//! ```
//!
//! Its sign is decided in exact rational arithmetic on the binary values of
//! the inputs, so a configuration that sits on the boundary by construction
//! (such as `a = b = a*`) is never lost to rounding. For monotone `H` the
//! quantities `max H₂` and `H₁(1)` are closed forms in `H(1)`; otherwise they
//! come from the grid search in [`crate::prior::HGrid`], which errs on the
//! side of a larger `max H₂`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prior::{HFamily, HGrid, Monotonicity, PriorSpec};
use crate::real::Real;

/// Margins in `[−BOUNDARY_GUARD, 0)` are reported as numerically at the
/// boundary, and still not proven.
pub const BOUNDARY_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ProvenMinimax,
    NotProvenByTheseConditions,
}

/// The condition that decided the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Thm1,
    Cor1_1,
    Cor1_2,
    Cor2_1,
    Cor2_2,
    Cor3_1,
    Cor3_2,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Thm1 => "Thm1",
            Rule::Cor1_1 => "Cor1_1",
            Rule::Cor1_2 => "Cor1_2",
            Rule::Cor2_1 => "Cor2_1",
            Rule::Cor2_2 => "Cor2_2",
            Rule::Cor3_1 => "Cor3_1",
            Rule::Cor3_2 => "Cor3_2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaxReport<T: Real> {
    pub verdict: Verdict,
    pub rule: Rule,
    /// Left-hand side of the certifying inequality (rounded from the exact
    /// value).
    pub margin: T,
    /// Smallest `b` certified by the corollary that fired, if any.
    pub b_threshold: Option<T>,
    pub details: String,
}

impl<T: Real> MinimaxReport<T> {
    pub fn is_proven(&self) -> bool {
        self.verdict == Verdict::ProvenMinimax
    }
}

fn exact<T: Real>(x: T) -> BigRational {
    BigRational::from_float(x.as_f64()).expect("finite value")
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn round<T: Real>(x: &BigRational) -> T {
    T::lit(x.to_f64().unwrap_or(f64::NAN))
}

fn require_compliant<T: Real>(spec: &PriorSpec<T>) -> Result<()> {
    if spec.is_compliant() {
        Ok(())
    } else {
        Err(Error::RelaxedSpec {
            a: spec.a().as_f64(),
            b: spec.b().as_f64(),
        })
    }
}

/// `H(1)` as an exact rational in the family parameters.
fn h_at_one_exact<T: Real>(h: &HFamily<T>) -> BigRational {
    match *h {
        HFamily::Constant => BigRational::zero(),
        HFamily::LogAdjusted { c1, c2 } => -(exact(c1) * exact(c2)),
        HFamily::HyperIb { c3, c4, d } => {
            let c3 = exact(c3);
            exact(d) + &c3 * exact(c4) / (int(1) + &c3)
        }
    }
}

/// `(max H₂, H₁(1))` and a description of how they were obtained.
fn h_extremes<T: Real>(h: &HFamily<T>) -> (BigRational, BigRational, &'static str) {
    match h.monotonicity() {
        Monotonicity::Flat => (BigRational::zero(), BigRational::zero(), "H ≡ 0"),
        Monotonicity::NonDecreasing => (h_at_one_exact(h), BigRational::zero(), "H non-decreasing: max H₂ = H(1), H₁ ≡ 0"),
        Monotonicity::NonIncreasing => (BigRational::zero(), h_at_one_exact(h), "H non-increasing: H₂ ≡ 0, H₁(1) = H(1)"),
        Monotonicity::NonMonotone => {
            let grid = HGrid::new(h);
            (exact(grid.max_h2()), exact(grid.h1_at_one()), "H non-monotone: grid search with golden-section refinement")
        }
    }
}

/// Exact margin of the certifying inequality.
fn theorem1_margin(p: usize, a: &BigRational, b: &BigRational, max_h2: &BigRational, h1_one: &BigRational) -> BigRational {
    let p = int(p as i64);
    let two = int(2);
    let three_half_p = int(3) * &p / &two;
    let lead = &three_half_p + a - (&p + &two * a + &two + &two * max_h2) / b;
    let tail = &p / &two + a + &two + h1_one;
    let tail = if tail.is_negative() { tail } else { BigRational::zero() };
    lead + tail
}

/// `−p/2 ≤ a < p/2 − 2`, exactly.
fn a_in_range(p: usize, a: &BigRational) -> bool {
    let half_p = int(p as i64) / int(2);
    *a >= -half_p.clone() && *a < half_p - int(2)
}

fn verdict_for(margin: &BigRational, a_ok: bool) -> (Verdict, Option<&'static str>) {
    if !a_ok {
        return (Verdict::NotProvenByTheseConditions, Some("a outside [−p/2, p/2 − 2)"));
    }
    if !margin.is_negative() {
        return (Verdict::ProvenMinimax, None);
    }
    let guard = BigRational::from_float(-BOUNDARY_GUARD).expect("finite");
    if *margin >= guard {
        (Verdict::NotProvenByTheseConditions, Some("margin is negative but numerically at the boundary"))
    } else {
        (Verdict::NotProvenByTheseConditions, Some("margin is negative"))
    }
}

/// The general certificate.
pub fn check_theorem1<T: Real>(spec: &PriorSpec<T>) -> Result<MinimaxReport<T>> {
    require_compliant(spec)?;
    let (a, b) = (exact(spec.a()), exact(spec.b()));
    let (max_h2, h1_one, how) = h_extremes(spec.h());
    let margin = theorem1_margin(spec.p(), &a, &b, &max_h2, &h1_one);
    let (verdict, note) = verdict_for(&margin, a_in_range(spec.p(), &a));
    let mut details = format!(
        "p = {}, a = {}, b = {}; max H₂ = {:.6}, H₁(1) = {:.6} ({how})",
        spec.p(),
        spec.a(),
        spec.b(),
        max_h2.to_f64().unwrap_or(f64::NAN),
        h1_one.to_f64().unwrap_or(f64::NAN)
    );
    if let Some(note) = note {
        details.push_str("; ");
        details.push_str(note);
    }
    Ok(MinimaxReport {
        verdict,
        rule: Rule::Thm1,
        margin: round(&margin),
        b_threshold: None,
        details,
    })
}

/// The corollary for monotone `H`: part 1 (non-increasing, `H(1) ≥
/// −(p/2+a+2)`) gives the threshold `(p+2a+2)/(3p/2+a)`, part 2
/// (non-decreasing, `H(1) < (p/2−a−2)/2`) gives `(p+2a+2+2H(1))/(3p/2+a)`.
/// `H ≡ 0` is reported under part 1.
pub fn check_corollary1<T: Real>(spec: &PriorSpec<T>) -> Result<MinimaxReport<T>> {
    require_compliant(spec)?;
    let mono = spec.h().monotonicity();
    if mono == Monotonicity::NonMonotone {
        return Err(Error::CorollaryInapplicable(format!("H is not monotone on [0, 1] for {:?}", spec.h())));
    }
    let p = int(spec.p() as i64);
    let two = int(2);
    let (a, b) = (exact(spec.a()), exact(spec.b()));
    let h_one = h_at_one_exact(spec.h());
    let denom = int(3) * &p / &two + &a;
    let (rule, numer, hypothesis, hyp_text) = match mono {
        Monotonicity::Flat | Monotonicity::NonIncreasing => {
            let bound = -(&p / &two + &a + &two);
            let ok = h_one >= bound;
            (Rule::Cor1_1, &p + &two * &a + &two, ok, "H(1) ≥ −(p/2 + a + 2)")
        }
        Monotonicity::NonDecreasing => {
            let bound = (&p / &two - &a - &two) / &two;
            let ok = h_one < bound;
            (Rule::Cor1_2, &p + &two * &a + &two + &two * &h_one, ok, "H(1) < (p/2 − a − 2)/2")
        }
        Monotonicity::NonMonotone => unreachable!(),
    };
    let a_ok = a_in_range(spec.p(), &a);
    let threshold = &numer / &denom;
    let (max_h2, h1_one, _) = h_extremes(spec.h());
    let margin = theorem1_margin(spec.p(), &a, &b, &max_h2, &h1_one);
    let proven = a_ok && hypothesis && b >= threshold;
    let mut details = format!(
        "p = {}, a = {}, b = {}; H(1) = {:.6}; threshold {:.12}",
        spec.p(),
        spec.a(),
        spec.b(),
        h_one.to_f64().unwrap_or(f64::NAN),
        threshold.to_f64().unwrap_or(f64::NAN)
    );
    if !a_ok {
        details.push_str("; a outside [−p/2, p/2 − 2)");
    }
    if !hypothesis {
        details.push_str(&format!("; hypothesis {hyp_text} fails"));
    } else if b < threshold {
        details.push_str("; b below threshold");
    }
    Ok(MinimaxReport {
        verdict: if proven {
            Verdict::ProvenMinimax
        } else {
            Verdict::NotProvenByTheseConditions
        },
        rule,
        margin: round(&margin),
        b_threshold: hypothesis.then(|| round(&threshold)),
        details,
    })
}

/// Hypergeometric inverted-beta factor: the monotone regimes of `H` take
/// the corollary route; otherwise the general certificate runs with grid
/// extremes of `H`.
pub fn check_hyper_ib<T: Real>(spec: &PriorSpec<T>) -> Result<MinimaxReport<T>> {
    if !matches!(spec.h(), HFamily::HyperIb { .. }) {
        return Err(Error::InvalidSpec("check_hyper_ib needs a hyper_ib factor".into()));
    }
    relabelled(spec, Rule::Cor3_1, Rule::Cor3_2)
}

fn relabelled<T: Real>(spec: &PriorSpec<T>, part1: Rule, part2: Rule) -> Result<MinimaxReport<T>> {
    match check_corollary1(spec) {
        Ok(mut report) => {
            report.rule = if report.rule == Rule::Cor1_1 { part1 } else { part2 };
            Ok(report)
        }
        Err(Error::CorollaryInapplicable(_)) => check_theorem1(spec),
        Err(e) => Err(e),
    }
}

/// Certificate using the most specific applicable rule for the family,
/// falling back to the general inequality when that rule does not prove
/// minimaxity.
pub fn certify<T: Real>(spec: &PriorSpec<T>) -> Result<MinimaxReport<T>> {
    let specific = match spec.h() {
        HFamily::Constant => relabelled(spec, Rule::Cor1_1, Rule::Cor1_2)?,
        HFamily::LogAdjusted { c2, .. } if *c2 == T::zero() => relabelled(spec, Rule::Cor1_1, Rule::Cor1_2)?,
        HFamily::LogAdjusted { .. } => relabelled(spec, Rule::Cor2_1, Rule::Cor2_2)?,
        HFamily::HyperIb { .. } => check_hyper_ib(spec)?,
    };
    if specific.is_proven() || specific.rule == Rule::Thm1 {
        return Ok(specific);
    }
    let general = check_theorem1(spec)?;
    Ok(if general.is_proven() { general } else { specific })
}

/// `a* = (−3p + 4 + √(9p² − 8p + 48))/4`, the fixed point of the threshold
/// `a ↦ (p+2a+2)/(3p/2+a)`, rounded to the smallest value of `T` for which
/// `a = b = a*` satisfies the certificate exactly.
pub fn a_star<T: Real>(p: usize) -> Result<T> {
    if p < 7 {
        return Err(domain("dimension p", p as f64, "p ≥ 7 (a*(6) = 1 leaves (0, 1))"));
    }
    let pf = T::from_usize_lossy(p);
    let disc = T::lit(9.0) * pf * pf - T::lit(8.0) * pf + T::lit(48.0);
    // Rationalized to avoid cancellation between −3p and the root.
    let approx = (T::lit(4.0) * pf + T::lit(8.0)) / (disc.sqrt() + T::lit(3.0) * pf - T::lit(4.0));
    // x² + (3p/2 − 2)x − (p + 2) ≥ 0  ⇔  margin(a = b = x) ≥ 0 for x > 0
    let p_r = int(p as i64);
    let lin = int(3) * &p_r / int(2) - int(2);
    let holds = |x: T| {
        let x = exact(x);
        !(&x * &x + &lin * &x - (&p_r + int(2))).is_negative()
    };
    Ok(snap_up(approx, holds))
}

/// Smallest representable `x` (near `start`) with `holds(x)`, for a
/// predicate that is monotone in `x`.
fn snap_up<T: Real>(start: T, holds: impl Fn(T) -> bool) -> T {
    let mut x = start;
    while !holds(x) {
        x = x.next_up();
    }
    while holds(x.next_down()) {
        x = x.next_down();
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedPrior {
    /// `a = b = a*(p)`, constant `h`.
    Prior1,
    /// `a = 0`, `b = (5p+4)/(6p)`, `h = {1 + (p−4)/16·log(1/κ)}^(−2)`.
    Prior2,
}

impl FromStr for NamedPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior1" => Ok(NamedPrior::Prior1),
            "prior2" => Ok(NamedPrior::Prior2),
            other => Err(Error::Config(format!("unknown named prior {other:?} (expected prior1 or prior2)"))),
        }
    }
}

impl fmt::Display for NamedPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NamedPrior::Prior1 => "prior1",
            NamedPrior::Prior2 => "prior2",
        })
    }
}

/// The two minimax configurations used throughout the experiments.
pub fn named_prior<T: Real>(name: NamedPrior, p: usize) -> Result<PriorSpec<T>> {
    match name {
        NamedPrior::Prior1 => {
            let a = a_star::<T>(p)?;
            PriorSpec::new(p, a, a, HFamily::Constant)
        }
        NamedPrior::Prior2 => {
            if p < 5 {
                return Err(domain("dimension p", p as f64, "p ≥ 5"));
            }
            let pf = T::from_usize_lossy(p);
            let c1 = (pf - T::lit(4.0)) / T::lit(16.0);
            let h = HFamily::LogAdjusted { c1, c2: T::lit(-2.0) };
            let approx = (T::lit(5.0) * pf + T::lit(4.0)) / (T::lit(6.0) * pf);
            let (max_h2, h1_one, _) = h_extremes(&h);
            let zero = BigRational::zero();
            let b = snap_up(approx, |b| {
                !theorem1_margin(p, &zero, &exact(b), &max_h2, &h1_one).is_negative()
            });
            PriorSpec::new(p, T::zero(), b, h)
        }
    }
}
