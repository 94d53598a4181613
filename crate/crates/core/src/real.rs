//! Scalar abstraction shared by the numerical core.
//!
//! Everything that does not touch a random number generator is written
//! against [`Real`], so the same code runs in `f32` and `f64`. The exact
//! certificate arithmetic in [`crate::minimax`] goes through rationals built
//! from the binary value of a `Real`, which is why the trait exposes
//! [`Real::next_up`] and [`Real::next_down`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Machine epsilon as seen by the tolerances in this crate.
    const EPS: Self;

    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Largest representable value strictly smaller than `self`.
    fn next_down(self) -> Self;

    /// Literal conversion; every literal used in this crate is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in Real")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;

    #[inline]
    fn next_up(self) -> Self {
        f32::next_up(self)
    }

    #[inline]
    fn next_down(self) -> Self {
        f32::next_down(self)
    }
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;

    #[inline]
    fn next_up(self) -> Self {
        f64::next_up(self)
    }

    #[inline]
    fn next_down(self) -> Self {
        f64::next_down(self)
    }
}

/// Running log-sum-exp accumulator.
///
/// Keeps `max` and `sum = Σ exp(x_i − max)` so that no term is ever
/// exponentiated at its own scale.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp<T: Real> {
    max: T,
    sum: T,
}

impl<T: Real> Default for LogSumExp<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LogSumExp<T> {
    pub fn new() -> Self {
        Self {
            max: T::neg_infinity(),
            sum: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        if x.is_nan() {
            self.max = T::nan();
            return;
        }
        if x == T::neg_infinity() {
            return;
        }
        if x <= self.max {
            self.sum = self.sum + (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + T::one();
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.max == T::neg_infinity() {
            return;
        }
        if other.max.is_nan() {
            self.max = T::nan();
            return;
        }
        if other.max <= self.max {
            self.sum = self.sum + other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    /// Largest term seen so far (`-inf` when empty).
    pub fn max_term(&self) -> T {
        self.max
    }

    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [-3.0_f64, 0.5, 2.0, -700.0, 1.25];
        let mut acc = LogSumExp::new();
        for &x in &xs {
            acc.add(x);
        }
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((acc.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_survives_extreme_scales() {
        let mut acc = LogSumExp::new();
        acc.add(-1.0e6_f64);
        acc.add(-1.0e6 + 2.0_f64.ln());
        assert!((acc.value() - (-1.0e6 + 3.0_f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn merge_equals_sequential() {
        let mut a = LogSumExp::new();
        let mut b = LogSumExp::new();
        let mut all = LogSumExp::new();
        for (i, x) in [1.0_f64, -2.0, 30.0, 4.5, -100.0].into_iter().enumerate() {
            if i % 2 == 0 { a.add(x) } else { b.add(x) }
            all.add(x);
        }
        a.merge(&b);
        assert!((a.value() - all.value()).abs() < 1e-13);
        assert!(LogSumExp::<f32>::new().value().is_infinite());
    }

    #[test]
    fn next_up_down_are_adjacent() {
        let x = 0.9_f64;
        assert!(x.next_up() > x && Real::next_down(Real::next_up(x)) == x);
        let y = 0.9_f32;
        assert!(Real::next_up(y) > y);
        assert!((log_add_exp(0.0_f64, 0.0) - 2.0_f64.ln()).abs() < 1e-15);
    }
}
