//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the estimators, tests and classifiers are generic over.
///
/// Implemented for `f32` and `f64`. The associated tolerances are expressed
/// in `f64` so they can be compared against `to_f64()` values regardless of
/// the working precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Largest accepted gap between expected and observed distinct-species
    /// counts for a fit to be reported as converged.
    const FIT_RESIDUAL_TOL: f64;

    /// Minimum joint-score gain for the simultaneous classifier to accept a
    /// reassignment. Anything smaller is treated as rounding noise.
    const IMPROVEMENT_TOL: f64;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const FIT_RESIDUAL_TOL: f64 = 1e-8;
    const IMPROVEMENT_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const FIT_RESIDUAL_TOL: f64 = 1e-3;
    const IMPROVEMENT_TOL: f64 = 1e-5;
}

/// Compensated (Kahan–Babuška) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
