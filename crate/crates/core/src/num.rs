//! Scalar abstractions shared by every numeric routine in the crate.
//!
//! [`Scalar`] is the minimal ring-like interface needed by the product-limit
//! estimator and step-function evaluation; it is satisfied by exact rational
//! types as well as floats. [`Real`] adds what the loss, bound and search code
//! needs: division, square roots, ordering with slack, and compensated sums.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A number usable in step functions and Kaplan-Meier products.
pub trait Scalar: Num + Copy + PartialOrd + Debug + FromPrimitive {}

impl<T: Num + Copy + PartialOrd + Debug + FromPrimitive> Scalar for T {}

/// Floating-point scalar used for losses, bounds and search.
pub trait Real: Scalar + Float + ToPrimitive + Default + Send + Sync + 'static {
    /// Absolute slack used when comparing lower and upper bounds.
    const BOUND_SLACK: Self;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as float")
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable as float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const BOUND_SLACK: f64 = 1e-12;
}

impl Real for f32 {
    const BOUND_SLACK: f32 = 1e-6;
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of reals.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<CompensatedSum<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1e16_f64];
        xs.extend(std::iter::repeat(1.0).take(1000));
        xs.push(-1e16);
        assert_eq!(compensated_sum(xs.iter().copied()), 1000.0);
    }

    #[test]
    fn slack_matches_precision() {
        assert!(<f64 as Real>::BOUND_SLACK < 1e-10);
        assert!(<f32 as Real>::BOUND_SLACK > f32::EPSILON);
    }
}
