//! Right-continuous step functions and the product-limit estimator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("product-limit estimator needs at least one observation")]
    EmptyInput,
    #[error("times and events differ in length ({times} vs {events})")]
    LengthMismatch { times: usize, events: usize },
    #[error("breakpoints must be strictly increasing")]
    UnsortedBreakpoints,
    #[error("breakpoints and values differ in length")]
    ShapeMismatch,
}

/// Piecewise-constant function on `[0, inf)`.
///
/// Takes `initial` on `[0, breakpoints[0])` and `values[j]` on
/// `[breakpoints[j], breakpoints[j + 1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction<T> {
    breakpoints: Vec<T>,
    values: Vec<T>,
    initial: T,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>, initial: T) -> Result<Self, StepError> {
        if breakpoints.len() != values.len() {
            return Err(StepError::ShapeMismatch);
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StepError::UnsortedBreakpoints);
        }
        Ok(Self {
            breakpoints,
            values,
            initial,
        })
    }

    pub fn constant(value: T) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: Vec::new(),
            initial: value,
        }
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn initial(&self) -> T {
        self.initial
    }

    /// `f(t)`: value of the piece containing `t`.
    pub fn eval(&self, t: T) -> T {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `f(t-)`.
    pub fn eval_left(&self, t: T) -> T {
        let idx = self.breakpoints.partition_point(|&b| b < t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Values of `f` on the pieces `[grid[k-1], grid[k])` (with `grid[-1] = 0`),
    /// i.e. `f(grid[k]-)` for each grid point.
    pub fn on_grid(&self, grid: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(grid.len());
        let mut j = 0;
        let mut current = self.initial;
        for &g in grid {
            while j < self.breakpoints.len() && self.breakpoints[j] < g {
                current = self.values[j];
                j += 1;
            }
            out.push(current);
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            initial: f(self.initial),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        let mut prev = self.initial;
        self.values.iter().all(|&v| {
            let ok = !(v > prev);
            prev = v;
            ok
        })
    }
}

/// Product-limit (Kaplan-Meier) estimate `S(y) = prod_{t_j <= y} (1 - d_j / n_j)`.
///
/// Breakpoints are placed only at times with at least one event.
pub fn km_estimator<T: Scalar>(times: &[T], events: &[bool]) -> Result<StepFunction<T>, StepError> {
    if times.len() != events.len() {
        return Err(StepError::LengthMismatch {
            times: times.len(),
            events: events.len(),
        });
    }
    if times.is_empty() {
        return Err(StepError::EmptyInput);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).expect("comparable times"));

    let count = |n: usize| T::from_usize(n).expect("count representable");
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let mut survival = T::one();
    let mut at_risk = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && times[order[j]] == t {
            if events[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            survival = survival * (T::one() - count(deaths) / count(at_risk));
            breakpoints.push(t);
            values.push(survival);
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(StepFunction {
        breakpoints,
        values,
        initial: T::one(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_censored_is_constant_one() {
        let s = km_estimator(&[1.0, 2.0, 5.0], &[false, false, false]).unwrap();
        assert!(s.breakpoints().is_empty());
        assert_eq!(s.eval(100.0), 1.0);
    }

    #[test]
    fn three_sample_hand_computation() {
        let s = km_estimator::<f64>(&[1.0, 2.0, 3.0], &[true, true, false]).unwrap();
        assert_eq!(s.eval(0.5), 1.0);
        assert!((s.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.eval(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.eval(10.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.eval_left(2.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_mismatch_rejected() {
        assert_eq!(
            km_estimator::<f64>(&[], &[]).unwrap_err(),
            StepError::EmptyInput
        );
        assert!(matches!(
            km_estimator(&[1.0], &[true, false]),
            Err(StepError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ties_between_death_and_censoring() {
        // deaths at 2 see both tied samples at risk
        let s = km_estimator::<f64>(&[2.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert!((s.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.eval(3.0), 0.0);
    }

    #[test]
    fn on_grid_uses_left_limits() {
        let s = StepFunction::new(vec![1.0, 3.0], vec![0.5, 0.25], 1.0).unwrap();
        assert_eq!(s.on_grid(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 0.5, 0.5, 0.25]);
    }

    #[test]
    fn rejects_unsorted() {
        assert_eq!(
            StepFunction::new(vec![2.0, 1.0], vec![0.5, 0.2], 1.0).unwrap_err(),
            StepError::UnsortedBreakpoints
        );
    }
}
