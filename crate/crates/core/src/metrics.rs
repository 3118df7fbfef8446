//! Evaluation of fitted trees: IBS ratio, concordance indices and
//! cumulative-dynamic AUC.
//!
//! Censoring weights always come from the evaluation dataset's own censoring
//! estimate, evaluated as a left limit at each sample's time.

use serde::Serialize;
use thiserror::Error;

use crate::dataset::BinaryDataset;
use crate::num::{CompensatedSum, Real};
use crate::step::{km_estimator, StepFunction};
use crate::survival::{leaf_loss_value, tree_loss, LossError};
use crate::tree::SurvivalTree;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("single-leaf loss is zero; the ratio is undefined")]
    DegenerateRoot,
    #[error("no evaluation time has both a case and a control")]
    NoValidEvalTime,
    #[error("prediction assignment {index} is out of range for {curves} curves")]
    BadAssignment { index: usize, curves: usize },
    #[error("{predictions} predictions for {samples} samples")]
    LengthMismatch { predictions: usize, samples: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Predicted survival curves, shared between samples that land in the same leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions<T> {
    pub curves: Vec<StepFunction<T>>,
    /// Curve index for each sample.
    pub assignment: Vec<usize>,
}

impl<T: Real> Predictions<T> {
    pub fn new(curves: Vec<StepFunction<T>>, assignment: Vec<usize>) -> Result<Self, MetricError> {
        if let Some(&index) = assignment.iter().find(|&&a| a >= curves.len()) {
            return Err(MetricError::BadAssignment {
                index,
                curves: curves.len(),
            });
        }
        Ok(Self { curves, assignment })
    }

    /// One curve per sample.
    pub fn per_sample(curves: Vec<StepFunction<T>>) -> Self {
        let assignment = (0..curves.len()).collect();
        Self { curves, assignment }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn survival(&self, i: usize, t: T) -> T {
        self.curves[self.assignment[i]].eval(t)
    }

    fn check(&self, n: usize) -> Result<(), MetricError> {
        if self.len() != n {
            return Err(MetricError::LengthMismatch {
                predictions: self.len(),
                samples: n,
            });
        }
        Ok(())
    }
}

/// `1 - tree loss / single-leaf loss` on `ds`.
pub fn ibs_ratio<T: Real>(tree: &SurvivalTree<T>, ds: &BinaryDataset<T>) -> Result<T, MetricError> {
    let root = leaf_loss_value(&ds.all_samples(), ds);
    if root <= T::zero() {
        return Err(MetricError::DegenerateRoot);
    }
    Ok(T::one() - tree_loss(tree, ds)? / root)
}

/// 1 if `a < b`, 0.5 on ties, else 0.
fn concordance<T: Real>(a: T, b: T) -> T {
    if a < b {
        T::one()
    } else if a == b {
        T::lit(0.5)
    } else {
        T::zero()
    }
}

/// Weighted concordance over pairs (i, j) with `c_i = 1` and `y_i < y_j`,
/// scored at `y_i`. Runs in `O(N * curves)` by sweeping times downward
/// while tracking how many later samples each curve holds.
fn weighted_concordance<T: Real>(
    predictions: &Predictions<T>,
    ds: &BinaryDataset<T>,
    weight: impl Fn(usize) -> T,
) -> Result<T, MetricError> {
    predictions.check(ds.n_samples())?;
    let n = ds.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ds.times[b].partial_cmp(&ds.times[a]).expect("finite times"));
    let mut later = vec![0usize; predictions.curves.len()];
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    let mut start = 0;
    while start < n {
        let t = ds.times[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| ds.times[i] == t).count();
        let at_t: Vec<T> = predictions.curves.iter().map(|c| c.eval(t)).collect();
        for &i in &order[start..end] {
            if !ds.events[i] {
                continue;
            }
            let w = weight(i);
            if w == T::zero() {
                continue;
            }
            let own = at_t[predictions.assignment[i]];
            for (h, &count) in later.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let c = T::from_count(count);
                num.add(w * c * concordance(own, at_t[h]));
                den.add(w * c);
            }
        }
        for &i in &order[start..end] {
            later[predictions.assignment[i]] += 1;
        }
        start = end;
    }
    if den.value() <= T::zero() {
        return Err(MetricError::NoComparablePairs);
    }
    Ok(num.value() / den.value())
}

pub fn harrell_c<T: Real>(predictions: &Predictions<T>, ds: &BinaryDataset<T>) -> Result<T, MetricError> {
    weighted_concordance(predictions, ds, |_| T::one())
}

/// Harrell's index with pair weights `G(y_i-)^-2`; pairs with `G = 0` are dropped.
pub fn uno_c<T: Real>(predictions: &Predictions<T>, ds: &BinaryDataset<T>) -> Result<T, MetricError> {
    weighted_concordance(predictions, ds, |i| {
        let g = ds.censoring.eval_left(ds.times[i]);
        if g > T::zero() {
            (g * g).recip()
        } else {
            T::zero()
        }
    })
}

/// AUC at each kept evaluation time and their summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AucCurve {
    pub times: Vec<f64>,
    pub auc: Vec<f64>,
    pub mean_auc: f64,
    /// Requested times without a case or a control.
    pub dropped_times: Vec<f64>,
}

/// Distinct death times strictly inside `(y_min, y_max)`.
pub fn default_eval_times<T: Real>(ds: &BinaryDataset<T>) -> Vec<T> {
    let lo = ds.grid.breakpoints[0];
    let hi = ds.grid.y_max;
    let mut times: Vec<T> = ds
        .times
        .iter()
        .zip(&ds.events)
        .filter(|(&t, &e)| e && t > lo && t < hi)
        .map(|(&t, _)| t)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    times.dedup();
    times
}

/// Cases `c_i = 1, y_i <= t` weighted by `1/G(y_i-)` against controls
/// `y_j > t`, compared on predicted survival at `t` with ties counting half.
/// The mean weights each time by the drop of the pooled Kaplan-Meier curve.
pub fn cumulative_dynamic_auc<T: Real>(
    predictions: &Predictions<T>,
    ds: &BinaryDataset<T>,
    eval_times: &[T],
) -> Result<AucCurve, MetricError> {
    predictions.check(ds.n_samples())?;
    let n_curves = predictions.curves.len();
    let inverse_g: Vec<T> = (0..ds.n_samples())
        .map(|i| {
            let g = ds.censoring.eval_left(ds.times[i]);
            if ds.events[i] && g > T::zero() {
                g.recip()
            } else {
                T::zero()
            }
        })
        .collect();
    let mut times = eval_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite eval times"));
    times.dedup();

    let mut curve = AucCurve {
        times: Vec::new(),
        auc: Vec::new(),
        mean_auc: f64::NAN,
        dropped_times: Vec::new(),
    };
    let mut kept = Vec::new();
    for &t in &times {
        let mut case_weight = vec![T::zero(); n_curves];
        let mut controls = vec![0usize; n_curves];
        for i in 0..ds.n_samples() {
            let g = predictions.assignment[i];
            if ds.times[i] <= t {
                case_weight[g] = case_weight[g] + inverse_g[i];
            } else {
                controls[g] += 1;
            }
        }
        let total_cases: T = case_weight.iter().fold(T::zero(), |a, &b| a + b);
        let total_controls: usize = controls.iter().sum();
        if total_cases <= T::zero() || total_controls == 0 {
            log::info!("dropping AUC evaluation time {} without cases or controls", t.as_f64());
            curve.dropped_times.push(t.as_f64());
            continue;
        }
        let at_t: Vec<T> = predictions.curves.iter().map(|c| c.eval(t)).collect();
        let mut num = CompensatedSum::new();
        for (a, &w) in case_weight.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for (b, &c) in controls.iter().enumerate() {
                if c > 0 {
                    num.add(w * T::from_count(c) * concordance(at_t[a], at_t[b]));
                }
            }
        }
        let auc = num.value() / (total_cases * T::from_count(total_controls));
        kept.push(t);
        curve.times.push(t.as_f64());
        curve.auc.push(auc.as_f64());
    }
    if kept.is_empty() {
        return Err(MetricError::NoValidEvalTime);
    }

    let pooled = km_estimator(&ds.times, &ds.events).expect("validated dataset");
    let mut previous = 1.0;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (&t, &auc) in kept.iter().zip(&curve.auc) {
        let s = pooled.eval(t).as_f64();
        let drop = previous - s;
        previous = s;
        weighted += auc * drop;
        total += drop;
    }
    curve.mean_auc = if total > 0.0 {
        weighted / total
    } else {
        curve.auc.iter().sum::<f64>() / curve.auc.len() as f64
    };
    Ok(curve)
}

/// Every metric for one tree on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub ibs: f64,
    pub ibs_ratio: f64,
    pub harrell_c: f64,
    pub uno_c: f64,
    pub mean_auc: f64,
    pub leaf_count: usize,
    pub auc: AucCurve,
}

pub fn evaluate<T: Real>(tree: &SurvivalTree<T>, ds: &BinaryDataset<T>) -> Result<EvaluationReport, MetricError> {
    let predictions = tree.predictions(ds);
    let ibs = tree_loss(tree, ds)?;
    let auc = cumulative_dynamic_auc(&predictions, ds, &default_eval_times(ds))?;
    Ok(EvaluationReport {
        ibs: ibs.as_f64(),
        ibs_ratio: ibs_ratio(tree, ds)?.as_f64(),
        harrell_c: harrell_c(&predictions, ds)?.as_f64(),
        uno_c: uno_c(&predictions, ds)?.as_f64(),
        mean_auc: auc.mean_auc,
        leaf_count: tree.leaf_count(),
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(times: &[f64], events: &[bool]) -> BinaryDataset<f64> {
        let rows = vec![vec![false]; times.len()];
        BinaryDataset::from_rows(&rows, times.to_vec(), events.to_vec()).unwrap()
    }

    fn constant_curves(values: &[f64]) -> Predictions<f64> {
        Predictions::per_sample(values.iter().map(|&v| StepFunction::constant(v)).collect())
    }

    #[test]
    fn tied_predictions_score_half() {
        let d = ds(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let p = constant_curves(&[0.4; 4]);
        assert_eq!(harrell_c(&p, &d).unwrap(), 0.5);
        assert_eq!(uno_c(&p, &d).unwrap(), 0.5);
        let auc = cumulative_dynamic_auc(&p, &d, &default_eval_times(&d)).unwrap();
        assert!(auc.auc.iter().all(|&a| a == 0.5));
    }

    #[test]
    fn perfectly_ordered_predictions() {
        let d = ds(&[1.0, 2.0, 3.0, 4.0], &[true; 4]);
        let p = constant_curves(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(harrell_c(&p, &d).unwrap(), 1.0);
        assert_eq!(uno_c(&p, &d).unwrap(), 1.0);
        let auc = cumulative_dynamic_auc(&p, &d, &[2.0, 3.0]).unwrap();
        assert_eq!(auc.auc, vec![1.0, 1.0]);
        assert_eq!(auc.mean_auc, 1.0);
    }

    #[test]
    fn no_comparable_pairs() {
        let d = ds(&[1.0, 2.0], &[true, false]);
        let d_tie = ds(&[2.0, 2.0], &[true, true]);
        let p = constant_curves(&[0.5, 0.5]);
        assert!(harrell_c(&p, &d).is_ok());
        assert_eq!(harrell_c(&p, &d_tie), Err(MetricError::NoComparablePairs));
    }

    #[test]
    fn auc_without_valid_times() {
        let d = ds(&[1.0, 2.0], &[true, true]);
        let p = constant_curves(&[0.5, 0.5]);
        assert_eq!(cumulative_dynamic_auc(&p, &d, &[5.0]), Err(MetricError::NoValidEvalTime));
    }

    #[test]
    fn bad_assignment_rejected() {
        assert!(Predictions::<f64>::new(vec![StepFunction::constant(1.0)], vec![0, 1]).is_err());
    }

    #[test]
    fn default_times_exclude_extremes_and_censored() {
        let d = ds(&[1.0, 2.0, 3.0, 3.0, 5.0], &[true, false, true, true, true]);
        assert_eq!(default_eval_times(&d), vec![3.0]);
    }
}
