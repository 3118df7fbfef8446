//! Reference model for guessed lower bounds: a bagged ensemble of greedy
//! trees, and CSV import/export of per-sample losses.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use thiserror::Error;

use crate::bounds::BoundConfig;
use crate::dataset::{BinaryDataset, DataError};
use crate::metrics::Predictions;
use crate::num::Real;
use crate::solver::{greedy_tree_with, GreedyOptions};
use crate::step::StepFunction;
use crate::survival::{curve_integrals, sample_loss_from_integrals};
use crate::tree::{ExportMeta, SurvivalTree, TreeError};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("ensemble needs at least one tree")]
    NoTrees,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("line {line}: cannot parse `{value}`")]
    Parse { line: usize, value: String },
    #[error("loss file has no entry for index {0}")]
    MissingIndex(usize),
    #[error("loss file lists index {0} more than once")]
    DuplicateIndex(usize),
    #[error("index {index} is outside 0..{n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("loss for index {0} is negative or not finite")]
    NegativeLoss(usize),
    #[error("could not draw a bootstrap sample with an observed death")]
    NoDeathsInBootstrap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub lambda: f64,
    pub bootstrap: bool,
    /// Draw `ceil(sqrt(M))` candidate features per split.
    pub subsample_features: bool,
    pub seed: u64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 9,
            min_leaf: 3,
            lambda: 0.0,
            bootstrap: true,
            subsample_features: true,
            seed: 2023,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceModel<T> {
    pub trees: Vec<SurvivalTree<T>>,
    pub max_depth: usize,
}

pub fn fit_reference<T: Real>(ds: &BinaryDataset<T>, config: &ReferenceConfig) -> Result<ReferenceModel<T>, ReferenceError> {
    if config.n_trees == 0 {
        return Err(ReferenceError::NoTrees);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bounds = BoundConfig::new(T::lit(config.lambda), Some(config.max_depth)).with_min_leaf(config.min_leaf.max(1));
    let options = GreedyOptions {
        max_features: config
            .subsample_features
            .then(|| (ds.n_features() as f64).sqrt().ceil() as usize),
    };
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let tree = if config.bootstrap {
            let sample = draw_bootstrap(ds, &mut rng)?;
            greedy_tree_with(&sample, &bounds, options, &mut rng)
        } else {
            greedy_tree_with(ds, &bounds, options, &mut rng)
        };
        trees.push(tree);
    }
    Ok(ReferenceModel {
        trees,
        max_depth: config.max_depth,
    })
}

fn draw_bootstrap<T: Real>(ds: &BinaryDataset<T>, rng: &mut ChaCha8Rng) -> Result<BinaryDataset<T>, ReferenceError> {
    let n = ds.n_samples();
    for _ in 0..100 {
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        match ds.subset(&rows) {
            Ok(sample) => return Ok(sample),
            Err(DataError::NoUncensored) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ReferenceError::NoDeathsInBootstrap)
}

impl<T: Real> ReferenceModel<T> {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Ensemble curve per sample; samples with the same leaf in every member
    /// share a curve.
    pub fn predict(&self, ds: &BinaryDataset<T>) -> Result<Predictions<T>, ReferenceError> {
        for tree in &self.trees {
            tree.check_compatible(ds)?;
        }
        let leaves: Vec<Vec<&StepFunction<T>>> = self
            .trees
            .iter()
            .map(|t| t.leaves().into_iter().map(|l| &l.curve).collect())
            .collect();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut curves = Vec::new();
        let mut assignment = Vec::with_capacity(ds.n_samples());
        for i in 0..ds.n_samples() {
            let path: Vec<usize> = self.trees.iter().map(|t| t.leaf_of(ds, i)).collect();
            let next = curves.len();
            let id = *index.entry(path.clone()).or_insert(next);
            if id == next {
                let members: Vec<&StepFunction<T>> = path.iter().zip(&leaves).map(|(&l, tree)| tree[l]).collect();
                curves.push(average_curve(&members));
            }
            assignment.push(id);
        }
        Ok(Predictions { curves, assignment })
    }

    pub fn to_json(&self) -> Value {
        let meta = ExportMeta {
            proven_optimal: false,
            gap: f64::NAN,
        };
        Value::Array(self.trees.iter().map(|t| t.to_json(meta)).collect())
    }

    pub fn from_json(value: &Value) -> Result<Self, ReferenceError> {
        let items = value
            .as_array()
            .ok_or_else(|| TreeError::Malformed("reference model must be an array of trees".into()))?;
        let trees = items
            .iter()
            .map(|v| SurvivalTree::from_json(v).map(|(t, _)| t))
            .collect::<Result<Vec<_>, _>>()?;
        if trees.is_empty() {
            return Err(ReferenceError::NoTrees);
        }
        let max_depth = trees.iter().filter_map(|t| t.max_depth).max().unwrap_or(0);
        Ok(Self { trees, max_depth })
    }
}

/// Pointwise mean over the union of breakpoints, clipped to `[0, 1]` and
/// made nonincreasing by a running minimum.
pub fn average_curve<T: Real>(curves: &[&StepFunction<T>]) -> StepFunction<T> {
    let mut breakpoints: Vec<T> = curves.iter().flat_map(|c| c.breakpoints().iter().copied()).collect();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breakpoints.dedup();
    let count = T::from_count(curves.len());
    let clip = |v: T| v.max(T::zero()).min(T::one());
    let initial = clip(curves.iter().fold(T::zero(), |acc, c| acc + c.initial()) / count);
    let mut running = initial;
    let values = breakpoints
        .iter()
        .map(|&t| {
            let mean = curves.iter().fold(T::zero(), |acc, c| acc + c.eval(t)) / count;
            running = running.min(clip(mean));
            running
        })
        .collect();
    StepFunction::new(breakpoints, values, initial).expect("sorted breakpoints")
}

/// Loss of each sample against the ensemble's curve for it.
pub fn reference_losses<T: Real>(model: &ReferenceModel<T>, ds: &BinaryDataset<T>) -> Result<Vec<T>, ReferenceError> {
    let predictions = model.predict(ds)?;
    let integrals: Vec<(Vec<T>, Vec<T>)> = predictions.curves.iter().map(|c| curve_integrals(c, ds)).collect();
    Ok(predictions
        .assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (one, zero) = &integrals[c];
            sample_loss_from_integrals(one, zero, i, ds)
        })
        .collect())
}

/// Write `index,loss` rows with 17 significant digits.
pub fn export_losses<T: Real>(losses: &[T], path: impl AsRef<Path>) -> Result<(), ReferenceError> {
    let path = path.as_ref();
    let io = |source| ReferenceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "index,loss").map_err(io)?;
    for (i, loss) in losses.iter().enumerate() {
        writeln!(out, "{i},{:.16e}", loss.as_f64()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Read a loss file that must list each index in `0..n` exactly once.
pub fn import_losses<T: Real>(path: impl AsRef<Path>, n: usize) -> Result<Vec<T>, ReferenceError> {
    let path = path.as_ref();
    let csv_err = |source| ReferenceError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut losses: Vec<Option<T>> = vec![None; n];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = row + 2;
        let field = |k: usize| record.get(k).unwrap_or("").trim().to_owned();
        let index: usize = field(0).parse().map_err(|_| ReferenceError::Parse { line, value: field(0) })?;
        let loss: f64 = field(1).parse().map_err(|_| ReferenceError::Parse { line, value: field(1) })?;
        if index >= n {
            return Err(ReferenceError::IndexOutOfRange { index, n });
        }
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(ReferenceError::NegativeLoss(index));
        }
        if losses[index].replace(T::lit(loss)).is_some() {
            return Err(ReferenceError::DuplicateIndex(index));
        }
    }
    losses
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(ReferenceError::MissingIndex(i)))
        .collect()
}
