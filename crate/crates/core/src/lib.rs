//! Provably optimal sparse survival trees.
//!
//! Trees minimize the integrated Brier score (with inverse-probability-of-
//! censoring weights) plus a per-leaf penalty, under a depth limit. Search is
//! dynamic programming with bounds over subsets of samples.
//!
//! Everything numeric is generic over [`num::Real`]; the aliases below fix the
//! scalar to `f64` (and `f32` with the `32` suffix).

pub mod bitset;
pub mod bounds;
pub mod dataset;
pub mod metrics;
pub mod num;
pub mod reference;
pub mod solver;
pub mod step;
pub mod survival;
pub mod tree;

pub use bitset::Bitset;
pub use bounds::{BoundConfig, BoundError, BoundsPair};
pub use dataset::{
    binarize, load_csv, BinarizationReport, BinarizeConfig, Binarizer, CsvSchema, DataError, Encoding, RawDataset,
};
pub use metrics::{evaluate, EvaluationReport, MetricError};
pub use num::Real;
pub use reference::{fit_reference, reference_losses, ReferenceConfig, ReferenceError};
pub use solver::{greedy_tree, solve, Schedule, SolveError, SolveStats, SolverOptions};
pub use step::{km_estimator, StepFunction};
pub use survival::{leaf_loss, sample_loss, tree_loss};
pub use tree::{ExportMeta, SurvivalTree, TreeError};

pub type Dataset = dataset::BinaryDataset<f64>;
pub type Tree = tree::SurvivalTree<f64>;
pub type Curve = step::StepFunction<f64>;
pub type Solution = solver::SolveResult<f64>;
pub type Config = bounds::BoundConfig<f64>;
pub type Reference = reference::ReferenceModel<f64>;

pub type Dataset32 = dataset::BinaryDataset<f32>;
pub type Tree32 = tree::SurvivalTree<f32>;
pub type Curve32 = step::StepFunction<f32>;
pub type Solution32 = solver::SolveResult<f32>;
pub type Config32 = bounds::BoundConfig<f32>;
