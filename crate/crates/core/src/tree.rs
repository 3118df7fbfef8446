//! Survival tree model, routing, and JSON/DOT export.

use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::bitset::Bitset;
use crate::dataset::{BinaryColumn, BinaryDataset};
use crate::num::Real;
use crate::step::StepFunction;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("malformed tree json: {0}")]
    Malformed(String),
    #[error("tree splits on feature {feature} but data has only {available} columns")]
    FeatureOutOfRange { feature: usize, available: usize },
    #[error("feature {index} is `{tree}` in the tree but `{data}` in the data")]
    FeatureMismatch { index: usize, tree: String, data: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf<T> {
    pub curve: StepFunction<T>,
    pub sample_count: usize,
}

impl<T: Real> Leaf<T> {
    /// First time at which the curve drops to 0.5 or below.
    pub fn median_survival(&self) -> Option<T> {
        let half = T::lit(0.5);
        self.curve
            .breakpoints()
            .iter()
            .zip(self.curve.values())
            .find(|(_, &v)| v <= half)
            .map(|(&t, _)| t)
    }
}

/// Samples with feature value 0 go left, value 1 go right.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        name: String,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf(Leaf<T>),
}

impl<T: Real> TreeNode<T> {
    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf<T>>) {
        match self {
            TreeNode::Split { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
            TreeNode::Leaf(leaf) => out.push(leaf),
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf(_) => 0,
        }
    }

    fn route_into(&self, support: Bitset, ds: &BinaryDataset<T>, out: &mut Vec<Bitset>) {
        match self {
            TreeNode::Split {
                feature, left, right, ..
            } => {
                let col = ds.column(*feature);
                left.route_into(support.and_not(col), ds, out);
                right.route_into(support.and(col), ds, out);
            }
            TreeNode::Leaf(_) => out.push(support),
        }
    }

    fn leaf_index(&self, row: &dyn Fn(usize) -> bool, offset: &mut usize) -> usize {
        match self {
            TreeNode::Split {
                feature, left, right, ..
            } => {
                if row(*feature) {
                    *offset += left.leaf_total();
                    right.leaf_index(row, offset)
                } else {
                    left.leaf_index(row, offset)
                }
            }
            TreeNode::Leaf(_) => *offset,
        }
    }

    fn leaf_total(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => left.leaf_total() + right.leaf_total(),
            TreeNode::Leaf(_) => 1,
        }
    }

    fn features_on_paths(&self, path: &mut Vec<usize>, ok: &mut bool) {
        if let TreeNode::Split {
            feature, left, right, ..
        } = self
        {
            if path.contains(feature) {
                *ok = false;
            }
            path.push(*feature);
            left.features_on_paths(path, ok);
            right.features_on_paths(path, ok);
            path.pop();
        }
    }

    fn to_json(&self) -> Value {
        match self {
            TreeNode::Split {
                feature,
                name,
                left,
                right,
            } => json!({
                "feature": feature,
                "name": name,
                "left": left.to_json(),
                "right": right.to_json(),
            }),
            TreeNode::Leaf(leaf) => json!({
                "n": leaf.sample_count,
                "times": leaf.curve.breakpoints().iter().map(|t| t.as_f64()).collect::<Vec<_>>(),
                "survival": leaf.curve.values().iter().map(|s| s.as_f64()).collect::<Vec<_>>(),
            }),
        }
    }

    fn from_json(value: &Value) -> Result<Self, TreeError> {
        let bad = |what: &str| TreeError::Malformed(what.to_owned());
        if let Some(feature) = value.get("feature") {
            let feature = feature.as_u64().ok_or_else(|| bad("feature must be an integer"))? as usize;
            let name = value.get("name").and_then(Value::as_str).unwrap_or_default().to_owned();
            let left = Self::from_json(value.get("left").ok_or_else(|| bad("split without left"))?)?;
            let right = Self::from_json(value.get("right").ok_or_else(|| bad("split without right"))?)?;
            return Ok(TreeNode::Split {
                feature,
                name,
                left: Box::new(left),
                right: Box::new(right),
            });
        }
        let floats = |key: &str| -> Result<Vec<T>, TreeError> {
            value
                .get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| bad(key))?
                .iter()
                .map(|v| v.as_f64().map(T::lit).ok_or_else(|| bad(key)))
                .collect()
        };
        let n = value.get("n").and_then(Value::as_u64).ok_or_else(|| bad("leaf without n"))? as usize;
        let curve = StepFunction::new(floats("times")?, floats("survival")?, T::one()).map_err(|e| TreeError::Malformed(e.to_string()))?;
        Ok(TreeNode::Leaf(Leaf { curve, sample_count: n }))
    }
}

/// Tree together with its penalty accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalTree<T> {
    pub root: TreeNode<T>,
    pub lambda: T,
    pub max_depth: Option<usize>,
    /// Training loss plus `lambda` per leaf.
    pub objective: T,
    pub columns: Vec<BinaryColumn>,
}

/// Metadata stored next to an exported tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExportMeta {
    pub proven_optimal: bool,
    pub gap: f64,
}

impl<T: Real> SurvivalTree<T> {
    pub fn leaves(&self) -> Vec<&Leaf<T>> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_total()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// No feature repeats along any root-to-leaf path.
    pub fn paths_are_simple(&self) -> bool {
        let mut ok = true;
        self.root.features_on_paths(&mut Vec::new(), &mut ok);
        ok
    }

    /// Leaf supports in `leaves()` order.
    pub fn route_all(&self, ds: &BinaryDataset<T>) -> Vec<Bitset> {
        let mut out = Vec::new();
        self.root.route_into(ds.all_samples(), ds, &mut out);
        out
    }

    /// Index (in `leaves()` order) of the leaf sample `i` falls into.
    pub fn leaf_of(&self, ds: &BinaryDataset<T>, i: usize) -> usize {
        let mut offset = 0;
        self.root.leaf_index(&|j| ds.feature(i, j), &mut offset)
    }

    /// Per-sample leaf assignment and the distinct leaf curves.
    pub fn predictions(&self, ds: &BinaryDataset<T>) -> crate::metrics::Predictions<T> {
        let curves = self.leaves().into_iter().map(|l| l.curve.clone()).collect();
        let assignment = (0..ds.n_samples()).map(|i| self.leaf_of(ds, i)).collect();
        crate::metrics::Predictions::new(curves, assignment).expect("assignment indexes leaves")
    }

    /// Check that `ds` has compatible feature columns for routing.
    pub fn check_compatible(&self, ds: &BinaryDataset<T>) -> Result<(), TreeError> {
        let mut used = Vec::new();
        collect_features(&self.root, &mut used);
        for j in used {
            if j >= ds.n_features() {
                return Err(TreeError::FeatureOutOfRange {
                    feature: j,
                    available: ds.n_features(),
                });
            }
            if let Some(col) = self.columns.get(j) {
                if col.name != ds.feature_name(j) {
                    return Err(TreeError::FeatureMismatch {
                        index: j,
                        tree: col.name.clone(),
                        data: ds.feature_name(j).to_owned(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self, meta: ExportMeta) -> Value {
        json!({
            "objective": self.objective.as_f64(),
            "lambda": self.lambda.as_f64(),
            "depth": self.max_depth,
            "proven_optimal": meta.proven_optimal,
            "gap": meta.gap,
            "leaves": self.leaf_count(),
            "features": self.columns,
            "tree": self.root.to_json(),
        })
    }

    pub fn from_json(value: &Value) -> Result<(Self, ExportMeta), TreeError> {
        let bad = |what: &str| TreeError::Malformed(what.to_owned());
        let root = TreeNode::from_json(value.get("tree").ok_or_else(|| bad("missing tree"))?)?;
        let num = |key: &str| value.get(key).and_then(Value::as_f64).ok_or_else(|| bad(key));
        let columns: Vec<BinaryColumn> = match value.get("features") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| TreeError::Malformed(e.to_string()))?,
            None => Vec::new(),
        };
        let tree = SurvivalTree {
            root,
            lambda: T::lit(num("lambda")?),
            max_depth: value.get("depth").and_then(Value::as_u64).map(|d| d as usize),
            objective: T::lit(num("objective")?),
            columns,
        };
        let meta = ExportMeta {
            proven_optimal: value.get("proven_optimal").and_then(Value::as_bool).unwrap_or(false),
            gap: value.get("gap").and_then(Value::as_f64).unwrap_or(f64::NAN),
        };
        Ok((tree, meta))
    }

    /// Graphviz rendering: split labels are column names, leaves show size
    /// and median survival time.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph survival_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        let mut next = 0;
        write_dot(&self.root, &mut out, &mut next);
        out.push_str("}\n");
        out
    }
}

fn collect_features<T>(node: &TreeNode<T>, out: &mut Vec<usize>) {
    if let TreeNode::Split {
        feature, left, right, ..
    } = node
    {
        out.push(*feature);
        collect_features(left, out);
        collect_features(right, out);
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn write_dot<T: Real>(node: &TreeNode<T>, out: &mut String, next: &mut usize) -> usize {
    let id = *next;
    *next += 1;
    match node {
        TreeNode::Split { name, left, right, .. } => {
            let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(name));
            let l = write_dot(left, out, next);
            let r = write_dot(right, out, next);
            let _ = writeln!(out, "  n{id} -> n{l} [label=\"no\"];");
            let _ = writeln!(out, "  n{id} -> n{r} [label=\"yes\"];");
        }
        TreeNode::Leaf(leaf) => {
            let median = leaf.median_survival().map_or_else(|| "inf".to_owned(), |m| format!("{}", m.as_f64()));
            let _ = writeln!(
                out,
                "  n{id} [shape=ellipse, label=\"n={}\\nmedian={}\"];",
                leaf.sample_count, median
            );
        }
    }
    id
}
