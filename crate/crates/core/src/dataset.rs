//! Loading censored tabular data, binarizing features, and precomputing the
//! time grid, censoring weights and equivalence classes used by the loss.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::Bitset;
use crate::num::Real;
use crate::step::{km_estimator, StepFunction};
use crate::survival;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse time `{value}`")]
    UnparseableTime { row: usize, value: String },
    #[error("row {row}: time must be positive and finite")]
    NonPositiveTime { row: usize },
    #[error("row {row}: event must be 0 or 1, got `{value}`")]
    UnparseableEvent { row: usize, value: String },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no uncensored sample")]
    NoUncensored,
    #[error("every feature column was constant after binarization")]
    DegenerateFeatures,
    #[error("inconsistent shapes: {0}")]
    ShapeMismatch(String),
    #[error("encoding override names unknown feature `{0}`")]
    UnknownOverride(String),
    #[error("feature `{feature}` is {found} but the encoding needs {expected}")]
    FeatureKind {
        feature: String,
        found: &'static str,
        expected: &'static str,
    },
}

/// Column name mapping for CSV input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time_column: "time".into(),
            event_column: "event".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawColumn {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl RawColumn {
    fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            RawColumn::Numeric(_) => "numeric",
            RawColumn::Categorical(_) => "categorical",
        }
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(rows.iter().map(|&r| v[r]).collect()),
            RawColumn::Categorical(v) => {
                RawColumn::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawFeature {
    pub name: String,
    pub column: RawColumn,
}

/// Untransformed survival data in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub features: Vec<RawFeature>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// Rows skipped because a feature cell was empty or `NA`.
    pub dropped_rows: Vec<usize>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?")
}

impl RawDataset {
    pub fn new(features: Vec<RawFeature>, times: Vec<f64>, events: Vec<bool>) -> Result<Self, DataError> {
        if times.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        if times.len() != events.len() || features.iter().any(|f| f.column.len() != times.len()) {
            return Err(DataError::ShapeMismatch("feature/time/event lengths differ".into()));
        }
        if let Some(row) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(DataError::NonPositiveTime { row: row + 1 });
        }
        if !events.iter().any(|&e| e) {
            return Err(DataError::NoUncensored);
        }
        Ok(Self {
            features,
            times,
            events,
            dropped_rows: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn feature(&self, name: &str) -> Option<&RawFeature> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Row subset (rows may repeat).
    pub fn select(&self, rows: &[usize]) -> Result<Self, DataError> {
        let features = self
            .features
            .iter()
            .map(|f| RawFeature {
                name: f.name.clone(),
                column: f.column.select(rows),
            })
            .collect();
        Self::new(
            features,
            rows.iter().map(|&r| self.times[r]).collect(),
            rows.iter().map(|&r| self.events[r]).collect(),
        )
    }

    pub fn from_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_owned()))
        };
        let time_col = find(&schema.time_column)?;
        let event_col = find(&schema.event_column)?;
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != time_col && c != event_col).collect();

        let mut cells: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut dropped_rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let row = r + 1;
            let time_cell = record.get(time_col).unwrap_or("");
            let time: f64 = time_cell.parse().map_err(|_| DataError::UnparseableTime {
                row,
                value: time_cell.to_owned(),
            })?;
            if !(time.is_finite() && time > 0.0) {
                return Err(DataError::NonPositiveTime { row });
            }
            let event = match record.get(event_col).unwrap_or("") {
                "1" => true,
                "0" => false,
                other => {
                    return Err(DataError::UnparseableEvent {
                        row,
                        value: other.to_owned(),
                    })
                }
            };
            let values: Vec<&str> = feature_cols.iter().map(|&c| record.get(c).unwrap_or("")).collect();
            if values.iter().any(|v| is_missing(v)) {
                dropped_rows.push(row);
                continue;
            }
            for (slot, v) in cells.iter_mut().zip(values) {
                slot.push(v.to_owned());
            }
            times.push(time);
            events.push(event);
        }
        if !dropped_rows.is_empty() {
            log::warn!("dropped {} rows with missing feature values", dropped_rows.len());
        }

        let features = feature_cols
            .iter()
            .zip(cells)
            .map(|(&c, values)| {
                let parsed: Option<Vec<f64>> = values.iter().map(|v| v.parse::<f64>().ok()).collect();
                let column = match parsed {
                    Some(nums) if nums.iter().all(|x| x.is_finite()) => RawColumn::Numeric(nums),
                    _ => RawColumn::Categorical(values),
                };
                RawFeature {
                    name: header[c].clone(),
                    column,
                }
            })
            .collect();
        let mut raw = Self::new(features, times, events)?;
        raw.dropped_rows = dropped_rows;
        Ok(raw)
    }
}

/// Read a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawDataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    let raw = RawDataset::from_reader(file, schema)?;
    log::info!(
        "loaded {} rows, features: {}",
        raw.len(),
        raw.feature_names().join(",")
    );
    Ok(raw)
}

/// How one raw feature becomes binary columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// One `x <= midpoint` column per gap between consecutive distinct values.
    Thresholds,
    /// Equal-width bins over `[min, max]`, one-hot encoded.
    EqualWidth { bins: usize },
    /// One column per distinct level.
    OneHot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinarizeConfig {
    /// Encoding for numeric features without an override.
    pub numeric: Encoding,
    pub overrides: BTreeMap<String, Encoding>,
    /// Omit the first level/bin of every one-hot group.
    pub drop_first: bool,
}

impl Default for BinarizeConfig {
    fn default() -> Self {
        Self {
            numeric: Encoding::Thresholds,
            overrides: BTreeMap::new(),
            drop_first: false,
        }
    }
}

impl BinarizeConfig {
    pub fn equal_width(bins: usize) -> Self {
        Self {
            numeric: Encoding::EqualWidth { bins },
            ..Self::default()
        }
    }
}

/// Predicate producing one binary column from a raw feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ColumnRule {
    LessEq {
        source: String,
        threshold: f64,
    },
    Bin {
        source: String,
        min: f64,
        width: f64,
        bins: usize,
        index: usize,
    },
    Equals {
        source: String,
        level: String,
    },
}

impl ColumnRule {
    pub fn source(&self) -> &str {
        match self {
            ColumnRule::LessEq { source, .. } | ColumnRule::Bin { source, .. } | ColumnRule::Equals { source, .. } => {
                source
            }
        }
    }

    fn bin_of(x: f64, min: f64, width: f64, bins: usize) -> usize {
        if width <= 0.0 || x <= min {
            return 0;
        }
        (((x - min) / width).floor() as usize).min(bins - 1)
    }

    pub fn describe(&self) -> String {
        match self {
            ColumnRule::LessEq { source, threshold } => format!("{source}<={threshold}"),
            ColumnRule::Bin {
                source,
                min,
                width,
                bins,
                index,
            } => {
                let lo = min + width * *index as f64;
                let hi = min + width * (*index + 1) as f64;
                if index + 1 == *bins {
                    format!("{source} in [{lo}, {hi}]")
                } else {
                    format!("{source} in [{lo}, {hi})")
                }
            }
            ColumnRule::Equals { source, level } => format!("{source}={level}"),
        }
    }

    /// Evaluate the rule on every row of a raw feature column.
    pub fn apply(&self, column: &RawColumn) -> Result<Vec<bool>, DataError> {
        let kind_err = |expected| DataError::FeatureKind {
            feature: self.source().to_owned(),
            found: column.kind(),
            expected,
        };
        match (self, column) {
            (ColumnRule::LessEq { threshold, .. }, RawColumn::Numeric(v)) => Ok(v.iter().map(|x| x <= threshold).collect()),
            (
                ColumnRule::Bin {
                    min,
                    width,
                    bins,
                    index,
                    ..
                },
                RawColumn::Numeric(v),
            ) => Ok(v.iter().map(|&x| Self::bin_of(x, *min, *width, *bins) == *index).collect()),
            (ColumnRule::Equals { level, .. }, RawColumn::Categorical(v)) => Ok(v.iter().map(|x| x == level).collect()),
            (ColumnRule::Equals { level, .. }, RawColumn::Numeric(v)) => {
                let target: f64 = level.parse().map_err(|_| kind_err("categorical"))?;
                Ok(v.iter().map(|&x| x == target).collect())
            }
            (_, RawColumn::Categorical(_)) => Err(kind_err("numeric")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryColumn {
    pub name: String,
    pub rule: Option<ColumnRule>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnReport {
    pub index: usize,
    pub name: String,
    pub rule: ColumnRule,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeatureReport {
    pub source: String,
    pub encoding: Encoding,
    pub columns: Vec<ColumnReport>,
    /// Candidate columns removed as constant or redundant.
    pub dropped: Vec<String>,
}

/// JSON-serializable summary of a binarization run.
#[derive(Clone, Debug, Serialize)]
pub struct BinarizationReport {
    pub n_samples: usize,
    pub n_columns: usize,
    pub features: Vec<FeatureReport>,
    /// Earliest time at which the censoring curve reaches zero, if any; later
    /// intervals carry no survival-term weight.
    pub censoring_truncated_at: Option<f64>,
}

/// Fitted binarization: an ordered list of column rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binarizer {
    pub rules: Vec<ColumnRule>,
}

impl Binarizer {
    pub fn fit(raw: &RawDataset, config: &BinarizeConfig) -> Result<(Self, BinarizationReport), DataError> {
        for name in config.overrides.keys() {
            if raw.feature(name).is_none() {
                return Err(DataError::UnknownOverride(name.clone()));
            }
        }
        let n = raw.len();
        let mut rules = Vec::new();
        let mut seen: HashMap<Bitset, ()> = HashMap::new();
        let mut reports = Vec::new();
        for feature in &raw.features {
            let encoding = match (&feature.column, config.overrides.get(&feature.name)) {
                (_, Some(e)) => *e,
                (RawColumn::Numeric(_), None) => config.numeric,
                (RawColumn::Categorical(_), None) => Encoding::OneHot,
            };
            let candidates = candidate_rules(feature, encoding, config.drop_first)?;
            let mut report = FeatureReport {
                source: feature.name.clone(),
                encoding,
                columns: Vec::new(),
                dropped: Vec::new(),
            };
            if candidates.is_empty() {
                log::warn!("feature `{}` is constant and produces no columns", feature.name);
            }
            for rule in candidates {
                let bits = Bitset::from_bools(&rule.apply(&feature.column)?);
                let ones = bits.count();
                let complement = Bitset::full(n).and_not(&bits);
                if ones == 0 || ones == n || seen.contains_key(&bits) || seen.contains_key(&complement) {
                    report.dropped.push(rule.describe());
                    continue;
                }
                seen.insert(bits, ());
                report.columns.push(ColumnReport {
                    index: rules.len(),
                    name: rule.describe(),
                    rule: rule.clone(),
                });
                rules.push(rule);
            }
            reports.push(report);
        }
        if rules.is_empty() {
            return Err(DataError::DegenerateFeatures);
        }
        let report = BinarizationReport {
            n_samples: n,
            n_columns: rules.len(),
            features: reports,
            censoring_truncated_at: None,
        };
        Ok((Self { rules }, report))
    }

    /// Apply the fitted rules to a raw dataset; no column is dropped.
    pub fn transform(&self, raw: &RawDataset) -> Result<Vec<Bitset>, DataError> {
        self.rules
            .iter()
            .map(|rule| {
                let feature = raw
                    .feature(rule.source())
                    .ok_or_else(|| DataError::MissingColumn(rule.source().to_owned()))?;
                Ok(Bitset::from_bools(&rule.apply(&feature.column)?))
            })
            .collect()
    }

    pub fn columns(&self) -> Vec<BinaryColumn> {
        self.rules
            .iter()
            .map(|r| BinaryColumn {
                name: r.describe(),
                rule: Some(r.clone()),
            })
            .collect()
    }

    /// Build the binary dataset for `raw` under these rules.
    pub fn dataset<T: Real>(&self, raw: &RawDataset) -> Result<BinaryDataset<T>, DataError> {
        let columns = self.transform(raw)?;
        let times = raw.times.iter().map(|&t| T::lit(t)).collect();
        BinaryDataset::new(columns, self.columns(), times, raw.events.clone())
    }
}

fn candidate_rules(feature: &RawFeature, encoding: Encoding, drop_first: bool) -> Result<Vec<ColumnRule>, DataError> {
    let source = feature.name.clone();
    let skip = usize::from(drop_first);
    match (encoding, &feature.column) {
        (Encoding::Thresholds, RawColumn::Numeric(values)) => {
            let distinct = distinct_sorted(values);
            Ok(distinct
                .windows(2)
                .map(|w| ColumnRule::LessEq {
                    source: source.clone(),
                    threshold: (w[0] + w[1]) / 2.0,
                })
                .collect())
        }
        (Encoding::EqualWidth { bins }, RawColumn::Numeric(values)) => {
            let bins = bins.max(1);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(max > min) {
                return Ok(Vec::new());
            }
            let width = (max - min) / bins as f64;
            Ok((skip..bins)
                .map(|index| ColumnRule::Bin {
                    source: source.clone(),
                    min,
                    width,
                    bins,
                    index,
                })
                .collect())
        }
        (Encoding::OneHot, RawColumn::Categorical(values)) => {
            let levels: BTreeSet<&String> = values.iter().collect();
            Ok(levels
                .into_iter()
                .skip(skip)
                .map(|level| ColumnRule::Equals {
                    source: source.clone(),
                    level: level.clone(),
                })
                .collect())
        }
        (Encoding::OneHot, RawColumn::Numeric(values)) => Ok(distinct_sorted(values)
            .into_iter()
            .skip(skip)
            .map(|v| ColumnRule::Equals {
                source: source.clone(),
                level: v.to_string(),
            })
            .collect()),
        (_, RawColumn::Categorical(_)) => Err(DataError::FeatureKind {
            feature: source,
            found: "categorical",
            expected: "numeric",
        }),
    }
}

fn distinct_sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Binarize a raw dataset, dropping constant and redundant columns.
pub fn binarize<T: Real>(raw: &RawDataset, config: &BinarizeConfig) -> Result<(BinaryDataset<T>, BinarizationReport), DataError> {
    let (binarizer, mut report) = Binarizer::fit(raw, config)?;
    let dataset = binarizer.dataset::<T>(raw)?;
    report.censoring_truncated_at = dataset.grid.truncated_at().map(Real::as_f64);
    Ok((dataset, report))
}

/// Distinct observation times `t_1 < ... < t_K` and the pieces `[t_{k-1}, t_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub breakpoints: Vec<T>,
    pub interval_lengths: Vec<T>,
    pub y_max: T,
    /// `1 / G(t)` on each interval, zero where `G` has reached zero.
    pub inverse_censoring: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn truncated_at(&self) -> Option<T> {
        self.inverse_censoring
            .iter()
            .position(|w| *w == T::zero())
            .map(|k| if k == 0 { T::zero() } else { self.breakpoints[k - 1] })
    }

    /// Index of the first breakpoint `>= t`.
    pub fn index_of(&self, t: T) -> usize {
        self.breakpoints.partition_point(|&b| b < t)
    }
}

/// Censoring weights of one sample, stored compactly.
///
/// Interval `k` (the piece ending at `t_k`) has survival-term weight
/// `1/G(t_k-)` while `t_k <= y_i` and death-term weight `c_i / G(y_i-)` after.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightVector<T> {
    pub time_index: usize,
    pub death_weight: T,
}

impl<T: Real> WeightVector<T> {
    pub fn toward_one(&self, k: usize, grid: &TimeGrid<T>) -> T {
        if k <= self.time_index {
            grid.inverse_censoring[k]
        } else {
            T::zero()
        }
    }

    pub fn toward_zero(&self, k: usize) -> T {
        if k > self.time_index {
            self.death_weight
        } else {
            T::zero()
        }
    }

    pub fn dense(&self, grid: &TimeGrid<T>) -> (Vec<T>, Vec<T>) {
        (0..grid.len())
            .map(|k| (self.toward_one(k, grid), self.toward_zero(k)))
            .unzip()
    }
}

/// Samples sharing an identical binary feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentSet<T> {
    pub members: Vec<usize>,
    pub toward_one: Vec<T>,
    pub toward_zero: Vec<T>,
    pub equivalent_loss: T,
}

/// Binary feature matrix with every precomputed quantity the loss needs.
#[derive(Clone, Debug)]
pub struct BinaryDataset<T> {
    columns: Vec<Bitset>,
    feature_columns: Vec<BinaryColumn>,
    pub times: Vec<T>,
    pub events: Vec<bool>,
    pub grid: TimeGrid<T>,
    pub censoring: StepFunction<T>,
    pub weights: Vec<WeightVector<T>>,
    pub classes: Vec<EquivalentSet<T>>,
    class_of: Vec<usize>,
    normalizer: T,
}

impl<T: Real> BinaryDataset<T> {
    /// Assemble a dataset from binary columns (one bitset per feature).
    pub fn new(
        columns: Vec<Bitset>,
        feature_columns: Vec<BinaryColumn>,
        times: Vec<T>,
        events: Vec<bool>,
    ) -> Result<Self, DataError> {
        let n = times.len();
        if n == 0 {
            return Err(DataError::EmptyDataset);
        }
        if events.len() != n {
            return Err(DataError::ShapeMismatch("times and events differ in length".into()));
        }
        if columns.len() != feature_columns.len() || columns.iter().any(|c| c.capacity() != n) {
            return Err(DataError::ShapeMismatch("feature columns do not match sample count".into()));
        }
        if let Some(row) = times.iter().position(|t| !(t.is_finite() && *t > T::zero())) {
            return Err(DataError::NonPositiveTime { row: row + 1 });
        }
        if !events.iter().any(|&e| e) {
            return Err(DataError::NoUncensored);
        }

        let censoring = censoring_distribution(&times, &events);
        let grid = build_grid(&times, &censoring);
        let weights = times
            .iter()
            .zip(&events)
            .map(|(&t, &e)| {
                let g = censoring.eval_left(t);
                WeightVector {
                    time_index: grid.index_of(t),
                    death_weight: if e && g > T::zero() { g.recip() } else { T::zero() },
                }
            })
            .collect();
        let normalizer = (grid.y_max * T::from_count(n)).recip();

        let mut dataset = Self {
            columns,
            feature_columns,
            times,
            events,
            grid,
            censoring,
            weights,
            classes: Vec::new(),
            class_of: vec![0; n],
            normalizer,
        };
        let partition = equivalence_classes(&dataset.columns, n);
        dataset.classes = partition
            .into_iter()
            .map(|members| {
                let (toward_one, toward_zero) = dataset.aggregate(members.iter().copied());
                let equivalent_loss = survival::equivalent_loss_from_sums(&toward_one, &toward_zero, &dataset);
                EquivalentSet {
                    members,
                    toward_one,
                    toward_zero,
                    equivalent_loss,
                }
            })
            .collect();
        for (c, class) in dataset.classes.iter().enumerate() {
            for &i in &class.members {
                dataset.class_of[i] = c;
            }
        }
        Ok(dataset)
    }

    /// Convenience constructor from row-major boolean features.
    pub fn from_rows(rows: &[Vec<bool>], times: Vec<T>, events: Vec<bool>) -> Result<Self, DataError> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(DataError::ShapeMismatch("ragged feature rows".into()));
        }
        let columns = (0..m)
            .map(|j| Bitset::from_bools(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let names = (0..m)
            .map(|j| BinaryColumn {
                name: format!("x{j}"),
                rule: None,
            })
            .collect();
        Self::new(columns, names, times, events)
    }

    /// Rebuild on a row subset; rows may repeat (bootstrap). Censoring,
    /// grid and classes are recomputed on the subset.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, DataError> {
        let columns = self
            .columns
            .iter()
            .map(|c| Bitset::from_indices(rows.len(), rows.iter().enumerate().filter(|(_, &r)| c.contains(r)).map(|(p, _)| p)))
            .collect();
        Self::new(
            columns,
            self.feature_columns.clone(),
            rows.iter().map(|&r| self.times[r]).collect(),
            rows.iter().map(|&r| self.events[r]).collect(),
        )
    }

    pub fn n_samples(&self) -> usize {
        self.times.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &Bitset {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Bitset] {
        &self.columns
    }

    pub fn feature_columns(&self) -> &[BinaryColumn] {
        &self.feature_columns
    }

    pub fn feature_name(&self, j: usize) -> &str {
        &self.feature_columns[j].name
    }

    pub fn feature(&self, i: usize, j: usize) -> bool {
        self.columns[j].contains(i)
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        self.columns.iter().map(|c| c.contains(i)).collect()
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    /// `1 / (y_max * N)`.
    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn all_samples(&self) -> Bitset {
        Bitset::full(self.n_samples())
    }

    /// Interval-wise sums of the members' weight vectors.
    pub fn aggregate(&self, members: impl IntoIterator<Item = usize>) -> (Vec<T>, Vec<T>) {
        let k = self.grid.len();
        let mut alive = vec![0usize; k];
        let mut death = vec![T::zero(); k];
        for i in members {
            let w = &self.weights[i];
            alive[w.time_index] += 1;
            if w.time_index + 1 < k {
                death[w.time_index + 1] = death[w.time_index + 1] + w.death_weight;
            }
        }
        let mut toward_one = vec![T::zero(); k];
        let mut toward_zero = vec![T::zero(); k];
        let mut still_alive = 0;
        for idx in (0..k).rev() {
            still_alive += alive[idx];
            toward_one[idx] = T::from_count(still_alive) * self.grid.inverse_censoring[idx];
        }
        let mut running = T::zero();
        for idx in 0..k {
            running = running + death[idx];
            toward_zero[idx] = running;
        }
        (toward_one, toward_zero)
    }
}

/// Kaplan-Meier estimate of the censoring distribution (event indicator flipped).
pub fn censoring_distribution<T: Real>(times: &[T], events: &[bool]) -> StepFunction<T> {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    km_estimator(times, &flipped).expect("nonempty validated input")
}

fn build_grid<T: Real>(times: &[T], censoring: &StepFunction<T>) -> TimeGrid<T> {
    let mut breakpoints = times.to_vec();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    breakpoints.dedup();
    let mut prev = T::zero();
    let interval_lengths = breakpoints
        .iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect();
    let inverse_censoring = censoring
        .on_grid(&breakpoints)
        .into_iter()
        .map(|g| if g > T::zero() { g.recip() } else { T::zero() })
        .collect();
    TimeGrid {
        y_max: *breakpoints.last().expect("nonempty"),
        breakpoints,
        interval_lengths,
        inverse_censoring,
    }
}

/// Partition samples by identical feature vectors, ordered by smallest member.
pub fn equivalence_classes(columns: &[Bitset], n: usize) -> Vec<Vec<usize>> {
    let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let key: Vec<bool> = columns.iter().map(|c| c.contains(i)).collect();
        match index.get(&key) {
            Some(&c) => classes[c].push(i),
            None => {
                index.insert(key, classes.len());
                classes.push(vec![i]);
            }
        }
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "f1,time,event\n1,5,1\n2,3,0\n3,8,1\n2,1,1\n";

    fn schema() -> CsvSchema {
        CsvSchema::default()
    }

    #[test]
    fn loads_small_csv() {
        let raw = RawDataset::from_reader(CSV.as_bytes(), &schema()).unwrap();
        assert_eq!(raw.len(), 4);
        assert_eq!(raw.feature_names(), vec!["f1"]);
        assert_eq!(raw.events, vec![true, false, true, true]);
    }

    #[test]
    fn bad_event_is_reported_with_row() {
        let err = RawDataset::from_reader("f1,time,event\n1,5,1\n2,3,2\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, DataError::UnparseableEvent { row: 2, .. }), "{err}");
    }

    #[test]
    fn distinct_load_errors() {
        let missing = RawDataset::from_reader("f1,t,event\n1,5,1\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(missing, DataError::MissingColumn(c) if c == "time"));
        let bad_time = RawDataset::from_reader("f1,time,event\n1,x,1\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(bad_time, DataError::UnparseableTime { row: 1, .. }));
        let negative = RawDataset::from_reader("f1,time,event\n1,-2,1\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(negative, DataError::NonPositiveTime { row: 1 }));
        let empty = RawDataset::from_reader("f1,time,event\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(empty, DataError::EmptyDataset));
        let censored = RawDataset::from_reader("f1,time,event\n1,2,0\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(censored, DataError::NoUncensored));
        let nofile = load_csv("/nonexistent/file.csv", &schema()).unwrap_err();
        assert!(matches!(nofile, DataError::Io { .. }));
    }

    #[test]
    fn missing_rows_are_skipped() {
        let raw = RawDataset::from_reader("f1,time,event\n1,5,1\nNA,3,0\n3,8,1\n".as_bytes(), &schema()).unwrap();
        assert_eq!(raw.len(), 2);
        assert_eq!(raw.dropped_rows, vec![2]);
    }

    #[test]
    fn midpoint_thresholds() {
        let raw = RawDataset::new(
            vec![RawFeature {
                name: "x".into(),
                column: RawColumn::Numeric(vec![1.0, 2.0, 3.0, 2.0]),
            }],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, true, true, false],
        )
        .unwrap();
        let (ds, report) = binarize::<f64>(&raw, &BinarizeConfig::default()).unwrap();
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.feature_name(0), "x<=1.5");
        assert_eq!(ds.feature_name(1), "x<=2.5");
        assert_eq!(report.features[0].columns.len(), 2);
        assert_eq!(ds.row(1), vec![false, true]);
    }

    #[test]
    fn constant_features_are_degenerate() {
        let raw = RawDataset::new(
            vec![RawFeature {
                name: "x".into(),
                column: RawColumn::Numeric(vec![1.0, 1.0]),
            }],
            vec![1.0, 2.0],
            vec![true, false],
        )
        .unwrap();
        assert!(matches!(
            binarize::<f64>(&raw, &BinarizeConfig::default()),
            Err(DataError::DegenerateFeatures)
        ));
    }

    #[test]
    fn categorical_one_hot_drops_complements() {
        let raw = RawDataset::new(
            vec![RawFeature {
                name: "arm".into(),
                column: RawColumn::Categorical(vec!["a".into(), "b".into(), "a".into()]),
            }],
            vec![1.0, 2.0, 3.0],
            vec![true, true, false],
        )
        .unwrap();
        let (ds, report) = binarize::<f64>(&raw, &BinarizeConfig::default()).unwrap();
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.feature_name(0), "arm=a");
        assert_eq!(report.features[0].dropped, vec!["arm=b".to_owned()]);
    }

    #[test]
    fn equivalence_partition_examples() {
        let cols = vec![Bitset::from_bools(&[false, false, true])];
        assert_eq!(equivalence_classes(&cols, 3), vec![vec![0, 1], vec![2]]);
        let ident = vec![Bitset::from_bools(&[true, true, true])];
        assert_eq!(equivalence_classes(&ident, 3), vec![vec![0, 1, 2]]);
        let distinct = vec![Bitset::from_bools(&[true, false]), Bitset::from_bools(&[false, false])];
        assert_eq!(equivalence_classes(&distinct, 2), vec![vec![0], vec![1]]);
    }

    #[test]
    fn grid_lengths_sum_to_horizon() {
        let ds = BinaryDataset::<f64>::from_rows(
            &[vec![true], vec![false], vec![true], vec![false]],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, false, true, true],
        )
        .unwrap();
        let total: f64 = ds.grid.interval_lengths.iter().sum();
        assert_eq!(total, ds.grid.y_max);
        assert_eq!(ds.grid.breakpoints, vec![1.0, 2.0, 3.0, 4.0]);
        // censoring curve drops to 2/3 at t=2
        assert!((ds.censoring.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ds.censoring.eval_left(2.0), 1.0);
        // sample 3 dies at t=4 (index 3); it has no death-term intervals
        assert_eq!(ds.weights[3].time_index, 3);
        assert!((ds.weights[2].death_weight - 1.5).abs() < 1e-15);
    }

    #[test]
    fn aggregate_matches_dense_weights() {
        let ds = BinaryDataset::<f64>::from_rows(
            &[vec![true], vec![false], vec![true], vec![false], vec![true]],
            vec![1.0, 2.0, 2.0, 4.0, 5.0],
            vec![true, false, true, true, false],
        )
        .unwrap();
        let members = [0, 2, 3, 4];
        let (a, b) = ds.aggregate(members);
        for k in 0..ds.grid.len() {
            let (mut sa, mut sb) = (0.0, 0.0);
            for &i in &members {
                let (one, zero) = ds.weights[i].dense(&ds.grid);
                sa += one[k];
                sb += zero[k];
            }
            assert!((a[k] - sa).abs() < 1e-14);
            assert!((b[k] - sb).abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_when_last_observation_censored() {
        let ds = BinaryDataset::<f64>::from_rows(
            &[vec![true], vec![false], vec![true]],
            vec![1.0, 2.0, 3.0],
            vec![true, false, false],
        )
        .unwrap();
        // G drops to zero at t=3; only the piece starting at 3 would be affected,
        // which lies beyond the grid.
        assert_eq!(ds.grid.truncated_at(), None);
        assert!(ds.grid.inverse_censoring.iter().all(|w| *w > 0.0));
    }
}
