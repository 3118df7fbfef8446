//! Flat `key=value` run configuration shared by every command.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use survtree::Schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinarizeMode {
    /// Every midpoint threshold of numeric features.
    All,
    /// Equal-width bins of numeric features.
    Width(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceMode {
    None,
    Fit { n_trees: usize, depth: usize },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub time_col: String,
    pub event_col: String,
    pub binarize: BinarizeMode,
    /// Keep every one-hot level instead of dropping the first.
    pub all_levels: bool,
    pub lambda: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub time_limit: Option<f64>,
    pub reference: ReferenceMode,
    pub schedule: Schedule,
    pub out_tree: Option<PathBuf>,
    pub out_dot: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            time_col: "time".into(),
            event_col: "event".into(),
            binarize: BinarizeMode::Width(4),
            all_levels: false,
            lambda: 0.01,
            max_depth: 5,
            min_leaf: 7,
            time_limit: None,
            reference: ReferenceMode::None,
            schedule: Schedule::Priority,
            out_tree: None,
            out_dot: None,
            out_report: None,
            seed: 2023,
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, value: &str) -> ConfigError {
    ConfigError(format!("invalid value `{value}` for `{key}`"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl FromStr for BinarizeMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        if s == "all" {
            return Ok(BinarizeMode::All);
        }
        match s.strip_prefix("width:").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 2 => Ok(BinarizeMode::Width(k)),
            _ => Err(bad("binarize", s)),
        }
    }
}

impl fmt::Display for BinarizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinarizeMode::All => f.write_str("all"),
            BinarizeMode::Width(k) => write!(f, "width:{k}"),
        }
    }
}

impl FromStr for ReferenceMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        if s == "none" {
            return Ok(ReferenceMode::None);
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(ReferenceMode::File(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("fit:") {
            if let Some((n, d)) = rest.split_once(':') {
                if let (Ok(n_trees), Ok(depth)) = (n.parse(), d.parse()) {
                    if n_trees > 0 && depth > 0 {
                        return Ok(ReferenceMode::Fit { n_trees, depth });
                    }
                }
            }
        }
        Err(bad("reference", s))
    }
}

impl fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceMode::None => f.write_str("none"),
            ReferenceMode::Fit { n_trees, depth } => write!(f, "fit:{n_trees}:{depth}"),
            ReferenceMode::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub fn parse_schedule(s: &str) -> Result<Schedule, ConfigError> {
    match s {
        "priority" => Ok(Schedule::Priority),
        "lower-bound" => Ok(Schedule::LowerBound),
        "fifo" => Ok(Schedule::Fifo),
        "lifo" => Ok(Schedule::Lifo),
        _ => Err(bad("schedule", s)),
    }
}

fn schedule_name(s: Schedule) -> &'static str {
    match s {
        Schedule::Priority => "priority",
        Schedule::LowerBound => "lower-bound",
        Schedule::Fifo => "fifo",
        Schedule::Lifo => "lifo",
    }
}

const KEYS: &[&str] = &[
    "input",
    "time-col",
    "event-col",
    "binarize",
    "all-levels",
    "lambda",
    "max-depth",
    "min-leaf",
    "time-limit",
    "reference",
    "schedule",
    "out-tree",
    "out-dot",
    "out-report",
    "seed",
];

impl RunConfig {
    /// Set one key; `_` and `-` are interchangeable in key names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "input" => self.input = optional_path(value),
            "time-col" => self.time_col = value.to_owned(),
            "event-col" => self.event_col = value.to_owned(),
            "binarize" => self.binarize = value.parse()?,
            "all-levels" => self.all_levels = parse(&key, value)?,
            "lambda" => self.lambda = parse(&key, value)?,
            "max-depth" => self.max_depth = parse(&key, value)?,
            "min-leaf" => self.min_leaf = parse(&key, value)?,
            "time-limit" => {
                self.time_limit = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse(&key, value)?)
                }
            }
            "reference" => self.reference = value.parse()?,
            "schedule" => self.schedule = parse_schedule(value)?,
            "out-tree" => self.out_tree = optional_path(value),
            "out-dot" => self.out_dot = optional_path(value),
            "out-report" => self.out_report = optional_path(value),
            "seed" => self.seed = parse(&key, value)?,
            _ => return Err(ConfigError(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a `key=value` document; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values = [
            path(&self.input),
            self.time_col.clone(),
            self.event_col.clone(),
            self.binarize.to_string(),
            self.all_levels.to_string(),
            self.lambda.to_string(),
            self.max_depth.to_string(),
            self.min_leaf.to_string(),
            self.time_limit.map_or("none".into(), |t| t.to_string()),
            self.reference.to_string(),
            schedule_name(self.schedule).into(),
            path(&self.out_tree),
            path(&self.out_dot),
            path(&self.out_report),
            self.seed.to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut config = RunConfig {
            input: Some("data/veterans.csv".into()),
            binarize: BinarizeMode::All,
            lambda: 0.0025,
            time_limit: Some(1.5),
            reference: ReferenceMode::Fit { n_trees: 10, depth: 4 },
            schedule: Schedule::Lifo,
            ..RunConfig::default()
        };
        config.out_dot = Some("t.dot".into());
        let mut back = RunConfig::default();
        back.apply_text(&config.to_text()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        let mut config = RunConfig::default();
        assert!(config.apply_text("lambda=0.1\ncolour=blue\n").is_err());
        assert!(config.apply_text("lambda 0.1").is_err());
        assert!(config.set("binarize", "width:1").is_err());
        assert!(config.set("reference", "fit:10").is_err());
        assert!(config.apply_text("# comment\n\nmax_depth = 3\n").is_ok());
        assert_eq!(config.max_depth, 3);
    }
}
