use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;
use survtree::dataset::Binarizer;
use survtree::metrics::ibs_ratio;
use survtree::reference::{export_losses, import_losses, ReferenceModel};
use survtree::solver::{greedy_tree, solve, SolveError, SolverOptions};
use survtree::{
    evaluate, fit_reference, load_csv, reference_losses, BinarizationReport, BinarizeConfig, BoundConfig, CsvSchema,
    Dataset, Encoding, ExportMeta, RawDataset, ReferenceConfig, Tree,
};

use crate::config::{BinarizeMode, ReferenceMode, RunConfig};

/// Failure classes, each mapped to its own exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    /// The search stopped at its time limit; artifacts were still written.
    Timeout,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Timeout => 2,
            Failure::Data(_) => 3,
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&PathBuf>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn schema(config: &RunConfig) -> CsvSchema {
    CsvSchema {
        time_column: config.time_col.clone(),
        event_column: config.event_col.clone(),
    }
}

fn load_raw(config: &RunConfig) -> Result<RawDataset, Failure> {
    let input = config.input.as_ref().ok_or_else(|| usage("missing --input"))?;
    load_csv(input, &schema(config)).map_err(data)
}

fn binarize_config(config: &RunConfig) -> BinarizeConfig {
    BinarizeConfig {
        numeric: match config.binarize {
            BinarizeMode::All => Encoding::Thresholds,
            BinarizeMode::Width(bins) => Encoding::EqualWidth { bins },
        },
        overrides: Default::default(),
        drop_first: !config.all_levels,
    }
}

fn load_dataset(config: &RunConfig) -> Result<(Dataset, BinarizationReport), Failure> {
    let raw = load_raw(config)?;
    survtree::binarize(&raw, &binarize_config(config)).map_err(data)
}

fn bound_config(config: &RunConfig, lambda: f64, depth: usize) -> BoundConfig<f64> {
    BoundConfig::new(lambda, Some(depth)).with_min_leaf(config.min_leaf)
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions {
        schedule: config.schedule,
        time_limit: config.time_limit.map(Duration::from_secs_f64),
        ..SolverOptions::default()
    }
}

fn reference_config(config: &RunConfig, n_trees: usize, depth: usize) -> ReferenceConfig {
    ReferenceConfig {
        n_trees,
        max_depth: depth,
        seed: config.seed,
        ..ReferenceConfig::default()
    }
}

fn reference_for(config: &RunConfig, ds: &Dataset) -> Result<Option<Vec<f64>>, Failure> {
    match &config.reference {
        ReferenceMode::None => Ok(None),
        ReferenceMode::Fit { n_trees, depth } => {
            let model = fit_reference(ds, &reference_config(config, *n_trees, *depth)).map_err(data)?;
            reference_losses(&model, ds).map(Some).map_err(data)
        }
        ReferenceMode::File(path) => import_losses(path, ds.n_samples()).map(Some).map_err(data),
    }
}

fn solve_error(e: SolveError) -> Failure {
    match e {
        SolveError::Config(e) => usage(e),
        SolveError::TooFewSamples { .. } => data(e),
        SolveError::NodeLimit { .. } => Failure::Timeout,
    }
}

pub fn train(config: &RunConfig) -> Result<(), Failure> {
    let start = Instant::now();
    let (ds, report) = load_dataset(config)?;
    let reference_start = Instant::now();
    let reference = reference_for(config, &ds)?;
    let reference_time = reference_start.elapsed();
    let mut bounds = bound_config(config, config.lambda, config.max_depth);
    bounds.reference_losses = reference;
    let result = solve(&ds, &bounds, solver_options(config)).map_err(solve_error)?;
    let wall = start.elapsed();

    let meta = ExportMeta {
        proven_optimal: result.proven_optimal,
        gap: result.gap,
    };
    let tree_json = serde_json::to_string_pretty(&result.tree.to_json(meta)).expect("tree serializes") + "\n";
    emit(config.out_tree.as_ref(), &tree_json)?;
    if let Some(path) = &config.out_dot {
        write_file(path, &result.tree.to_dot())?;
    }
    let ratio = ibs_ratio(&result.tree, &ds).map_err(data)?;
    if let Some(path) = &config.out_report {
        let stats = json!({
            "objective": result.objective,
            "lower_bound": result.lower_bound,
            "upper_bound": result.upper_bound,
            "gap": result.gap,
            "proven_optimal": result.proven_optimal,
            "leaves": result.tree.leaf_count(),
            "train_ibs_ratio": ratio,
            "lambda": config.lambda,
            "depth": config.max_depth,
            "iterations": result.stats.iterations,
            "graph_size": result.stats.graph_size,
            "queue_pushes": result.stats.queue_pushes,
            "search_time_seconds": result.stats.elapsed.as_secs_f64(),
            "reference_time_seconds": reference_time.as_secs_f64(),
            "wall_time_seconds": wall.as_secs_f64(),
            "binarization": report,
            "config": config.to_text(),
        });
        write_file(path, &(serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n"))?;
    }
    eprintln!(
        "objective {:.6} leaves {} ibs_ratio {:.4} gap {:.3e} {} in {:.3}s",
        result.objective,
        result.tree.leaf_count(),
        ratio,
        result.gap,
        if result.proven_optimal { "optimal" } else { "time limit" },
        wall.as_secs_f64()
    );
    if result.proven_optimal {
        Ok(())
    } else {
        Err(Failure::Timeout)
    }
}

fn read_tree(path: &Path) -> Result<Tree, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    Tree::from_json(&value).map(|(t, _)| t).map_err(data)
}

/// Rebuild the tree's binarization and apply it to `--input`.
fn dataset_for_tree(tree: &Tree, config: &RunConfig) -> Result<Dataset, Failure> {
    let rules = tree
        .columns
        .iter()
        .map(|c| c.rule.clone().ok_or_else(|| data(format!("column `{}` has no binarization rule", c.name))))
        .collect::<Result<Vec<_>, _>>()?;
    let raw = load_raw(config)?;
    let ds = Binarizer { rules }.dataset(&raw).map_err(data)?;
    tree.check_compatible(&ds).map_err(data)?;
    Ok(ds)
}

pub fn evaluate_tree(tree_path: &Path, config: &RunConfig) -> Result<(), Failure> {
    let tree = read_tree(tree_path)?;
    let ds = dataset_for_tree(&tree, config)?;
    let report = evaluate(&tree, &ds).map_err(data)?;
    if let Some(path) = &config.out_report {
        write_file(path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    }
    let mut table = String::new();
    for (name, value) in [
        ("ibs", report.ibs),
        ("ibs_ratio", report.ibs_ratio),
        ("harrell_c", report.harrell_c),
        ("uno_c", report.uno_c),
        ("mean_auc", report.mean_auc),
    ] {
        writeln!(table, "{name:<10} {value:.6}").unwrap();
    }
    writeln!(table, "{:<10} {}", "leaves", report.leaf_count).unwrap();
    print!("{table}");
    Ok(())
}

pub fn export_dot(tree_path: &Path, config: &RunConfig) -> Result<(), Failure> {
    let tree = read_tree(tree_path)?;
    emit(config.out_dot.as_ref(), &tree.to_dot())
}

pub fn benchmark(config: &RunConfig, lambdas: &[f64], depths: &[usize], greedy: bool, out: Option<&PathBuf>) -> Result<(), Failure> {
    let (ds, _) = load_dataset(config)?;
    let mut csv = String::from("method,lambda,depth,leaves,train_ibs_ratio,objective,time\n");
    for &depth in depths {
        for &lambda in lambdas {
            let bounds = bound_config(config, lambda, depth);
            let start = Instant::now();
            let result = solve(&ds, &bounds, solver_options(config)).map_err(solve_error)?;
            let time = start.elapsed().as_secs_f64();
            if !result.proven_optimal {
                log::warn!("lambda {lambda} depth {depth} hit the time limit; row reports the incumbent");
            }
            let ratio = ibs_ratio(&result.tree, &ds).map_err(data)?;
            writeln!(csv, "osst,{lambda},{depth},{},{ratio},{},{time}", result.tree.leaf_count(), result.objective).unwrap();
            if greedy {
                let start = Instant::now();
                let tree = greedy_tree(&ds, &bounds);
                let time = start.elapsed().as_secs_f64();
                let ratio = ibs_ratio(&tree, &ds).map_err(data)?;
                writeln!(csv, "greedy,{lambda},{depth},{},{ratio},{},{time}", tree.leaf_count(), tree.objective).unwrap();
            }
        }
    }
    emit(out, &csv)
}

pub fn fit_reference_model(config: &RunConfig, out_losses: &Path, out_model: Option<&PathBuf>) -> Result<(), Failure> {
    let (ds, _) = load_dataset(config)?;
    let (n_trees, depth) = match config.reference {
        ReferenceMode::Fit { n_trees, depth } => (n_trees, depth),
        _ => {
            let d = ReferenceConfig::default();
            (d.n_trees, d.max_depth)
        }
    };
    let model: ReferenceModel<f64> = fit_reference(&ds, &reference_config(config, n_trees, depth)).map_err(data)?;
    let losses = reference_losses(&model, &ds).map_err(data)?;
    export_losses(&losses, out_losses).map_err(usage)?;
    if let Some(path) = out_model {
        write_file(path, &(serde_json::to_string(&model.to_json()).expect("model serializes") + "\n"))?;
    }
    eprintln!(
        "{} trees, mean per-sample loss {:.6e}",
        model.n_trees(),
        losses.iter().sum::<f64>() / losses.len() as f64
    );
    Ok(())
}
