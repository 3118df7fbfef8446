//! Sweep the penalty on the veterans lung cancer data at depth 5.
//!
//! cargo run --release -p survtree-core --example veterans [path]

use std::collections::BTreeMap;
use std::time::Instant;

use survtree::metrics::ibs_ratio;
use survtree::{binarize, load_csv, solve, BinarizeConfig, BoundConfig, CsvSchema, Dataset, Encoding, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/veterans.csv".into());
    let schema = CsvSchema {
        time_column: "time".into(),
        event_column: "status".into(),
    };
    let raw = load_csv(&path, &schema)?;
    let overrides: BTreeMap<String, Encoding> = ["age", "karnofsky", "months"]
        .into_iter()
        .map(|f| (f.to_owned(), Encoding::EqualWidth { bins: 4 }))
        .collect();
    let config = BinarizeConfig {
        numeric: Encoding::OneHot,
        overrides,
        drop_first: true,
    };
    let (ds, report): (Dataset, _) = binarize(&raw, &config)?;
    println!("{} samples, {} binary features", report.n_samples, report.n_columns);
    for lambda in [0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005] {
        let start = Instant::now();
        let result = solve(&ds, &BoundConfig::new(lambda, Some(5)), SolverOptions::default())?;
        println!(
            "lambda {lambda:<7} leaves {:>2} ibs_ratio {:.4} optimal {} iterations {:>8} graph {:>8} {:.2?}",
            result.tree.leaf_count(),
            ibs_ratio(&result.tree, &ds)?,
            result.proven_optimal,
            result.stats.iterations,
            result.stats.graph_size,
            start.elapsed()
        );
    }
    Ok(())
}
