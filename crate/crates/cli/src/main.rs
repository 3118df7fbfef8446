//! Command-line front end: train, evaluate and export survival trees.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "survtree", version, about = "Optimal sparse survival trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an optimal tree and write it as JSON (and optionally DOT and stats).
    Train(RunArgs),
    /// Score a saved tree on a dataset.
    Evaluate {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a saved tree as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        tree: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep lambda and depth, writing one CSV row per fitted tree.
    Benchmark {
        /// Comma-separated penalties.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.01,0.005,0.0025,0.001")]
        lambdas: Vec<f64>,
        /// Comma-separated depth limits.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        depths: Vec<usize>,
        /// Add a greedy row for every configuration.
        #[arg(long)]
        greedy: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit the bagged reference ensemble and export per-sample losses.
    FitReference {
        #[arg(long)]
        out_losses: PathBuf,
        #[arg(long)]
        out_model: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Settings shared by all commands; flags override `--config`.
#[derive(Args)]
struct RunArgs {
    /// Flat key=value file with any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    event_col: Option<String>,
    /// `all` or `width:K`.
    #[arg(long)]
    binarize: Option<String>,
    /// Keep the first level of every one-hot group.
    #[arg(long)]
    all_levels: bool,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    max_depth: Option<String>,
    #[arg(long)]
    min_leaf: Option<String>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<String>,
    /// `none`, `fit:N:D` or `file:PATH`.
    #[arg(long)]
    reference: Option<String>,
    /// `priority`, `lower-bound`, `fifo` or `lifo`.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    out_tree: Option<String>,
    #[arg(long)]
    out_dot: Option<String>,
    #[arg(long)]
    out_report: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        let flags = [
            ("input", &self.input),
            ("time-col", &self.time_col),
            ("event-col", &self.event_col),
            ("binarize", &self.binarize),
            ("lambda", &self.lambda),
            ("max-depth", &self.max_depth),
            ("min-leaf", &self.min_leaf),
            ("time-limit", &self.time_limit),
            ("reference", &self.reference),
            ("schedule", &self.schedule),
            ("out-tree", &self.out_tree),
            ("out-dot", &self.out_dot),
            ("out-report", &self.out_report),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, value).map_err(|e| Failure::Usage(e.to_string()))?;
            }
        }
        if self.all_levels {
            config.all_levels = true;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(run) => commands::train(&run.resolve()?),
        Command::Evaluate { tree, run } => commands::evaluate_tree(&tree, &run.resolve()?),
        Command::ExportDot { tree, run } => commands::export_dot(&tree, &run.resolve()?),
        Command::Benchmark {
            lambdas,
            depths,
            greedy,
            out,
            run,
        } => commands::benchmark(&run.resolve()?, &lambdas, &depths, greedy, out.as_ref()),
        Command::FitReference { out_losses, out_model, run } => {
            commands::fit_reference_model(&run.resolve()?, &out_losses, out_model.as_ref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Data(msg) => eprintln!("data error: {msg}"),
                Failure::Timeout => eprintln!("stopped at the time limit; wrote the best tree found"),
            }
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
