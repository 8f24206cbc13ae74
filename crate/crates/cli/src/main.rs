use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use regmarket::harness::{emit_report, run_experiment, timings_path, ExperimentConfig, ExperimentReport};

#[derive(Parser)]
#[command(name = "regmarket", version, about = "Regression prediction markets over random forest leaves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result table.
    Run(RunArgs),
}

/// Every option mirrors a config-file key of the same name and overrides it.
#[derive(Args, Default)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// table1 or table2.
    #[arg(long)]
    experiment: Option<String>,
    /// CSV path, or friedman1 / friedman2 / friedman3.
    #[arg(long)]
    data: Option<String>,
    /// Fixed test set; training then always uses all of --data.
    #[arg(long)]
    test_data: Option<String>,
    /// Response column, by header name or index.
    #[arg(long)]
    target: Option<String>,
    /// CSV field delimiter, e.g. "," or "tab".
    #[arg(long)]
    delimiter: Option<String>,
    /// Dataset name shown in the report.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    /// Synthetic training set size.
    #[arg(long)]
    n_train: Option<String>,
    /// Synthetic test set size.
    #[arg(long)]
    n_test: Option<String>,
    #[arg(long)]
    trees: Option<String>,
    /// Random features tried per node.
    #[arg(long)]
    candidates: Option<String>,
    /// Size of the per-forest random feature pool.
    #[arg(long)]
    pool: Option<String>,
    #[arg(long)]
    min_split: Option<String>,
    /// A depth or "unbounded".
    #[arg(long)]
    max_depth: Option<String>,
    /// Sample training rows with replacement per tree.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    bootstrap: Option<String>,
    /// Evaluation depth, a depth or "unbounded".
    #[arg(long)]
    depth_cap: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// delta, gauss or both.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    quad_points: Option<String>,
    /// start:step:end or a comma-separated list.
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    cv_folds: Option<String>,
    /// "auto" (10 / N_train) or a number.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Published MSE every method is tested against.
    #[arg(long)]
    reference_mse: Option<String>,
    /// Significance level of the annotations.
    #[arg(long)]
    alpha: Option<String>,
    /// Output path; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// csv or markdown.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs = [
            ("experiment", &self.experiment),
            ("data", &self.data),
            ("test-data", &self.test_data),
            ("target", &self.target),
            ("delimiter", &self.delimiter),
            ("name", &self.name),
            ("runs", &self.runs),
            ("test-fraction", &self.test_fraction),
            ("n-train", &self.n_train),
            ("n-test", &self.n_test),
            ("trees", &self.trees),
            ("candidates", &self.candidates),
            ("pool", &self.pool),
            ("min-split", &self.min_split),
            ("max-depth", &self.max_depth),
            ("bootstrap", &self.bootstrap),
            ("depth-cap", &self.depth_cap),
            ("epochs", &self.epochs),
            ("kernel", &self.kernel),
            ("quad-points", &self.quad_points),
            ("alpha-grid", &self.alpha_grid),
            ("cv-folds", &self.cv_folds),
            ("eta", &self.eta),
            ("seed", &self.seed),
            ("reference-mse", &self.reference_mse),
            ("alpha", &self.alpha),
            ("out", &self.out),
            ("format", &self.format),
            ("jobs", &self.jobs),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for (key, value) in self.overrides() {
            config.set(key, value).with_context(|| format!("--{key}"))?;
        }
        Ok(config)
    }
}

fn details_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.details.json"))
}

fn write_outputs(config: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    match &config.out {
        Some(out) => {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
            }
            emit_report(report, out, config.format)?;
            let details = details_path(out);
            std::fs::write(&details, report.to_json()?)
                .with_context(|| format!("cannot write {}", details.display()))?;
            eprintln!("wrote {}", out.display());
            if report.has_timings() {
                eprintln!("wrote {}", timings_path(out).display());
            }
        }
        None => {
            print!("{}", report.render(config.format)?);
            if report.has_timings() {
                println!();
                print!("{}", report.render_timings(config.format)?);
            }
        }
    }
    for d in &report.datasets {
        if let Some(t) = &d.timing {
            eprintln!("{}: speedup {:.2}", d.dataset, t.speedup);
        }
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let config = args.config()?;
    let report = run_experiment(&config)?;
    write_outputs(&config, &report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
