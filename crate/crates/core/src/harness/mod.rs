//! Experiment runner: repeated train/test runs of the forest baseline and
//! the delta and Gaussian markets, aggregated into annotated tables.
//!
//! Every run draws its split and forest from streams keyed by the master
//! seed and the run index, so runs execute on a worker pool in any order
//! and the report is reproducible byte for byte.

mod config;
mod report;

use std::borrow::Cow;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    parse_alpha_grid, DataSource, Depth, Experiment, ExperimentConfig, KernelChoice, OutputFormat, CONFIG_KEYS,
};
pub use report::{emit_report, timings_path, DatasetReport, ExperimentReport, MethodSummary, Timing, REPORT_COLUMNS};

use crate::dataset::{generate_friedman, load_csv, random_split, Dataset};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::market::{select_sigma, Kernel, Market, SigmaChoice, SigmaSearch, TrainingCurve};
use crate::seed::{derive_seed, rng_from, TAG_FOREST, TAG_FRIEDMAN, TAG_SIGMA, TAG_SPLIT};
use crate::stats::mse;

const TIMING_REPS: usize = 5;

/// Where each run's train and test sets come from.
#[derive(Debug, Clone)]
pub enum RunData {
    /// Split anew every run.
    Pool(Dataset),
    /// The same sets every run; only the forest varies.
    Fixed { train: Dataset, test: Dataset },
}

impl RunData {
    pub fn load(config: &ExperimentConfig) -> Result<RunData> {
        let data = config.data.as_ref().ok_or_else(|| Error::param("no data source given"))?;
        let name = config.dataset_name();
        Ok(match data {
            DataSource::Friedman(f) => RunData::Fixed {
                train: generate_friedman(*f, config.n_train, &mut rng_from(config.seed, &[TAG_FRIEDMAN, 0]))?
                    .with_name(name.clone()),
                test: generate_friedman(*f, config.n_test, &mut rng_from(config.seed, &[TAG_FRIEDMAN, 1]))?
                    .with_name(name),
            },
            DataSource::Csv(path) => {
                let target = config.target_column()?;
                let train = load_csv(path, &target, config.delimiter)?.with_name(name.clone());
                match &config.test_data {
                    None => RunData::Pool(train),
                    Some(test_path) => {
                        let test = load_csv(test_path, &target, config.delimiter)?.with_name(name);
                        if test.n_features() != train.n_features() {
                            return Err(Error::DimensionMismatch {
                                expected: train.n_features(),
                                actual: test.n_features(),
                            });
                        }
                        RunData::Fixed { train, test }
                    }
                }
            }
        })
    }

    /// Train and test sets of run `run`.
    pub fn split(&self, config: &ExperimentConfig, run: usize) -> Result<(Cow<'_, Dataset>, Cow<'_, Dataset>)> {
        match self {
            RunData::Fixed { train, test } => Ok((Cow::Borrowed(train), Cow::Borrowed(test))),
            RunData::Pool(data) => {
                let mut rng = rng_from(config.seed, &[TAG_SPLIT, run as u64]);
                let (train, test) = random_split(data, config.test_fraction, &mut rng)?;
                Ok((Cow::Owned(train), Cow::Owned(test)))
            }
        }
    }

    fn n_features(&self) -> usize {
        match self {
            RunData::Pool(d) => d.n_features(),
            RunData::Fixed { train, .. } => train.n_features(),
        }
    }

    fn y_range(&self) -> (f64, f64) {
        match self {
            RunData::Pool(d) => d.response_range(),
            RunData::Fixed { train, test } => {
                let (a, b) = (train.response_range(), test.response_range());
                (a.0.min(b.0), a.1.max(b.1))
            }
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rf: f64,
    pub dm: Option<TrainingCurve>,
    pub gm: Option<TrainingCurve>,
}

fn grow_for_run(config: &ExperimentConfig, train: &Dataset, run: usize) -> Result<Forest> {
    Forest::grow(train, &config.forest_params(derive_seed(config.seed, &[TAG_FOREST, run as u64])))
}

/// Chooses the Gaussian bandwidth by cross-validation on the first run's
/// training set.
pub fn choose_sigma(config: &ExperimentConfig, data: &RunData) -> Result<SigmaChoice> {
    let (train, _) = data.split(config, 0)?;
    let search = SigmaSearch {
        alpha_grid: config.alpha_grid.clone(),
        folds: config.cv_folds,
        epochs: config.epochs,
        quad_points: config.quad_points,
        eta: config.eta,
        depth_cap: config.depth_cap().as_cap(),
    };
    select_sigma(&train, &config.forest_params(0), &search, &mut rng_from(config.seed, &[TAG_SIGMA]))
}

/// Executes a single run: grow the forest, score it, train the markets.
pub fn execute_run(config: &ExperimentConfig, data: &RunData, run: usize, sigma: Option<f64>) -> Result<RunRecord> {
    let (train, test) = data.split(config, run)?;
    let forest = grow_for_run(config, &train, run)?;
    let cap = config.depth_cap().as_cap();
    let rf = mse(&forest.predict_all(&test, cap), test.response())?;
    let eta = config.eta.resolve(train.n_rows());

    let train_market = |kernel: Kernel| -> Result<TrainingCurve> {
        Market::new(&forest, cap, eta, kernel)?.train_epochs(&train, &test, config.epochs)
    };
    let dm = config.kernel.delta().then(|| train_market(Kernel::Delta)).transpose()?;
    let gm = match sigma {
        Some(s) if config.kernel.gauss() => Some(train_market(Kernel::gaussian(s, config.quad_points)?)?),
        _ => None,
    };
    log::debug!("run {run}: rf {rf:.4}");
    Ok(RunRecord {
        run,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        rf,
        dm,
        gm,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param(format!("cannot start {jobs} workers: {e}")))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn time_predictions(forest: &Forest, data: &Dataset, cap: usize) -> f64 {
    let reps = (0..TIMING_REPS)
        .map(|_| {
            let start = Instant::now();
            let preds = forest.predict_all(data, cap);
            std::hint::black_box(preds);
            start.elapsed().as_secs_f64()
        })
        .collect();
    median(reps)
}

/// Times full-depth against capped evaluation on the larger of each run's
/// train and test sets. Runs serially on the calling thread; forests are
/// regrown from their run seeds.
pub fn measure_timings(config: &ExperimentConfig, data: &RunData) -> Result<Timing> {
    let cap = config.depth_cap().as_cap();
    let mut full = Vec::with_capacity(config.runs);
    let mut capped = Vec::with_capacity(config.runs);
    let mut eval_rows = 0;
    for run in 0..config.runs {
        let (train, test) = data.split(config, run).map_err(|e| run_error(run, e))?;
        let forest = grow_for_run(config, &train, run).map_err(|e| run_error(run, e))?;
        let eval = if train.n_rows() >= test.n_rows() { &train } else { &test };
        eval_rows = eval.n_rows();
        full.push(time_predictions(&forest, eval, usize::MAX));
        capped.push(time_predictions(&forest, eval, cap));
    }
    let speedup = crate::stats::mean(&full) / crate::stats::mean(&capped);
    Ok(Timing {
        eval_rows,
        full_seconds: full,
        capped_seconds: capped,
        speedup,
    })
}

fn run_error(run: usize, e: Error) -> Error {
    Error::Run {
        run,
        source: Box::new(e),
    }
}

/// Runs the configured experiment, dispatching on `config.experiment`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = RunData::load(config)?;
    let sigma = if config.kernel.gauss() {
        let choice = choose_sigma(config, &data)?;
        log::info!("sigma {:.6} (alpha {:?})", choice.sigma, choice.alpha);
        Some(choice)
    } else {
        None
    };

    let pool = thread_pool(config.jobs)?;
    let sigma_value = sigma.as_ref().map(|c| c.sigma);
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|run| execute_run(config, &data, run, sigma_value))
            .collect()
    });
    let mut records = Vec::with_capacity(config.runs);
    for (run, r) in results.into_iter().enumerate() {
        records.push(r.map_err(|e| run_error(run, e))?);
    }

    let dm_curves: Vec<TrainingCurve> = records.iter().filter_map(|r| r.dm.clone()).collect();
    let gm_curves: Vec<TrainingCurve> = records.iter().filter_map(|r| r.gm.clone()).collect();
    let first = &records[0];
    let mut report = DatasetReport {
        dataset: config.dataset_name(),
        experiment: config.experiment,
        n_train: first.n_train,
        n_test: first.n_test,
        n_features: data.n_features(),
        y_range: data.y_range(),
        runs: config.runs,
        max_depth: config.max_depth(),
        depth_cap: config.depth_cap(),
        eta: config.eta.resolve(first.n_train),
        sigma,
        reference_mse: config.reference_mse,
        alpha: config.alpha,
        rf: MethodSummary::new("RF", records.iter().map(|r| r.rf).collect()),
        dm: (!dm_curves.is_empty()).then(|| MethodSummary::from_curves("DM", &dm_curves)),
        gm: (!gm_curves.is_empty()).then(|| MethodSummary::from_curves("GM", &gm_curves)),
        dm_curves,
        gm_curves,
        timing: None,
    };
    report.annotate()?;
    if config.experiment == Experiment::Table2 {
        report.timing = Some(measure_timings(config, &data)?);
    }
    Ok(ExperimentReport {
        datasets: vec![report],
    })
}

/// Fully grown trees (unless `max-depth` says otherwise), markets over all
/// leaves.
pub fn run_table1(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(&ExperimentConfig {
        experiment: Experiment::Table1,
        ..config.clone()
    })
}

/// Depth-limited trees evaluated at a shallower cap, with timings.
pub fn run_table2(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment(&ExperimentConfig {
        experiment: Experiment::Table2,
        ..config.clone()
    })
}
