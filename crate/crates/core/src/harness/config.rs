use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Friedman, TargetColumn};
use crate::error::{Error, Result};
use crate::forest::{ForestParams, UNBOUNDED};
use crate::market::{default_alpha_grid, EtaRule};

/// Every key accepted in a config file, each also a CLI flag of the same name.
pub const CONFIG_KEYS: &[&str] = &[
    "experiment",
    "data",
    "test-data",
    "target",
    "delimiter",
    "name",
    "runs",
    "test-fraction",
    "n-train",
    "n-test",
    "trees",
    "candidates",
    "pool",
    "min-split",
    "max-depth",
    "bootstrap",
    "depth-cap",
    "epochs",
    "kernel",
    "quad-points",
    "alpha-grid",
    "cv-folds",
    "eta",
    "seed",
    "reference-mse",
    "alpha",
    "out",
    "format",
    "jobs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Fully grown trees, markets over their leaves.
    Table1,
    /// Depth-limited trees evaluated at a shallower cap, with timings.
    Table2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Csv(PathBuf),
    Friedman(Friedman),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Delta,
    Gauss,
    Both,
}

impl KernelChoice {
    pub fn delta(self) -> bool {
        matches!(self, KernelChoice::Delta | KernelChoice::Both)
    }

    pub fn gauss(self) -> bool {
        matches!(self, KernelChoice::Gauss | KernelChoice::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Markdown,
}

/// Tree depth setting: a finite limit or no limit at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Depth {
    Unbounded,
    Limit(usize),
}

impl Depth {
    pub fn as_cap(self) -> usize {
        match self {
            Depth::Unbounded => UNBOUNDED,
            Depth::Limit(d) => d,
        }
    }

    pub fn as_option(self) -> Option<usize> {
        match self {
            Depth::Unbounded => None,
            Depth::Limit(d) => Some(d),
        }
    }
}

impl FromStr for Depth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Depth> {
        match s {
            "unbounded" | "none" | "inf" => Ok(Depth::Unbounded),
            _ => s
                .parse()
                .map(Depth::Limit)
                .map_err(|_| Error::param(format!("depth {s:?} is neither a number nor \"unbounded\""))),
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Unbounded => f.write_str("unbounded"),
            Depth::Limit(d) => write!(f, "{d}"),
        }
    }
}

/// Full description of one experiment. Depth settings left unset take the
/// experiment's defaults: unbounded for `table1`, depth 10 capped at 5 for
/// `table2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub data: Option<DataSource>,
    pub test_data: Option<PathBuf>,
    pub target: Option<String>,
    pub delimiter: u8,
    pub name: Option<String>,
    pub runs: usize,
    pub test_fraction: f64,
    /// Sizes of the synthetic training and test sets.
    pub n_train: usize,
    pub n_test: usize,
    pub trees: usize,
    pub candidates: usize,
    pub pool: usize,
    pub min_split: usize,
    pub max_depth: Option<Depth>,
    pub bootstrap: bool,
    pub depth_cap: Option<Depth>,
    pub epochs: usize,
    pub kernel: KernelChoice,
    pub quad_points: usize,
    pub alpha_grid: Vec<f64>,
    pub cv_folds: usize,
    pub eta: EtaRule,
    pub seed: u64,
    /// Published MSE the methods are tested against.
    pub reference_mse: Option<f64>,
    /// Significance level of all annotations.
    pub alpha: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Table1,
            data: None,
            test_data: None,
            target: None,
            delimiter: b',',
            name: None,
            runs: 100,
            test_fraction: 0.1,
            n_train: 200,
            n_test: 2000,
            trees: 100,
            candidates: 25,
            pool: 1000,
            min_split: 5,
            max_depth: None,
            bootstrap: false,
            depth_cap: None,
            epochs: 50,
            kernel: KernelChoice::Both,
            quad_points: 5,
            alpha_grid: default_alpha_grid(),
            cv_folds: 2,
            eta: EtaRule::Auto,
            seed: 0,
            reference_mse: None,
            alpha: 0.01,
            out: None,
            format: OutputFormat::Csv,
            jobs: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::param(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

/// `start:step:end` (inclusive) or a comma-separated list.
pub fn parse_alpha_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::param(format!("alpha-grid: cannot parse {s:?}"));
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let grid = match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end): (f64, f64, f64) = (
                start.parse().map_err(|_| bad())?,
                step.parse().map_err(|_| bad())?,
                end.parse().map_err(|_| bad())?,
            );
            if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
                return Err(bad());
            }
            let count = ((end - start) / step + 1e-9).floor() as usize + 1;
            // rounding keeps 0.05:0.05:1.0 equal to k/20
            (0..count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [_] => s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    Ok(grid)
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => {
                self.experiment = match value {
                    "table1" => Experiment::Table1,
                    "table2" => Experiment::Table2,
                    _ => return Err(Error::param(format!("experiment: unknown {value:?}"))),
                }
            }
            "data" => {
                self.data = Some(match value.parse::<Friedman>() {
                    Ok(f) => DataSource::Friedman(f),
                    Err(_) => DataSource::Csv(PathBuf::from(value)),
                })
            }
            "test-data" => self.test_data = Some(PathBuf::from(value)),
            "target" => self.target = Some(value.to_string()),
            "delimiter" => {
                self.delimiter = match value {
                    "tab" | "\\t" => b'\t',
                    "space" => b' ',
                    v if v.len() == 1 => v.as_bytes()[0],
                    _ => return Err(Error::param(format!("delimiter: expected one byte, got {value:?}"))),
                }
            }
            "name" => self.name = Some(value.to_string()),
            "runs" => self.runs = parse(key, value)?,
            "test-fraction" => self.test_fraction = parse(key, value)?,
            "n-train" => self.n_train = parse(key, value)?,
            "n-test" => self.n_test = parse(key, value)?,
            "trees" => self.trees = parse(key, value)?,
            "candidates" => self.candidates = parse(key, value)?,
            "pool" => self.pool = parse(key, value)?,
            "min-split" => self.min_split = parse(key, value)?,
            "max-depth" => self.max_depth = Some(value.parse()?),
            "bootstrap" => self.bootstrap = parse_bool(key, value)?,
            "depth-cap" => self.depth_cap = Some(value.parse()?),
            "epochs" => self.epochs = parse(key, value)?,
            "kernel" => {
                self.kernel = match value {
                    "delta" => KernelChoice::Delta,
                    "gauss" | "gaussian" => KernelChoice::Gauss,
                    "both" => KernelChoice::Both,
                    _ => return Err(Error::param(format!("kernel: unknown {value:?}"))),
                }
            }
            "quad-points" => self.quad_points = parse(key, value)?,
            "alpha-grid" => self.alpha_grid = parse_alpha_grid(value)?,
            "cv-folds" => self.cv_folds = parse(key, value)?,
            "eta" => self.eta = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "reference-mse" => self.reference_mse = Some(parse(key, value)?),
            "alpha" => self.alpha = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "markdown" | "md" => OutputFormat::Markdown,
                    _ => return Err(Error::param(format!("format: unknown {value:?}"))),
                }
            }
            "jobs" => self.jobs = parse(key, value)?,
            _ => return Err(Error::param(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("config line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::param(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ExperimentConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn max_depth(&self) -> Depth {
        self.max_depth.unwrap_or(match self.experiment {
            Experiment::Table1 => Depth::Unbounded,
            Experiment::Table2 => Depth::Limit(10),
        })
    }

    pub fn depth_cap(&self) -> Depth {
        self.depth_cap.unwrap_or(match self.experiment {
            Experiment::Table1 => Depth::Unbounded,
            Experiment::Table2 => Depth::Limit(5),
        })
    }

    pub fn target_column(&self) -> Result<TargetColumn> {
        self.target
            .as_deref()
            .map(TargetColumn::from)
            .ok_or_else(|| Error::param("csv data needs a target column"))
    }

    /// Forest parameters for one run; the seed is filled in per run.
    pub fn forest_params(&self, seed: u64) -> ForestParams {
        ForestParams {
            trees: self.trees,
            candidates: self.candidates,
            pool_size: self.pool,
            min_split: self.min_split,
            max_depth: self.max_depth().as_option(),
            bootstrap: self.bootstrap,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let data = self.data.as_ref().ok_or_else(|| Error::param("no data source given"))?;
        if self.runs == 0 {
            return Err(Error::param("runs must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        match data {
            DataSource::Csv(_) => {
                self.target_column()?;
                if self.test_data.is_none() && !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
                    return Err(Error::InvalidSplit(format!(
                        "test fraction {} outside (0, 1)",
                        self.test_fraction
                    )));
                }
            }
            DataSource::Friedman(_) => {
                if self.test_data.is_some() {
                    return Err(Error::param("test-data cannot be combined with a synthetic source"));
                }
                if self.n_train == 0 || self.n_test == 0 {
                    return Err(Error::param("synthetic sets need n-train and n-test of at least 1"));
                }
            }
        }
        if self.quad_points == 0 || self.quad_points > crate::quadrature::MAX_POINTS {
            return Err(Error::param(format!("quad-points {} outside 1..=64", self.quad_points)));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::param("alpha-grid values must lie in (0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if let EtaRule::Fixed(eta) = self.eta {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(Error::param(format!("eta {eta} must be finite and non-negative")));
            }
        }
        if let (Depth::Limit(cap), Depth::Limit(max)) = (self.depth_cap(), self.max_depth()) {
            if cap > max {
                log::warn!("depth cap {cap} exceeds max depth {max} and has no effect");
            }
        }
        self.forest_params(self.seed).validate()
    }

    /// Display name of the dataset.
    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match &self.data {
            Some(DataSource::Friedman(f)) => f.name().to_string(),
            Some(DataSource::Csv(path)) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
            None => String::new(),
        }
    }
}
