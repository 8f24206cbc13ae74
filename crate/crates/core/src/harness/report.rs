use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Depth, Experiment, OutputFormat};
use crate::error::{Error, Result};
use crate::market::{SigmaChoice, TrainingCurve};
use crate::stats::{mean, one_sample_t_test, paired_t_test, sample_sd, TTest, Verdict};

pub const REPORT_COLUMNS: [&str; 10] = [
    "dataset",
    "N_train",
    "N_test",
    "F",
    "Y range",
    "RF",
    "DM",
    "GM",
    "annotations",
    "speedup",
];

const TIMING_COLUMNS: [&str; 8] = [
    "dataset",
    "eval_rows",
    "max_depth",
    "depth_cap",
    "runs",
    "full_ms",
    "capped_ms",
    "speedup",
];

/// Per-run test MSEs of one method and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Lowest test MSE over the epochs for markets, plain test MSE for RF.
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Test MSE after the last epoch (markets only).
    pub final_per_run: Option<Vec<f64>>,
    /// Test MSE per epoch averaged over runs; index 0 is before training.
    pub mean_curve: Option<Vec<f64>>,
    /// Paired test of this method against RF.
    pub vs_rf: Option<TTest>,
    /// Test against the published reference MSE.
    pub vs_reference: Option<TTest>,
}

impl MethodSummary {
    pub fn new(method: &str, per_run: Vec<f64>) -> MethodSummary {
        MethodSummary {
            method: method.to_string(),
            mean: mean(&per_run),
            sd: sample_sd(&per_run),
            per_run,
            final_per_run: None,
            mean_curve: None,
            vs_rf: None,
            vs_reference: None,
        }
    }

    pub fn from_curves(method: &str, curves: &[TrainingCurve]) -> MethodSummary {
        let mut summary = MethodSummary::new(method, curves.iter().map(|c| c.best_test().1).collect());
        summary.final_per_run = Some(curves.iter().map(TrainingCurve::final_test_mse).collect());
        let epochs = curves.first().map_or(0, |c| c.test_mse.len());
        let curve = (0..=epochs)
            .map(|e| {
                let at: Vec<f64> = curves
                    .iter()
                    .map(|c| if e == 0 { c.initial_test_mse } else { c.test_mse[e - 1] })
                    .collect();
                mean(&at)
            })
            .collect();
        summary.mean_curve = Some(curve);
        summary
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.sd / (self.per_run.len() as f64).sqrt()
    }

    fn marks(&self) -> String {
        let mut s = String::new();
        match self.vs_rf.map(|t| t.verdict) {
            Some(Verdict::FirstBetter) => s.push('•'),
            Some(Verdict::SecondBetter) => s.push('†'),
            _ => {}
        }
        match self.vs_reference.map(|t| t.verdict) {
            Some(Verdict::FirstBetter) => s.push('+'),
            Some(Verdict::SecondBetter) => s.push('-'),
            _ => {}
        }
        s
    }
}

/// Evaluation timings of the full-depth and capped forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub eval_rows: usize,
    /// Median wall time per run, in seconds.
    pub full_seconds: Vec<f64>,
    pub capped_seconds: Vec<f64>,
    /// `mean(full) / mean(capped)`.
    pub speedup: f64,
}

/// Results of one dataset under one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub experiment: Experiment,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub y_range: (f64, f64),
    pub runs: usize,
    pub max_depth: Depth,
    pub depth_cap: Depth,
    pub eta: f64,
    pub sigma: Option<SigmaChoice>,
    pub reference_mse: Option<f64>,
    pub alpha: f64,
    pub rf: MethodSummary,
    pub dm: Option<MethodSummary>,
    pub gm: Option<MethodSummary>,
    /// Per-run training curves, DM then GM.
    pub dm_curves: Vec<TrainingCurve>,
    pub gm_curves: Vec<TrainingCurve>,
    /// Wall-clock measurements; kept out of the serialized report so that
    /// it is reproducible byte for byte.
    #[serde(skip)]
    pub timing: Option<Timing>,
}

impl DatasetReport {
    pub fn methods(&self) -> impl Iterator<Item = &MethodSummary> {
        std::iter::once(&self.rf).chain(self.dm.as_ref()).chain(self.gm.as_ref())
    }

    /// Fills in the significance tests; needs at least two runs.
    pub fn annotate(&mut self) -> Result<()> {
        if self.runs < 2 {
            return Ok(());
        }
        let rf = self.rf.per_run.clone();
        for m in [self.dm.as_mut(), self.gm.as_mut()].into_iter().flatten() {
            m.vs_rf = Some(paired_t_test(&m.per_run, &rf, self.alpha)?);
        }
        if let Some(reference) = self.reference_mse {
            let alpha = self.alpha;
            for m in std::iter::once(&mut self.rf).chain(self.dm.as_mut()).chain(self.gm.as_mut()) {
                m.vs_reference = Some(one_sample_t_test(&m.per_run, reference, alpha)?);
            }
        }
        Ok(())
    }

    fn annotation(&self) -> String {
        self.methods()
            .filter_map(|m| {
                let marks = m.marks();
                (!marks.is_empty()).then(|| format!("{}{}", m.method, marks))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn row(&self) -> Vec<String> {
        let cell = |m: Option<&MethodSummary>| m.map_or_else(String::new, |m| format!("{:.3}", m.mean));
        vec![
            self.dataset.clone(),
            self.n_train.to_string(),
            self.n_test.to_string(),
            self.n_features.to_string(),
            format!("[{}, {}]", short(self.y_range.0), short(self.y_range.1)),
            cell(Some(&self.rf)),
            cell(self.dm.as_ref()),
            cell(self.gm.as_ref()),
            self.annotation(),
            // timings live in the sidecar file
            String::new(),
        ]
    }
}

/// Shortest of the `{:.3}` rendering with trailing zeros removed.
fn short(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub datasets: Vec<DatasetReport>,
}

impl ExperimentReport {
    pub fn merge(mut self, other: ExperimentReport) -> ExperimentReport {
        self.datasets.extend(other.datasets);
        self
    }

    /// The result table. Identical reports render to identical bytes.
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        let rows: Vec<Vec<String>> = self.datasets.iter().map(DatasetReport::row).collect();
        render_table(&REPORT_COLUMNS, &rows, format)
    }

    /// Timing table, one row per dataset that was timed.
    pub fn render_timings(&self, format: OutputFormat) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .datasets
            .iter()
            .filter_map(|d| {
                let t = d.timing.as_ref()?;
                Some(vec![
                    d.dataset.clone(),
                    t.eval_rows.to_string(),
                    d.max_depth.to_string(),
                    d.depth_cap.to_string(),
                    t.full_seconds.len().to_string(),
                    format!("{:.4}", mean(&t.full_seconds) * 1e3),
                    format!("{:.4}", mean(&t.capped_seconds) * 1e3),
                    format!("{:.2}", t.speedup),
                ])
            })
            .collect();
        render_table(&TIMING_COLUMNS, &rows, format)
    }

    pub fn has_timings(&self) -> bool {
        self.datasets.iter().any(|d| d.timing.is_some())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn render_table(header: &[&str], rows: &[Vec<String>], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
        }
        OutputFormat::Markdown => {
            let mut s = String::new();
            let line = |s: &mut String, cells: &[&str]| {
                let _ = writeln!(s, "| {} |", cells.join(" | "));
            };
            line(&mut s, header);
            line(&mut s, &vec!["---"; header.len()]);
            for row in rows {
                let cells: Vec<&str> = row.iter().map(|c| c.as_str()).collect();
                line(&mut s, &cells);
            }
            Ok(s)
        }
    }
}

/// Path of the timing sidecar for a report written to `path`.
pub fn timings_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.timings.{}", ext.to_string_lossy()),
        None => format!("{stem}.timings"),
    };
    path.with_file_name(name)
}

/// Writes the result table to `path`, plus a timing sidecar next to it when
/// the report carries timings.
pub fn emit_report(report: &ExperimentReport, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.render(format)?).map_err(|e| Error::io(path, e))?;
    if report.has_timings() {
        let side = timings_path(path);
        std::fs::write(&side, report.render_timings(format)?).map_err(|e| Error::io(&side, e))?;
    }
    Ok(())
}
