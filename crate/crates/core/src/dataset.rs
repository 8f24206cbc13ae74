//! Tabular regression data: CSV ingestion, Friedman synthetic generators
//! and seeded train/test splitting.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Feature matrix (row-major) plus a real-valued response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_names: Vec<String>,
    target_name: String,
    n_features: usize,
    features: Vec<f64>,
    response: Vec<f64>,
    response_range: (f64, f64),
}

impl Dataset {
    /// Builds a dataset from row vectors.
    pub fn from_rows(name: impl Into<String>, rows: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let names = (0..n_features).map(|j| format!("x{}", j + 1)).collect();
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for row in &rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    actual: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_parts(name.into(), names, "y".into(), n_features, features, response)
    }

    fn from_parts(
        name: String,
        feature_names: Vec<String>,
        target_name: String,
        n_features: usize,
        features: Vec<f64>,
        response: Vec<f64>,
    ) -> Result<Self> {
        if response.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if n_features == 0 {
            return Err(Error::param("dataset needs at least one feature column"));
        }
        if features.len() != response.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: response.len() * n_features,
                actual: features.len(),
            });
        }
        if features.iter().chain(&response).any(|v| !v.is_finite()) {
            return Err(Error::param("dataset contains non-finite values"));
        }
        let response_range = response
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
        Ok(Dataset {
            name,
            feature_names,
            target_name,
            n_features,
            features,
            response,
            response_range,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// `(min, max)` of the response.
    pub fn response_range(&self) -> (f64, f64) {
        self.response_range
    }

    pub fn response_span(&self) -> f64 {
        self.response_range.1 - self.response_range.0
    }

    /// Root mean square of the response, `sqrt(mean(y^2))`.
    pub fn response_rms(&self) -> f64 {
        let n = self.response.len() as f64;
        (self.response.iter().map(|y| y * y).sum::<f64>() / n).sqrt()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut response = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: self.n_rows(),
                    actual: i,
                });
            }
            features.extend_from_slice(self.row(i));
            response.push(self.response[i]);
        }
        Self::from_parts(
            self.name.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
            self.n_features,
            features,
            response,
        )
    }

    /// Concatenates the rows of `other` after those of `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: other.n_features,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut response = self.response.clone();
        response.extend_from_slice(&other.response);
        Self::from_parts(
            self.name.clone(),
            self.feature_names.clone(),
            self.target_name.clone(),
            self.n_features,
            features,
            response,
        )
    }

    /// Writes the dataset as CSV with the target as the last column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        writer.write_record(&header)?;
        for (row, y) in self.rows().zip(&self.response) {
            let record: Vec<String> = row.iter().chain(std::iter::once(y)).map(f64::to_string).collect();
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for TargetColumn {
    fn from(s: &str) -> Self {
        TargetColumn::Name(s.to_string())
    }
}

impl fmt::Display for TargetColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetColumn::Name(n) => write!(f, "{n:?}"),
            TargetColumn::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// Loads a headed CSV file. All non-target cells must be numeric; categorical
/// inputs are expected to be integer-coded beforehand.
///
/// A `TargetColumn::Name` that matches no header but parses as an integer is
/// treated as a column index.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, delimiter: u8) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let target_idx = match target {
        TargetColumn::Index(i) => Some(*i),
        TargetColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .or_else(|| name.parse::<usize>().ok()),
    }
    .filter(|&i| i < headers.len())
    .ok_or_else(|| Error::MissingTarget(target.to_string()))?;

    let n_features = headers.len() - 1;
    let mut features = Vec::new();
    let mut response = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // data rows are numbered from 1, the header is row 0
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::DimensionMismatch {
                expected: headers.len(),
                actual: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let column = &headers[c];
            if cell.is_empty() || cell == "?" || cell.eq_ignore_ascii_case("na") {
                return Err(Error::MissingValue {
                    row,
                    column: column.clone(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: column.clone(),
                value: cell.to_string(),
            })?;
            if c == target_idx {
                response.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if response.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut feature_names = headers.clone();
    let target_name = feature_names.remove(target_idx);
    Dataset::from_parts(name, feature_names, target_name, n_features, features, response)
}

/// Test-set fraction, run count and seed for repeated random splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub num_runs: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Number of test rows for a dataset of `n` rows: `floor(fraction * n)`,
    /// at least one.
    pub fn test_size(fraction: f64, n: usize) -> Result<usize> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidSplit(format!("test fraction {fraction} outside (0, 1)")));
        }
        let k = ((fraction * n as f64).floor() as usize).max(1);
        if k >= n {
            return Err(Error::InvalidSplit(format!(
                "fraction {fraction} of {n} rows leaves no training data"
            )));
        }
        Ok(k)
    }
}

/// Samples a test index set without replacement. Both returned index lists
/// are sorted, so each subset keeps the original row order.
pub fn split_indices<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = SplitSpec::test_size(fraction, n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut test = perm[..k].to_vec();
    let mut train = perm[k..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Splits `data` into `(train, test)` with `floor(fraction * N)` test rows.
pub fn random_split<R: Rng + ?Sized>(data: &Dataset, fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.n_rows(), fraction, rng)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

/// Friedman's synthetic regression benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Friedman {
    One,
    Two,
    Three,
}

impl Friedman {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Friedman::One),
            2 => Ok(Friedman::Two),
            3 => Ok(Friedman::Three),
            other => Err(Error::UnknownGenerator(format!("friedman{other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Friedman::One => "friedman1",
            Friedman::Two => "friedman2",
            Friedman::Three => "friedman3",
        }
    }

    pub fn n_features(self) -> usize {
        match self {
            Friedman::One => 10,
            Friedman::Two | Friedman::Three => 4,
        }
    }

    /// Standard deviation of the additive Gaussian noise. For friedman2/3
    /// this gives roughly a 3:1 signal-to-noise ratio.
    pub fn noise_sd(self) -> f64 {
        match self {
            Friedman::One => 1.0,
            Friedman::Two => 125.0,
            Friedman::Three => 0.1,
        }
    }

    /// Noise-free response.
    pub fn response(self, x: &[f64]) -> f64 {
        match self {
            Friedman::One => {
                10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5).powi(2)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            Friedman::Two => {
                let inner = x[1] * x[2] - 1.0 / (x[1] * x[3]);
                (x[0] * x[0] + inner * inner).sqrt()
            }
            Friedman::Three => ((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]).atan(),
        }
    }

    fn sample_inputs<R: Rng + ?Sized>(self, rng: &mut R) -> Vec<f64> {
        use std::f64::consts::PI;
        match self {
            Friedman::One => (0..10).map(|_| rng.random::<f64>()).collect(),
            Friedman::Two | Friedman::Three => vec![
                rng.random_range(0.0..100.0),
                rng.random_range(40.0 * PI..560.0 * PI),
                rng.random_range(0.0..1.0),
                rng.random_range(1.0..11.0),
            ],
        }
    }
}

impl FromStr for Friedman {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "friedman1" => Ok(Friedman::One),
            "friedman2" => Ok(Friedman::Two),
            "friedman3" => Ok(Friedman::Three),
            _ => Err(Error::UnknownGenerator(s.to_string())),
        }
    }
}

impl fmt::Display for Friedman {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Draws `n` rows from a Friedman generator, noise included.
pub fn generate_friedman<R: Rng + ?Sized>(which: Friedman, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let noise = Normal::new(0.0, which.noise_sd()).expect("positive noise sd");
    let mut rows = Vec::with_capacity(n);
    let mut response = Vec::with_capacity(n);
    for _ in 0..n {
        let x = which.sample_inputs(rng);
        response.push(which.response(&x) + noise.sample(rng));
        rows.push(x);
    }
    Dataset::from_rows(which.name(), rows, response)
}
