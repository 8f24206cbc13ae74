//! Error metric and the t-tests used to annotate result tables.
//!
//! All tests compare MSE-like quantities, so "better" means lower.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Mean squared error.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = predictions.iter().zip(truths).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(sum / truths.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`
/// degrees of freedom, via the regularized incomplete beta function.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(0.5 * df, 0.5, df / (df + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FirstBetter,
    SecondBetter,
    NoDifference,
}

impl Verdict {
    pub fn swapped(self) -> Verdict {
        match self {
            Verdict::FirstBetter => Verdict::SecondBetter,
            Verdict::SecondBetter => Verdict::FirstBetter,
            Verdict::NoDifference => Verdict::NoDifference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// Positive when the first argument has the larger mean.
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

impl TTest {
    fn from_difference(mean_diff: f64, se: f64, df: f64, alpha: f64) -> TTest {
        // a zero standard error is decided by the mean difference alone
        let (t, p_value) = if se > 0.0 {
            let t = mean_diff / se;
            (t, student_t_two_sided_p(t, df))
        } else if mean_diff == 0.0 {
            (0.0, 1.0)
        } else {
            (mean_diff.signum() * f64::INFINITY, 0.0)
        };
        let verdict = if p_value < alpha {
            if t < 0.0 {
                Verdict::FirstBetter
            } else {
                Verdict::SecondBetter
            }
        } else {
            Verdict::NoDifference
        };
        TTest { t, df, p_value, verdict }
    }

    pub fn significant(&self) -> bool {
        self.verdict != Verdict::NoDifference
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("significance level {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    check_alpha(alpha)?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::param("paired t-test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let se = sample_sd(&diffs) / (n as f64).sqrt();
    Ok(TTest::from_difference(mean(&diffs), se, (n - 1) as f64, alpha))
}

/// Mean, sample standard deviation and count of one side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        Summary {
            mean: mean(xs),
            sd: sample_sd(xs),
            n: xs.len(),
        }
    }

    /// A published single number with no reported spread.
    pub fn constant(value: f64) -> Summary {
        Summary {
            mean: value,
            sd: 0.0,
            n: 1,
        }
    }
}

/// Welch two-sample t-test from summary statistics. A side with zero
/// spread acts as a fixed constant, which reduces the test to a one-sample
/// t-test of the other side against it.
pub fn means_t_test(a: Summary, b: Summary, alpha: f64) -> Result<TTest> {
    check_alpha(alpha)?;
    for s in [a, b] {
        if s.n == 0 || s.sd < 0.0 || (s.sd > 0.0 && s.n < 2) {
            return Err(Error::param(format!("invalid summary {s:?}")));
        }
    }
    let va = a.sd * a.sd / a.n as f64;
    let vb = b.sd * b.sd / b.n as f64;
    let se = (va + vb).sqrt();
    let term = |v: f64, n: usize| if v > 0.0 { v * v / (n - 1) as f64 } else { 0.0 };
    let denom = term(va, a.n) + term(vb, b.n);
    let df = if denom > 0.0 { (va + vb) * (va + vb) / denom } else { f64::INFINITY };
    Ok(TTest::from_difference(a.mean - b.mean, se, df, alpha))
}

/// One-sample t-test of `sample` against a fixed value.
pub fn one_sample_t_test(sample: &[f64], constant: f64, alpha: f64) -> Result<TTest> {
    if sample.len() < 2 {
        return Err(Error::param("one-sample t-test needs at least two values"));
    }
    means_t_test(Summary::of(sample), Summary::constant(constant), alpha)
}
