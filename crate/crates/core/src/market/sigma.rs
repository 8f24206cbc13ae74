use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EtaRule, Kernel, Market};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{variance_floor, Forest, ForestParams, UNBOUNDED};

/// `{0.05, 0.10, ..., 1.00}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// Cross-validation setup for choosing the Gaussian kernel bandwidth
/// `sigma = alpha * sqrt(mean(y^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearch {
    pub alpha_grid: Vec<f64>,
    pub folds: usize,
    pub epochs: usize,
    pub quad_points: usize,
    pub eta: EtaRule,
    pub depth_cap: usize,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        SigmaSearch {
            alpha_grid: default_alpha_grid(),
            folds: 2,
            epochs: 50,
            quad_points: 5,
            eta: EtaRule::Auto,
            depth_cap: UNBOUNDED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: f64,
    pub sigma: f64,
    /// Held-out MSE averaged over folds.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaChoice {
    pub sigma: f64,
    /// `None` when the response is identically zero and the bandwidth fell
    /// back to the leaf variance floor.
    pub alpha: Option<f64>,
    pub scores: Vec<AlphaScore>,
}

/// Picks the bandwidth minimizing the fold-averaged held-out MSE of a
/// Gaussian-kernel market. Each fold grows one forest on the remaining
/// folds and scores every alpha on it, using the lowest held-out MSE over
/// the training epochs.
pub fn select_sigma<R: Rng + ?Sized>(
    train: &Dataset,
    forest_params: &ForestParams,
    search: &SigmaSearch,
    rng: &mut R,
) -> Result<SigmaChoice> {
    if search.alpha_grid.is_empty() {
        return Err(Error::param("alpha grid is empty"));
    }
    if let Some(a) = search.alpha_grid.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::param(format!("alpha {a} outside (0, 1]")));
    }
    let rms = train.response_rms();
    if rms == 0.0 {
        return Ok(SigmaChoice {
            sigma: variance_floor(train.response_span()).sqrt(),
            alpha: None,
            scores: Vec::new(),
        });
    }
    if search.alpha_grid.len() == 1 {
        let alpha = search.alpha_grid[0];
        return Ok(SigmaChoice {
            sigma: alpha * rms,
            alpha: Some(alpha),
            scores: Vec::new(),
        });
    }
    if search.folds < 2 {
        return Err(Error::param("cross-validation needs at least two folds"));
    }
    let n = train.n_rows();
    if n < search.folds * forest_params.min_split {
        return Err(Error::param(format!(
            "{n} rows are too few for {}-fold cross-validation",
            search.folds
        )));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut totals = vec![0.0; search.alpha_grid.len()];
    for fold in 0..search.folds {
        let mut held: Vec<usize> = perm.iter().skip(fold).step_by(search.folds).copied().collect();
        let mut rest: Vec<usize> = perm
            .iter()
            .enumerate()
            .filter(|(j, _)| j % search.folds != fold)
            .map(|(_, &i)| i)
            .collect();
        held.sort_unstable();
        rest.sort_unstable();
        let (fit, score) = (train.subset(&rest)?, train.subset(&held)?);

        let params = ForestParams {
            seed: rng.random(),
            ..forest_params.clone()
        };
        let forest = Forest::grow(&fit, &params)?;
        let eta = search.eta.resolve(fit.n_rows());
        for (total, &alpha) in totals.iter_mut().zip(&search.alpha_grid) {
            let kernel = Kernel::gaussian(alpha * rms, search.quad_points)?;
            let mut market = Market::new(&forest, search.depth_cap, eta, kernel)?;
            let curve = market.train_epochs(&fit, &score, search.epochs)?;
            *total += curve.best_test().1;
        }
    }

    let scores: Vec<AlphaScore> = search
        .alpha_grid
        .iter()
        .zip(&totals)
        .map(|(&alpha, &t)| AlphaScore {
            alpha,
            sigma: alpha * rms,
            mse: t / search.folds as f64,
        })
        .collect();
    let best = scores
        .iter()
        .fold(None::<&AlphaScore>, |b, s| match b {
            Some(b) if b.mse <= s.mse => Some(b),
            _ => Some(s),
        })
        .expect("nonempty grid");
    Ok(SigmaChoice {
        sigma: best.sigma,
        alpha: Some(best.alpha),
        scores,
    })
}
