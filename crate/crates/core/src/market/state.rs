use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Kernel, Market};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::quadrature::hermite_gauss;

const MARKET_FORMAT: &str = "regmarket-market";
const MARKET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum KernelSpec {
    Delta,
    Gaussian { sigma: f64, points: usize },
}

/// Serializable snapshot of a market: configuration, budgets and the
/// fingerprint of the forest it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    format: String,
    version: u32,
    pub forest_fingerprint: String,
    /// `None` for an unbounded depth cap.
    pub depth_cap: Option<usize>,
    pub eta: f64,
    kernel: KernelSpec,
    pub budgets: Vec<f64>,
}

impl MarketState {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MarketState> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let state: MarketState = serde_json::from_slice(&bytes)?;
        if state.format != MARKET_FORMAT || state.version != MARKET_VERSION {
            return Err(Error::Format(format!("{} v{}", state.format, state.version)));
        }
        Ok(state)
    }
}

impl<'f> Market<'f> {
    pub fn state(&self) -> MarketState {
        MarketState {
            format: MARKET_FORMAT.into(),
            version: MARKET_VERSION,
            forest_fingerprint: self.forest.fingerprint(),
            depth_cap: (self.depth_cap != usize::MAX).then_some(self.depth_cap),
            eta: self.eta,
            kernel: match &self.kernel {
                Kernel::Delta => KernelSpec::Delta,
                Kernel::Gaussian { sigma, rule } => KernelSpec::Gaussian {
                    sigma: *sigma,
                    points: rule.len(),
                },
            },
            budgets: self.budgets.clone(),
        }
    }

    /// Rebuilds a market from a snapshot; the forest must be the one the
    /// snapshot was taken on.
    pub fn from_state(forest: &'f Forest, state: &MarketState) -> Result<Market<'f>> {
        if forest.fingerprint() != state.forest_fingerprint {
            return Err(Error::Format("market state belongs to a different forest".into()));
        }
        let kernel = match state.kernel {
            KernelSpec::Delta => Kernel::Delta,
            KernelSpec::Gaussian { sigma, points } => Kernel::Gaussian {
                sigma,
                rule: hermite_gauss(points)?,
            },
        };
        let mut market = Market::new(forest, state.depth_cap.unwrap_or(usize::MAX), state.eta, kernel)?;
        market.set_budgets(state.budgets.clone())?;
        Ok(market)
    }
}
