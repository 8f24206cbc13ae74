//! Constant regression market over specialized tree-leaf participants.
//!
//! Every node that can terminate a route under the market's depth cap is a
//! participant with a budget. For an instance `x`, one participant per tree
//! is active. Each bets its whole budget as the Gaussian density of its
//! leaf, so the price is the budget-weighted mixture
//!
//! ```text
//! c(y|x) = sum_m w_m h_m(y|x),    w_m = beta_m / B,    B = sum over active beta_m
//! ```
//!
//! and the prediction is the mixture mean `sum_m w_m mean_m`. After seeing
//! the true response `y`, each active budget moves by
//! `eta * beta_m * (payoff_m - 1)` where the payoff is `h_m(y) / c(y)` for
//! the delta reward kernel and the Gaussian-smoothed ratio for the Gaussian
//! kernel. Payoffs average to one under the active weights, so every update
//! conserves the total budget.

mod sigma;
mod state;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Forest, GaussianLeaf};
use crate::quadrature::{hermite_gauss, QuadratureRule, MIN_DENSITY};
use crate::stats::mse;

pub use sigma::{default_alpha_grid, select_sigma, SigmaChoice, SigmaSearch};
pub use state::MarketState;

pub type ParticipantId = usize;

const NO_PARTICIPANT: u32 = u32::MAX;

/// Reward kernel `K(t; y)` paying participants for predictions near `y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// Dirac delta at the true response.
    Delta,
    /// Normal density with bandwidth `sigma` (response units), integrated
    /// by Hermite-Gauss quadrature.
    Gaussian { sigma: f64, rule: QuadratureRule },
}

impl Kernel {
    pub fn gaussian(sigma: f64, points: usize) -> Result<Kernel> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("kernel bandwidth {sigma} must be positive")));
        }
        Ok(Kernel::Gaussian {
            sigma,
            rule: hermite_gauss(points)?,
        })
    }
}

/// How the learning rate is chosen for a training set of `n` rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EtaRule {
    /// `10 / n`.
    Auto,
    Fixed(f64),
}

impl EtaRule {
    pub fn resolve(self, n_train: usize) -> f64 {
        match self {
            EtaRule::Auto => 10.0 / n_train as f64,
            EtaRule::Fixed(eta) => eta,
        }
    }
}

impl std::str::FromStr for EtaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(EtaRule::Auto);
        }
        s.parse::<f64>()
            .map(EtaRule::Fixed)
            .map_err(|_| Error::param(format!("learning rate {s:?} is neither 'auto' nor a number")))
    }
}

/// One active participant for a given instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveEntry {
    pub participant: ParticipantId,
    pub budget: f64,
    pub leaf: GaussianLeaf,
}

/// The participants that bet on one instance, one per tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    entries: Vec<ActiveEntry>,
}

impl ActiveSet {
    pub fn new(entries: Vec<ActiveEntry>) -> ActiveSet {
        ActiveSet { entries }
    }

    pub fn entries(&self) -> &[ActiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total active budget `B`.
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|e| e.budget).sum()
    }

    /// `ln c(y)`, evaluated with log-sum-exp over the mixture.
    pub fn log_price_density(&self, y: f64) -> f64 {
        let log_mass = self.mass().ln();
        log_sum_exp(self.entries.iter().map(|e| e.budget.ln() + e.leaf.log_density(y))) - log_mass
    }

    /// Price density `c(y) = sum_m w_m N(y; mean_m, var_m)`.
    pub fn price_density(&self, y: f64) -> f64 {
        self.log_price_density(y).exp()
    }

    /// Mean of the price density.
    pub fn predict(&self) -> f64 {
        let mass = self.mass();
        self.entries.iter().map(|e| e.budget * e.leaf.mean).sum::<f64>() / mass
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// Result of a single budget update.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    /// Budget changes of the active participants, in tree order.
    Applied(Vec<(ParticipantId, f64)>),
    /// The price at the true response underflowed; nothing changed.
    Skipped,
}

/// Per-epoch errors of a training run. Epoch `e` (1-based) is at index
/// `e - 1`; the `initial_*` fields hold the errors before any update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub initial_train_mse: f64,
    pub initial_test_mse: f64,
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<f64>,
    /// Delta updates skipped because the price underflowed.
    pub skipped: usize,
    /// Largest `|sum(beta) - start|` seen at an epoch boundary.
    pub max_budget_drift: f64,
}

impl TrainingCurve {
    pub fn final_test_mse(&self) -> f64 {
        *self.test_mse.last().expect("at least one epoch")
    }

    /// `(epoch, mse)` of the lowest test error over epochs `1..=E`; the
    /// earliest epoch wins ties.
    pub fn best_test(&self) -> (usize, f64) {
        self.test_mse
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &m)| if m < best.1 { (i + 1, m) } else { best })
    }
}

#[derive(Debug, Default, Clone)]
struct Scratch {
    ids: Vec<u32>,
    log_h: Vec<f64>,
    payoff: Vec<f64>,
}

/// A market bound to a grown forest. Updates are sequential; prediction
/// only reads.
#[derive(Debug, Clone)]
pub struct Market<'f> {
    forest: &'f Forest,
    depth_cap: usize,
    eta: f64,
    kernel: Kernel,
    budgets: Vec<f64>,
    leaves: Vec<GaussianLeaf>,
    owners: Vec<(usize, usize)>,
    lookup: Vec<Vec<u32>>,
    skipped: usize,
    scratch: Scratch,
}

impl<'f> Market<'f> {
    /// One participant per node that can end a route under `depth_cap`,
    /// with uniform budgets summing to one. A learning rate above one is
    /// clamped to one.
    pub fn new(forest: &'f Forest, depth_cap: usize, eta: f64, kernel: Kernel) -> Result<Self> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::param(format!("learning rate {eta} must be a nonnegative number")));
        }
        let eta = if eta > 1.0 {
            warn!("learning rate {eta} clamped to 1 to keep budgets nonnegative");
            1.0
        } else {
            eta
        };

        let mut leaves = Vec::new();
        let mut owners = Vec::new();
        let mut lookup = Vec::with_capacity(forest.trees().len());
        for (t, tree) in forest.trees().iter().enumerate() {
            let mut map = vec![NO_PARTICIPANT; tree.nodes().len()];
            for node in tree.terminal_nodes(depth_cap) {
                map[node] = u32::try_from(leaves.len()).map_err(|_| Error::param("too many participants"))?;
                leaves.push(tree.nodes()[node].stats);
                owners.push((t, node));
            }
            lookup.push(map);
        }
        let m = leaves.len();
        if m == 0 {
            return Err(Error::param("market has no participants"));
        }
        Ok(Market {
            forest,
            depth_cap,
            eta,
            kernel,
            budgets: vec![1.0 / m as f64; m],
            leaves,
            owners,
            lookup,
            skipped: 0,
            scratch: Scratch::default(),
        })
    }

    pub fn forest(&self) -> &'f Forest {
        self.forest
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn participants(&self) -> usize {
        self.budgets.len()
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn budget_sum(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// `(tree index, node index)` of a participant.
    pub fn owner(&self, id: ParticipantId) -> (usize, usize) {
        self.owners[id]
    }

    pub fn leaf(&self, id: ParticipantId) -> &GaussianLeaf {
        &self.leaves[id]
    }

    /// Delta updates skipped so far because the price underflowed.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub(crate) fn set_budgets(&mut self, budgets: Vec<f64>) -> Result<()> {
        if budgets.len() != self.budgets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.budgets.len(),
                actual: budgets.len(),
            });
        }
        if budgets.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return Err(Error::param("budgets must be finite and nonnegative"));
        }
        self.budgets = budgets;
        Ok(())
    }

    fn route_into(&self, x: &[f64], out: &mut Vec<u32>) {
        out.clear();
        out.extend(self.forest.trees().iter().zip(&self.lookup).map(|(tree, map)| {
            let id = map[tree.route(x, self.depth_cap)];
            debug_assert_ne!(id, NO_PARTICIPANT);
            id
        }));
    }

    /// Active participant of each tree for `x`.
    pub fn route(&self, x: &[f64]) -> Result<Vec<ParticipantId>> {
        self.forest.check_input(x)?;
        let mut ids = Vec::new();
        self.route_into(x, &mut ids);
        Ok(ids.into_iter().map(|i| i as usize).collect())
    }

    pub fn active_set(&self, x: &[f64]) -> Result<ActiveSet> {
        Ok(ActiveSet::new(
            self.route(x)?
                .into_iter()
                .map(|id| ActiveEntry {
                    participant: id,
                    budget: self.budgets[id],
                    leaf: self.leaves[id],
                })
                .collect(),
        ))
    }

    /// Routes every row of `data`, row-major with one id per tree.
    fn route_all(&self, data: &Dataset) -> Result<Vec<u32>> {
        if data.n_features() != self.forest.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.forest.n_inputs(),
                actual: data.n_features(),
            });
        }
        let mut all = Vec::with_capacity(data.n_rows() * self.forest.trees().len());
        let mut buf = Vec::new();
        for x in data.rows() {
            self.route_into(x, &mut buf);
            all.extend_from_slice(&buf);
        }
        Ok(all)
    }

    /// Budget-weighted mean of the active leaf means. Falls back to the
    /// unweighted mean if every active budget is zero.
    fn predict_ids(&self, ids: &[u32]) -> f64 {
        let (mut num, mut mass) = (0.0, 0.0);
        for &id in ids {
            let b = self.budgets[id as usize];
            num += b * self.leaves[id as usize].mean;
            mass += b;
        }
        if mass > 0.0 {
            num / mass
        } else {
            ids.iter().map(|&id| self.leaves[id as usize].mean).sum::<f64>() / ids.len() as f64
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forest.check_input(x)?;
        let mut ids = Vec::new();
        self.route_into(x, &mut ids);
        Ok(self.predict_ids(&ids))
    }

    pub fn predict_all(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// `ln c(t)` for the active ids given `log_h[k] = ln h_k(t)`; `None`
    /// when the price underflows [`MIN_DENSITY`].
    fn log_price(&self, ids: &[u32], log_h: &[f64], log_mass: f64) -> Option<f64> {
        let terms = ids.iter().zip(log_h).map(|(&id, &lh)| self.budgets[id as usize].ln() + lh);
        let log_c = log_sum_exp(terms) - log_mass;
        (log_c >= MIN_DENSITY.ln()).then_some(log_c)
    }

    /// Fills `scratch.payoff` with each active participant's payoff.
    /// Returns false when the instance must be skipped.
    fn payoffs(&mut self, y: f64) -> bool {
        let mut scratch = std::mem::take(&mut self.scratch);
        let ids = &scratch.ids;
        let mass: f64 = ids.iter().map(|&id| self.budgets[id as usize]).sum();
        if !(mass > 0.0) {
            self.scratch = scratch;
            return false;
        }
        let log_mass = mass.ln();
        scratch.log_h.resize(ids.len(), 0.0);
        scratch.payoff.clear();
        scratch.payoff.resize(ids.len(), 0.0);

        let ok = match &self.kernel {
            Kernel::Delta => {
                for (lh, &id) in scratch.log_h.iter_mut().zip(ids) {
                    *lh = self.leaves[id as usize].log_density(y);
                }
                match self.log_price(ids, &scratch.log_h, log_mass) {
                    Some(log_c) => {
                        for (p, lh) in scratch.payoff.iter_mut().zip(&scratch.log_h) {
                            *p = (lh - log_c).exp();
                        }
                        true
                    }
                    None => false,
                }
            }
            Kernel::Gaussian { sigma, rule } => {
                for (t, w) in rule.gaussian_points(y, *sigma) {
                    for (lh, &id) in scratch.log_h.iter_mut().zip(ids) {
                        *lh = self.leaves[id as usize].log_density(t);
                    }
                    match self.log_price(ids, &scratch.log_h, log_mass) {
                        Some(log_c) => {
                            for (p, lh) in scratch.payoff.iter_mut().zip(&scratch.log_h) {
                                *p += w * (lh - log_c).exp();
                            }
                        }
                        // neutral node: every participant gets ratio 1
                        None => scratch.payoff.iter_mut().for_each(|p| *p += w),
                    }
                }
                true
            }
        };
        self.scratch = scratch;
        ok
    }

    /// Applies the configured kernel's update for the routed instance in
    /// `scratch.ids`.
    fn update_routed(&mut self, y: f64) -> bool {
        if !self.payoffs(y) {
            self.skipped += 1;
            return false;
        }
        for (&id, &payoff) in self.scratch.ids.iter().zip(&self.scratch.payoff) {
            let b = &mut self.budgets[id as usize];
            *b += self.eta * *b * (payoff - 1.0);
        }
        true
    }

    fn update_with(&mut self, kernel: Option<Kernel>, x: &[f64], y: f64) -> Result<UpdateOutcome> {
        self.forest.check_input(x)?;
        let mut ids = std::mem::take(&mut self.scratch.ids);
        self.route_into(x, &mut ids);
        self.scratch.ids = ids;

        let saved = kernel.map(|k| std::mem::replace(&mut self.kernel, k));
        let before: Vec<f64> = self.scratch.ids.iter().map(|&id| self.budgets[id as usize]).collect();
        let applied = self.update_routed(y);
        if let Some(k) = saved {
            self.kernel = k;
        }
        if !applied {
            return Ok(UpdateOutcome::Skipped);
        }
        Ok(UpdateOutcome::Applied(
            self.scratch
                .ids
                .iter()
                .zip(before)
                .map(|(&id, b)| (id as usize, self.budgets[id as usize] - b))
                .collect(),
        ))
    }

    /// Update with the market's own kernel.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<UpdateOutcome> {
        self.update_with(None, x, y)
    }

    /// Delta-kernel update `beta_m += eta beta_m (h_m(y)/c(y) - 1)`,
    /// regardless of the configured kernel.
    pub fn delta_update(&mut self, x: &[f64], y: f64) -> Result<UpdateOutcome> {
        self.update_with(Some(Kernel::Delta), x, y)
    }

    /// Gaussian-kernel update with the given bandwidth and rule, regardless
    /// of the configured kernel.
    pub fn gaussian_update(&mut self, x: &[f64], y: f64, sigma: f64, rule: &QuadratureRule) -> Result<UpdateOutcome> {
        if !(sigma > 0.0) {
            return Err(Error::param(format!("kernel bandwidth {sigma} must be positive")));
        }
        self.update_with(
            Some(Kernel::Gaussian {
                sigma,
                rule: rule.clone(),
            }),
            x,
            y,
        )
    }

    /// Runs `epochs` passes over `train` in row order, recording train and
    /// test MSE after each pass.
    pub fn train_epochs(&mut self, train: &Dataset, test: &Dataset, epochs: usize) -> Result<TrainingCurve> {
        let order: Vec<usize> = (0..train.n_rows()).collect();
        self.train_epochs_in_order(train, test, epochs, &order)
    }

    /// Like [`train_epochs`](Self::train_epochs) with an explicit instance
    /// order, reused for every epoch.
    pub fn train_epochs_in_order(
        &mut self,
        train: &Dataset,
        test: &Dataset,
        epochs: usize,
        order: &[usize],
    ) -> Result<TrainingCurve> {
        if epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if let Some(&bad) = order.iter().find(|&&i| i >= train.n_rows()) {
            return Err(Error::DimensionMismatch {
                expected: train.n_rows(),
                actual: bad,
            });
        }
        let trees = self.forest.trees().len();
        let train_routes = self.route_all(train)?;
        let test_routes = self.route_all(test)?;
        let evaluate = |market: &Market, routes: &[u32], data: &Dataset| -> Result<f64> {
            let preds: Vec<f64> = routes.chunks_exact(trees).map(|ids| market.predict_ids(ids)).collect();
            mse(&preds, data.response())
        };

        let start_sum = self.budget_sum();
        let skipped_before = self.skipped;
        let mut curve = TrainingCurve {
            initial_train_mse: evaluate(self, &train_routes, train)?,
            initial_test_mse: evaluate(self, &test_routes, test)?,
            train_mse: Vec::with_capacity(epochs),
            test_mse: Vec::with_capacity(epochs),
            skipped: 0,
            max_budget_drift: 0.0,
        };
        for _ in 0..epochs {
            for &i in order {
                let mut ids = std::mem::take(&mut self.scratch.ids);
                ids.clear();
                ids.extend_from_slice(&train_routes[i * trees..(i + 1) * trees]);
                self.scratch.ids = ids;
                self.update_routed(train.response()[i]);
            }
            let drift = (self.budget_sum() - start_sum).abs();
            debug_assert!(drift <= 1e-9, "budget drift {drift}");
            curve.max_budget_drift = curve.max_budget_drift.max(drift);
            curve.train_mse.push(evaluate(self, &train_routes, train)?);
            curve.test_mse.push(evaluate(self, &test_routes, test)?);
        }
        curve.skipped = self.skipped - skipped_before;
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_friedman, Friedman};
    use crate::forest::{ForestParams, Tree, UNBOUNDED};
    use crate::seed::rng_from;
    use std::f64::consts::PI;

    fn leaf(mean: f64, variance: f64) -> GaussianLeaf {
        GaussianLeaf {
            mean,
            variance,
            count: 1,
            depth: 0,
        }
    }

    /// Forest of single-leaf trees: every participant is always active.
    fn stump_forest(leaves: &[GaussianLeaf]) -> Forest {
        Forest::from_trees(leaves.iter().map(|&l| Tree::leaf(l)).collect(), 1, 1e-6).unwrap()
    }

    fn normal_pdf(t: f64, mean: f64, var: f64) -> f64 {
        (-(t - mean) * (t - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    fn deltas(outcome: UpdateOutcome) -> Vec<f64> {
        match outcome {
            UpdateOutcome::Applied(d) => d.into_iter().map(|(_, v)| v).collect(),
            UpdateOutcome::Skipped => panic!("update skipped"),
        }
    }

    #[test]
    fn price_density_examples() {
        let one = ActiveSet::new(vec![ActiveEntry {
            participant: 0,
            budget: 1.0,
            leaf: leaf(0.0, 1.0),
        }]);
        assert!((one.price_density(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);

        let two = ActiveSet::new(vec![
            ActiveEntry {
                participant: 0,
                budget: 0.5,
                leaf: leaf(0.0, 1.0),
            },
            ActiveEntry {
                participant: 1,
                budget: 0.5,
                leaf: leaf(2.0, 1.0),
            },
        ]);
        assert!((two.price_density(0.0) - 0.226_466_623_457_310_4).abs() < 1e-15);
        assert!((two.price_density(1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(two.predict(), 1.0);
    }

    #[test]
    fn predict_examples() {
        let forest = stump_forest(&[leaf(0.0, 1.0), leaf(2.0, 1.0)]);
        let mut m = Market::new(&forest, UNBOUNDED, 0.1, Kernel::Delta).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 1.0);
        m.set_budgets(vec![0.9, 0.1]).unwrap();
        assert!((m.predict(&[0.0]).unwrap() - 0.2).abs() < 1e-15);

        let forest = stump_forest(&[leaf(3.5, 1.0)]);
        let m = Market::new(&forest, UNBOUNDED, 0.1, Kernel::Delta).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), 3.5);
        assert_eq!(m.participants(), 1);
        assert_eq!(m.budgets(), &[1.0]);
    }

    #[test]
    fn delta_update_two_participants() {
        let forest = stump_forest(&[leaf(0.0, 1.0), leaf(2.0, 1.0)]);
        let mut m = Market::new(&forest, UNBOUNDED, 0.1, Kernel::Delta).unwrap();
        m.delta_update(&[0.0], 0.0).unwrap();
        // independent evaluation of the update with scipy.stats.norm
        assert!((m.budgets()[0] - 0.538_079_707_797_788_2).abs() < 1e-12);
        assert!((m.budgets()[1] - 0.461_920_292_202_211_76).abs() < 1e-12);
        assert!((m.budget_sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_participant_is_unchanged() {
        let forest = stump_forest(&[leaf(1.0, 0.3)]);
        let mut m = Market::new(&forest, UNBOUNDED, 0.5, Kernel::gaussian(0.4, 5).unwrap()).unwrap();
        for y in [-3.0, 0.0, 1.0, 7.5] {
            assert_eq!(deltas(m.delta_update(&[0.0], y).unwrap()), vec![0.0]);
            let d = deltas(m.update(&[0.0], y).unwrap());
            assert!(d[0].abs() < 1e-15);
        }
    }

    #[test]
    fn identical_participants_are_unchanged() {
        let forest = stump_forest(&[leaf(1.0, 2.0), leaf(1.0, 2.0)]);
        let mut m = Market::new(&forest, UNBOUNDED, 0.5, Kernel::Delta).unwrap();
        let d = deltas(m.delta_update(&[0.0], 4.0).unwrap());
        assert!(d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn underflowing_price_skips_delta_update() {
        let forest = stump_forest(&[leaf(0.0, 1e-6), leaf(0.1, 1e-6)]);
        let mut m = Market::new(&forest, UNBOUNDED, 0.5, Kernel::Delta).unwrap();
        assert_eq!(m.delta_update(&[0.0], 100.0).unwrap(), UpdateOutcome::Skipped);
        assert_eq!(m.skipped(), 1);
        assert_eq!(m.budgets(), &[0.5, 0.5]);
        // the gaussian update stays neutral instead of skipping
        let d = deltas(m.gaussian_update(&[0.0], 100.0, 0.01, &hermite_gauss(5).unwrap()).unwrap());
        assert!(d.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gaussian_update_matches_trapezoid() {
        let leaves = [leaf(0.0, 1.0), leaf(2.0, 1.0)];
        let forest = stump_forest(&leaves);
        let mut m = Market::new(&forest, UNBOUNDED, 0.1, Kernel::Delta).unwrap();
        let sigma = 0.5;
        let d = deltas(m.gaussian_update(&[0.0], 0.0, sigma, &hermite_gauss(5).unwrap()).unwrap());

        let c = |t: f64| 0.5 * normal_pdf(t, 0.0, 1.0) + 0.5 * normal_pdf(t, 2.0, 1.0);
        let (a, b, n) = (-8.0, 10.0, 1_000_000usize);
        let h = (b - a) / n as f64;
        for (k, l) in leaves.iter().enumerate() {
            let g = |t: f64| normal_pdf(t, 0.0, sigma * sigma) * normal_pdf(t, l.mean, l.variance) / c(t);
            let mut integral = 0.5 * (g(a) + g(b));
            for i in 1..n {
                integral += g(a + i as f64 * h);
            }
            integral *= h;
            let oracle = 0.1 * 0.5 * (integral - 1.0);
            assert!((d[k] - oracle).abs() < 5e-3, "{} vs {}", d[k], oracle);
        }
    }

    #[test]
    fn dirac_limit() {
        let leaves = [leaf(0.0, 1.0), leaf(2.0, 0.5), leaf(-1.0, 3.0)];
        let forest = stump_forest(&leaves);
        let mut a = Market::new(&forest, UNBOUNDED, 0.2, Kernel::Delta).unwrap();
        let mut b = a.clone();
        let rule = hermite_gauss(5).unwrap();
        let dd = deltas(a.delta_update(&[0.0], 0.7).unwrap());
        let dg = deltas(b.gaussian_update(&[0.0], 0.7, 1e-6 * 3.0, &rule).unwrap());
        for (x, y) in dd.iter().zip(&dg) {
            assert!((x - y).abs() <= 1e-4 * x.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn inactive_budgets_untouched() {
        let data = generate_friedman(Friedman::One, 120, &mut rng_from(4, &[])).unwrap();
        let params = ForestParams {
            trees: 5,
            seed: 2,
            ..ForestParams::default()
        };
        let forest = Forest::grow(&data, &params).unwrap();
        let mut m = Market::new(&forest, UNBOUNDED, 0.3, Kernel::gaussian(1.0, 5).unwrap()).unwrap();
        let x = data.row(7);
        let active = m.route(x).unwrap();
        assert_eq!(active.len(), 5);
        let before = m.budgets().to_vec();
        m.update(x, data.response()[7]).unwrap();
        for (id, (b0, b1)) in before.iter().zip(m.budgets()).enumerate() {
            if !active.contains(&id) {
                assert_eq!(b0, b1);
            }
        }
        assert!((m.budget_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_market_equals_forest() {
        let data = generate_friedman(Friedman::One, 150, &mut rng_from(5, &[])).unwrap();
        let params = ForestParams {
            trees: 8,
            max_depth: Some(8),
            seed: 9,
            ..ForestParams::default()
        };
        let forest = Forest::grow(&data, &params).unwrap();
        for cap in [0, 3, UNBOUNDED] {
            let m = Market::new(&forest, cap, 0.1, Kernel::Delta).unwrap();
            let total: f64 = m.budgets().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for x in data.rows().take(40) {
                assert!((m.predict(x).unwrap() - forest.predict(x, cap)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let data = generate_friedman(Friedman::One, 100, &mut rng_from(6, &[])).unwrap();
        let forest = Forest::grow(
            &data,
            &ForestParams {
                trees: 6,
                seed: 1,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let mut m = Market::new(&forest, UNBOUNDED, 0.0, Kernel::gaussian(0.5, 5).unwrap()).unwrap();
        let curve = m.train_epochs(&data, &data, 3).unwrap();
        assert!(curve.test_mse.iter().all(|&v| v == curve.initial_test_mse));
        assert!(curve.train_mse.iter().all(|&v| v == curve.initial_train_mse));
    }

    #[test]
    fn training_reports() {
        let data = generate_friedman(Friedman::One, 100, &mut rng_from(6, &[])).unwrap();
        let forest = Forest::grow(
            &data,
            &ForestParams {
                trees: 6,
                seed: 1,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let mut m = Market::new(&forest, UNBOUNDED, 0.1, Kernel::Delta).unwrap();
        assert!(m.train_epochs(&data, &data, 0).is_err());
        let rf = mse(&forest.predict_all(&data, UNBOUNDED), data.response()).unwrap();
        let curve = m.train_epochs(&data, &data, 4).unwrap();
        assert_eq!(curve.initial_test_mse, rf);
        assert_eq!(curve.test_mse.len(), 4);
        let (epoch, best) = curve.best_test();
        assert!((1..=4).contains(&epoch));
        assert_eq!(best, curve.test_mse.iter().cloned().fold(f64::INFINITY, f64::min));
        assert!(curve.max_budget_drift < 1e-12);
    }

    #[test]
    fn eta_handling() {
        let forest = stump_forest(&[leaf(0.0, 1.0)]);
        assert!(Market::new(&forest, UNBOUNDED, -0.1, Kernel::Delta).is_err());
        assert!(Market::new(&forest, UNBOUNDED, f64::NAN, Kernel::Delta).is_err());
        assert_eq!(Market::new(&forest, UNBOUNDED, 3.0, Kernel::Delta).unwrap().eta(), 1.0);
        assert_eq!(EtaRule::Auto.resolve(200), 0.05);
        assert_eq!("auto".parse::<EtaRule>().unwrap(), EtaRule::Auto);
        assert_eq!("0.5".parse::<EtaRule>().unwrap(), EtaRule::Fixed(0.5));
        assert!("fast".parse::<EtaRule>().is_err());
        assert!(Kernel::gaussian(0.0, 5).is_err());
    }
}
