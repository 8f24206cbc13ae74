//! Random-feature regression forests with Gaussian leaves.
//!
//! Each split node tests a projection onto two random input columns drawn
//! from a pool generated once per forest. Every node stores the mean and
//! variance of its training sample, so the same trees serve both full-depth
//! and depth-capped evaluation.

mod feature;
mod split;
mod tree;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::{rng_from, TAG_POOL, TAG_TREE};

pub use feature::{draw_candidates, generate_feature_pool, RandomFeature};
pub use split::{best_split, SplitChoice};
pub use tree::{grow_tree, GaussianLeaf, Split, Tree, TreeNode};

/// Depth cap meaning "descend to the true leaf".
pub const UNBOUNDED: usize = usize::MAX;

const FOREST_FORMAT: &str = "regmarket-forest";
const FOREST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Random features tried at each node.
    pub candidates: usize,
    /// Size of the precomputed feature pool.
    pub pool_size: usize,
    /// Nodes with fewer rows than this are not split.
    pub min_split: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    /// Grow each tree on a bootstrap resample instead of the full set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            candidates: 25,
            pool_size: 1000,
            min_split: 5,
            max_depth: None,
            bootstrap: false,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 || self.candidates == 0 || self.pool_size == 0 {
            return Err(Error::param("trees, candidates and pool size must be positive"));
        }
        if self.min_split < 2 {
            return Err(Error::param("min split size must be at least 2"));
        }
        Ok(())
    }
}

/// Minimum leaf variance: `1e-6 * span^2`, or `1e-6` for a constant response.
pub fn variance_floor(response_span: f64) -> f64 {
    if response_span > 0.0 {
        1e-6 * response_span * response_span
    } else {
        1e-6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    params: ForestParams,
    n_inputs: usize,
    variance_floor: f64,
    trees: Vec<Tree>,
}

impl Forest {
    /// Grows `params.trees` trees on `train`. Tree `t` draws from its own
    /// random stream derived from `(params.seed, t)`.
    pub fn grow(train: &Dataset, params: &ForestParams) -> Result<Forest> {
        params.validate()?;
        let pool = generate_feature_pool(train.n_features(), params.pool_size, &mut rng_from(params.seed, &[TAG_POOL]))?;
        let floor = variance_floor(train.response_span());
        let all: Vec<usize> = (0..train.n_rows()).collect();
        let trees = (0..params.trees)
            .map(|t| {
                let mut rng = rng_from(params.seed, &[TAG_TREE, t as u64]);
                let rows = if params.bootstrap {
                    (0..train.n_rows()).map(|_| rng.random_range(0..train.n_rows())).collect()
                } else {
                    all.clone()
                };
                grow_tree(train, &rows, params, &pool, floor, &mut rng)
            })
            .collect();
        Ok(Forest {
            params: params.clone(),
            n_inputs: train.n_features(),
            variance_floor: floor,
            trees,
        })
    }

    /// Assembles a forest from already-built trees.
    pub fn from_trees(trees: Vec<Tree>, n_inputs: usize, variance_floor: f64) -> Result<Forest> {
        if trees.is_empty() {
            return Err(Error::param("forest needs at least one tree"));
        }
        Ok(Forest {
            params: ForestParams {
                trees: trees.len(),
                ..ForestParams::default()
            },
            n_inputs,
            variance_floor,
            trees,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn variance_floor(&self) -> f64 {
        self.variance_floor
    }

    pub fn height(&self) -> usize {
        self.trees.iter().map(Tree::height).max().unwrap_or(0)
    }

    /// Plain forest prediction: the average of the reached node means.
    pub fn predict(&self, x: &[f64], depth_cap: usize) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_for(x, depth_cap).mean).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_all(&self, data: &Dataset, depth_cap: usize) -> Vec<f64> {
        data.rows().map(|x| self.predict(x, depth_cap)).collect()
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// SHA-256 of the serialized forest, hex encoded.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("forest serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ForestFile {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            forest: self.clone(),
        };
        let bytes = serde_json::to_vec(&file)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Forest> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ForestFile = serde_json::from_slice(&bytes)?;
        if file.format != FOREST_FORMAT || file.version != FOREST_VERSION {
            return Err(Error::Format(format!("{} v{}", file.format, file.version)));
        }
        Ok(file.forest)
    }
}

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    forest: Forest,
}
