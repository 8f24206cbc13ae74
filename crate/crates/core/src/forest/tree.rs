use rand::Rng;
use serde::{Deserialize, Serialize};

use super::feature::{draw_candidates, RandomFeature};
use super::split::best_split;
use super::ForestParams;
use crate::dataset::Dataset;

/// Gaussian summary of the training responses that reached a node. Leaves
/// (or depth-capped nodes) act as market participants with density
/// `N(mean, variance)` and point prediction `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLeaf {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
    pub depth: usize,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

impl GaussianLeaf {
    /// Summarizes `ys` with population variance clamped below at `floor`.
    pub fn from_responses(ys: &[f64], depth: usize, floor: f64) -> Self {
        let n = ys.len();
        assert!(n > 0, "leaf needs at least one response");
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        GaussianLeaf {
            mean,
            variance: var.max(floor),
            count: n,
            depth,
        }
    }

    #[inline]
    pub fn log_density(&self, y: f64) -> f64 {
        let d = y - self.mean;
        -LN_SQRT_2PI - 0.5 * self.variance.ln() - d * d / (2.0 * self.variance)
    }

    #[inline]
    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: RandomFeature,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// Every node keeps its own statistics so the tree can be evaluated at any
/// depth cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub stats: GaussianLeaf,
    pub split: Option<Split>,
}

/// A regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    /// Wraps a prebuilt arena. Node 0 must be the root and child indices
    /// must point inside the arena.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Tree {
        assert!(!nodes.is_empty(), "tree needs a root");
        debug_assert!(nodes
            .iter()
            .filter_map(|n| n.split)
            .all(|s| s.left < nodes.len() && s.right < nodes.len()));
        Tree { nodes }
    }

    /// A tree made of one leaf.
    pub fn leaf(stats: GaussianLeaf) -> Tree {
        Tree::from_nodes(vec![TreeNode { stats, split: None }])
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Depth of the deepest leaf.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.stats.depth).max().unwrap_or(0)
    }

    /// Index of the node where `x` stops: a true leaf or the node at
    /// `depth_cap`, whichever comes first.
    #[inline]
    pub fn route(&self, x: &[f64], depth_cap: usize) -> usize {
        let mut id = 0;
        loop {
            let node = &self.nodes[id];
            match &node.split {
                Some(s) if node.stats.depth < depth_cap => {
                    id = if s.feature.evaluate(x) <= s.threshold { s.left } else { s.right };
                }
                _ => return id,
            }
        }
    }

    pub fn leaf_for(&self, x: &[f64], depth_cap: usize) -> &GaussianLeaf {
        &self.nodes[self.route(x, depth_cap)].stats
    }

    /// Nodes that can terminate a route under `depth_cap`, in arena order.
    pub fn terminal_nodes(&self, depth_cap: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.stats.depth <= depth_cap && (n.split.is_none() || n.stats.depth == depth_cap))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Grows one tree on the given rows of `data`.
///
/// At each node `params.candidates` features are drawn from `pool`; growth
/// stops at `params.max_depth`, below `params.min_split` rows, or when no
/// candidate lowers the weighted variance.
pub fn grow_tree<R: Rng + ?Sized>(
    data: &Dataset,
    rows: &[usize],
    params: &ForestParams,
    pool: &[RandomFeature],
    variance_floor: f64,
    rng: &mut R,
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let max_depth = params.max_depth.unwrap_or(usize::MAX);
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stack: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    let ys: Vec<f64> = rows.iter().map(|&i| data.response()[i]).collect();
    nodes.push(TreeNode {
        stats: GaussianLeaf::from_responses(&ys, 0, variance_floor),
        split: None,
    });
    stack.push((0, rows.to_vec(), 0));

    while let Some((id, idx, depth)) = stack.pop() {
        if depth >= max_depth || idx.len() < params.min_split {
            continue;
        }
        let xs: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| data.response()[i]).collect();
        let candidates = draw_candidates(pool, params.candidates, rng);
        let Some(choice) = best_split(&xs, &ys, &candidates, params.min_split) else {
            continue;
        };

        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (&i, x) in idx.iter().zip(&xs) {
            if choice.feature.evaluate(x) <= choice.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        debug_assert!(!left.is_empty() && !right.is_empty());

        let mut child = |part: Vec<usize>, nodes: &mut Vec<TreeNode>| {
            let ys: Vec<f64> = part.iter().map(|&i| data.response()[i]).collect();
            nodes.push(TreeNode {
                stats: GaussianLeaf::from_responses(&ys, depth + 1, variance_floor),
                split: None,
            });
            let cid = nodes.len() - 1;
            stack.push((cid, part, depth + 1));
            cid
        };
        let l = child(left, &mut nodes);
        let r = child(right, &mut nodes);
        nodes[id].split = Some(Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: l,
            right: r,
        });
    }
    Tree { nodes }
}
