use super::feature::RandomFeature;

/// The chosen projection and threshold of a node split. Rows with
/// `feature(x) <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    /// Position of the winning feature in the candidate list.
    pub candidate: usize,
    pub feature: RandomFeature,
    pub threshold: f64,
    /// `(n_L Var_L + n_R Var_R) / n` with population variances.
    pub weighted_variance: f64,
}

/// Finds the variance-minimizing split among `candidates`, scanning every
/// midpoint between consecutive distinct projected values. Ties keep the
/// first minimum in (candidate, threshold) order.
///
/// Returns `None` when the sample has fewer than `min_split` rows or no
/// threshold lowers the weighted variance.
pub fn best_split(rows: &[&[f64]], ys: &[f64], candidates: &[RandomFeature], min_split: usize) -> Option<SplitChoice> {
    let n = ys.len();
    if n < min_split.max(2) || rows.len() != n {
        return None;
    }
    let mean = ys.iter().sum::<f64>() / n as f64;
    let parent_sse: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    if parent_sse <= 0.0 {
        return None;
    }

    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut best: Option<(f64, usize, f64)> = None;
    for (c, feature) in candidates.iter().enumerate() {
        scratch.clear();
        scratch.extend(rows.iter().zip(ys).map(|(x, &y)| (feature.evaluate(x), y - mean)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let total_sum: f64 = scratch.iter().map(|p| p.1).sum();
        let total_sq: f64 = scratch.iter().map(|p| p.1 * p.1).sum();
        let (mut left_sum, mut left_sq) = (0.0, 0.0);
        for i in 0..n - 1 {
            let (proj, y) = scratch[i];
            left_sum += y;
            left_sq += y * y;
            let next = scratch[i + 1].0;
            if next <= proj {
                continue;
            }
            let n_left = (i + 1) as f64;
            let n_right = (n - i - 1) as f64;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let objective = (left_sq - left_sum * left_sum / n_left) + (right_sq - right_sum * right_sum / n_right);
            if best.is_none_or(|(b, _, _)| objective < b) {
                let mut threshold = 0.5 * (proj + next);
                if threshold >= next {
                    threshold = proj;
                }
                best = Some((objective, c, threshold));
            }
        }
    }

    let (objective, candidate, threshold) = best?;
    if objective >= parent_sse * (1.0 - 1e-12) {
        return None;
    }
    Some(SplitChoice {
        candidate,
        feature: candidates[candidate],
        threshold,
        weighted_variance: objective.max(0.0) / n as f64,
    })
}
