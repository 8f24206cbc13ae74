use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A projection `c0 * x[i0] + c1 * x[i1]` of two input columns, coefficients
/// in `[-1, 1]`. The two columns may coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFeature {
    pub inputs: [usize; 2],
    pub coefficients: [f64; 2],
}

impl RandomFeature {
    pub fn new(inputs: [usize; 2], coefficients: [f64; 2]) -> Result<Self> {
        if coefficients.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::param(format!("coefficients {coefficients:?} outside [-1, 1]")));
        }
        Ok(RandomFeature { inputs, coefficients })
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.coefficients[0] * x[self.inputs[0]] + self.coefficients[1] * x[self.inputs[1]]
    }

    /// Like [`evaluate`](Self::evaluate) but reports an out-of-range column
    /// instead of panicking.
    pub fn try_evaluate(&self, x: &[f64]) -> Result<f64> {
        let needed = self.inputs[0].max(self.inputs[1]) + 1;
        if x.len() < needed {
            return Err(Error::DimensionMismatch {
                expected: needed,
                actual: x.len(),
            });
        }
        Ok(self.evaluate(x))
    }
}

/// Precomputes `pool_size` random features over `n_inputs` columns.
pub fn generate_feature_pool<R: Rng + ?Sized>(n_inputs: usize, pool_size: usize, rng: &mut R) -> Result<Vec<RandomFeature>> {
    if n_inputs == 0 || pool_size == 0 {
        return Err(Error::param("feature pool needs at least one input and one feature"));
    }
    Ok((0..pool_size)
        .map(|_| RandomFeature {
            inputs: [rng.random_range(0..n_inputs), rng.random_range(0..n_inputs)],
            coefficients: [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
        })
        .collect())
}

/// Draws `k` candidates from the pool uniformly with replacement.
pub fn draw_candidates<R: Rng + ?Sized>(pool: &[RandomFeature], k: usize, rng: &mut R) -> Vec<RandomFeature> {
    (0..k).filter_map(|_| pool.choose(rng).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn evaluate_examples() {
        let f = RandomFeature::new([0, 1], [1.0, 0.0]).unwrap();
        assert_eq!(f.evaluate(&[3.0, 9.0]), 3.0);
        let f = RandomFeature::new([0, 0], [0.5, -0.5]).unwrap();
        assert_eq!(f.evaluate(&[4.0, 1.0]), 0.0);
        let f = RandomFeature::new([0, 1], [0.25, 0.75]).unwrap();
        assert_eq!(f.evaluate(&[4.0, 8.0]), 7.0);
    }

    #[test]
    fn out_of_range_column() {
        let f = RandomFeature::new([0, 3], [1.0, 1.0]).unwrap();
        assert!(f.try_evaluate(&[1.0, 2.0]).is_err());
        assert!(RandomFeature::new([0, 1], [1.5, 0.0]).is_err());
    }

    #[test]
    fn pool_properties() {
        let pool = generate_feature_pool(7, 1000, &mut rng_from(11, &[])).unwrap();
        assert_eq!(pool.len(), 1000);
        for f in &pool {
            assert!(f.coefficients.iter().all(|c| (-1.0..=1.0).contains(c)));
            assert!(f.inputs.iter().all(|&i| i < 7));
        }
        let again = generate_feature_pool(7, 1000, &mut rng_from(11, &[])).unwrap();
        assert_eq!(pool, again);
        assert_eq!(generate_feature_pool(3, 1, &mut rng_from(0, &[])).unwrap().len(), 1);
        assert!(generate_feature_pool(0, 5, &mut rng_from(0, &[])).is_err());
    }
}
