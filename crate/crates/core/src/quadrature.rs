//! Hermite-Gauss quadrature for integrals against the weight `exp(-t^2)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 64;

/// Densities below this are treated as numerically zero.
pub const MIN_DENSITY: f64 = 1e-300;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Nodes (ascending, symmetric about zero) and positive weights of an
/// n-point Hermite-Gauss rule. Exact for polynomials of degree `2n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(t_i)`, approximating `int exp(-t^2) f(t) dt`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }

    /// Evaluation points `y + sqrt(2) sigma t_i` paired with the normalized
    /// weights `w_i / sqrt(pi)`. Summing `weight * g(point)` approximates
    /// the expectation of `g` under `N(y, sigma^2)`.
    pub fn gaussian_points(&self, y: f64, sigma: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let scale = SQRT_2 * sigma;
        let norm = PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (y + scale * t, w * norm))
    }
}

/// Computes the n-point rule by Newton iteration on the orthonormal Hermite
/// recurrence, which stays in range for every supported `n`.
pub fn hermite_gauss(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::param(format!("quadrature size {n} outside 1..={MAX_POINTS}")));
    }
    // pi^(-1/4), the orthonormal H_0
    let h0 = PI.powf(-0.25);
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;

    for i in 0..half {
        // initial guesses for the largest roots, descending
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (mut p1, mut p2) = (h0, 0.0f64);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            derivative = (2.0 * nf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (derivative * derivative);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok(QuadratureRule { nodes: x, weights: w })
}

/// Approximates `int N(t; y, sigma^2) num(t) / den(t) dt` after the change
/// of variables `t = y + sqrt(2) sigma s`. Nodes where `den` falls below
/// [`MIN_DENSITY`] contribute a ratio of exactly 1.
pub fn integrate_ratio(
    rule: &QuadratureRule,
    y: f64,
    sigma: f64,
    numerator: impl Fn(f64) -> f64,
    denominator: impl Fn(f64) -> f64,
) -> f64 {
    rule.gaussian_points(y, sigma)
        .map(|(t, w)| {
            let den = denominator(t);
            let ratio = if den < MIN_DENSITY { 1.0 } else { numerator(t) / den };
            w * ratio
        })
        .sum()
}
