//! Quadrature rules: Gauss–Hermite nodes/weights and an adaptive
//! interval-doubling trapezoid fallback.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights for ∫ e^{-z²} g(z) dz ≈ Σ w_i g(z_i).
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// ln w_i, kept separately so compensated integrands can work in log space
    /// (w_i underflows toward e^{-z_i²} at the edges of large rules).
    pub ln_weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch construction: eigendecomposition of the Jacobi matrix of
    /// the Hermite recurrence. Off-diagonal entries are sqrt(k/2).
    fn build(n: usize) -> Self {
        assert!(n >= 1);
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let node = eig.eigenvalues[i];
                let first = eig.eigenvectors[(0, i)];
                (node, sqrt_pi * first * first)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ln_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            nodes,
            weights,
            ln_weights,
        }
    }

    /// Shared, cached rule of size `n`.
    pub fn rule(n: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussHermite::build(n)))
            .clone()
    }

    /// E_{Z~N(mean, std²)}[g(Z)] = (1/√π) Σ w_i g(mean + √2 std z_i).
    pub fn gaussian_expectation(&self, mean: f64, std_dev: f64, mut g: impl FnMut(f64) -> f64) -> f64 {
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let s = std::f64::consts::SQRT_2 * std_dev;
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mean + s * z);
        }
        acc * inv_sqrt_pi
    }

    /// ∫ h(x) dx for a Gaussian-tailed integrand given in log-magnitude form:
    /// `ln_abs_h(x)` returns (ln |h(x)|, sign). The integral is standardized by
    /// (center, scale) and the Hermite weight is compensated in log space.
    pub fn integrate_compensated(
        &self,
        center: f64,
        scale: f64,
        mut ln_abs_h: impl FnMut(f64) -> (f64, f64),
    ) -> f64 {
        let s = std::f64::consts::SQRT_2 * scale;
        let ln_s = s.ln();
        let mut acc = 0.0;
        for (i, z) in self.nodes.iter().enumerate() {
            let x = center + s * z;
            let (ln_mag, sign) = ln_abs_h(x);
            if sign == 0.0 || ln_mag == f64::NEG_INFINITY {
                continue;
            }
            let ln_term = self.ln_weights[i] + z * z + ln_mag + ln_s;
            acc += sign * ln_term.exp();
        }
        acc
    }
}

/// Adaptive trapezoid on an expanding symmetric interval around `center`.
///
/// Doubles the interval half-width and halves the step until both the
/// refinement change and the tail extension fall below `tol`; errors out when
/// `max_doublings` is exceeded.
pub fn adaptive_trapezoid(
    center: f64,
    initial_half_width: f64,
    tol: f64,
    max_doublings: usize,
    mut f: impl FnMut(f64) -> f64,
) -> Result<(f64, f64)> {
    let mut half_width = initial_half_width;
    let mut n = 64usize;
    let mut prev = trapezoid(center - half_width, center + half_width, n, &mut f);
    for _ in 0..max_doublings {
        half_width *= 2.0;
        n *= 2;
        let cur = trapezoid(center - half_width, center + half_width, n, &mut f);
        let change = (cur - prev).abs();
        if change <= tol * (1.0 + cur.abs()) {
            // one more refinement at fixed interval to estimate the error
            let refined = trapezoid(center - half_width, center + half_width, 2 * n, &mut f);
            return Ok((refined, (refined - cur).abs().max(f64::MIN_POSITIVE)));
        }
        prev = cur;
    }
    Err(Error::Numeric {
        context: "adaptive_trapezoid".to_string(),
        reason: format!("no convergence after {max_doublings} interval doublings"),
    })
}

fn trapezoid(a: f64, b: f64, n: usize, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for i in 1..n {
        acc += f(a + h * i as f64);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let rule = GaussHermite::rule(20);
        // E[Z^2] = 1, E[Z^4] = 3 for Z ~ N(0,1)
        assert_abs_diff_eq!(rule.gaussian_expectation(0.0, 1.0, |z| z * z), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rule.gaussian_expectation(0.0, 1.0, |z| z.powi(4)),
            3.0,
            epsilon = 1e-11
        );
        // E[(Z+2)^3] for Z ~ N(2,1): m^3 + 3m = 14
        assert_abs_diff_eq!(
            rule.gaussian_expectation(2.0, 1.0, |z| z.powi(3)),
            14.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn compensated_rule_normalizes_a_density() {
        let rule = GaussHermite::rule(200);
        // standard normal density integrates to 1, offset standardization
        let val = rule.integrate_compensated(0.3, 1.5, |x| {
            (-0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(), 1.0)
        });
        assert_abs_diff_eq!(val, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn trapezoid_fallback_converges() {
        let (val, err) = adaptive_trapezoid(0.0, 1.0, 1e-10, 12, |x| {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        assert!((val - 1.0).abs() < 1e-8, "val={val} err={err}");
    }
}
