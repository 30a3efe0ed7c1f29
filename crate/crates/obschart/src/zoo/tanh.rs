//! One-unit tanh network: y = a·tanh(wx + b) + ε with X ~ N(0,1) and
//! ε ~ N(0, σ_n²), parameters θ = (a, w, b). The inactive-unit singularity
//! sits at a = 0, where w and b are invisible at first order.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chart::{Chart, Observable, ObservableKind};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector, Support};
use crate::quad::GaussHermite;

const LN_2PI: f64 = 1.8378770664093453;

/// Node count for the model's internal response and KL quadrature over X.
const X_NODES: usize = 200;

#[derive(Debug, Clone)]
pub struct TanhUnitModel {
    /// Observation noise standard deviation.
    pub noise_std: f64,
}

impl TanhUnitModel {
    pub fn new(noise_std: f64) -> Result<Self> {
        if !(noise_std > 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tanh noise std must be positive, got {noise_std}"
            )));
        }
        Ok(Self { noise_std })
    }

    fn split(&self, theta: &ParamVector) -> (f64, f64, f64) {
        let v = theta.values();
        (v[0], v[1], v[2])
    }

    /// G_φ(w, b) = E[tanh(wX + b)·φ(X)] by Gauss–Hermite quadrature.
    pub fn response_kernel(&self, w: f64, b: f64, phi_center: f64) -> f64 {
        let rule = GaussHermite::rule(X_NODES);
        rule.gaussian_expectation(0.0, 1.0, |x| {
            let d = x - phi_center;
            (w * x + b).tanh() * (-0.5 * d * d).exp()
        })
    }

    /// ψ_φ(θ) = E[f_θ(X)·φ(X)] = a·G_φ(w, b). The factorization through
    /// `response_kernel` holds exactly (same quadrature nodes).
    pub fn response(&self, theta: &ParamVector, phi_center: f64) -> Result<f64> {
        self.validate_theta(theta)?;
        let (a, w, b) = self.split(theta);
        Ok(a * self.response_kernel(w, b, phi_center))
    }

    /// The default 3-bump response chart at centers {−1, 0, 1}.
    pub fn default_chart(&self, theta0: ParamVector) -> Result<Chart> {
        Chart::new(
            vec![
                Observable::response(-1.0),
                Observable::response(0.0),
                Observable::response(1.0),
            ],
            theta0,
        )
    }
}

impl Model for TanhUnitModel {
    fn name(&self) -> &str {
        "tanh"
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn data_dim(&self) -> usize {
        2
    }

    fn support(&self) -> Support {
        Support::RealSpace { dim: 2 }
    }

    fn log_density(&self, theta: &ParamVector, x: &[f64]) -> Result<f64> {
        let (a, w, b) = self.split(theta);
        let resid = (x[1] - a * (w * x[0] + b).tanh()) / self.noise_std;
        Ok(-0.5 * x[0] * x[0] - 0.5 * resid * resid - LN_2PI - self.noise_std.ln())
    }

    fn sample_points(&self, theta: &ParamVector, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate_theta(theta)?;
        let (a, w, b) = self.split(theta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let eps: f64 = StandardNormal.sample(&mut rng);
            let y = a * (w * x + b).tanh() + self.noise_std * eps;
            out.push(vec![x, y]);
        }
        Ok(out)
    }

    fn analytic_score(&self, theta: &ParamVector, x: &[f64]) -> Option<Vec<f64>> {
        let (a, w, b) = self.split(theta);
        let u = w * x[0] + b;
        let t = u.tanh();
        let sech2 = 1.0 - t * t;
        let r = (x[1] - a * t) / (self.noise_std * self.noise_std);
        Some(vec![r * t, r * a * x[0] * sech2, r * a * sech2])
    }

    fn closed_form_expectation(&self, obs: &Observable, theta: &ParamVector) -> Option<f64> {
        match &obs.kind {
            ObservableKind::Response(phi) => {
                let (a, w, b) = self.split(theta);
                Some(a * self.response_kernel(w, b, phi.center))
            }
            _ => None,
        }
    }

    fn closed_form_kl(&self, theta0: &ParamVector, theta: &ParamVector) -> Option<f64> {
        // conditional-regression form: E_X[(f_θ0(X) − f_θ(X))²] / (2σ_n²)
        let (a0, w0, b0) = self.split(theta0);
        let (a, w, b) = self.split(theta);
        let rule = GaussHermite::rule(X_NODES);
        let mean_sq = rule.gaussian_expectation(0.0, 1.0, |x| {
            let d = a0 * (w0 * x + b0).tanh() - a * (w * x + b).tanh();
            d * d
        });
        Some(mean_sq / (2.0 * self.noise_std * self.noise_std))
    }

    fn analytic_fisher(&self, theta: &ParamVector) -> Option<DMatrix<f64>> {
        // I(θ) = E_X[∇f ∇fᵀ] / σ_n² with ∇f = (tanh u, a·x·sech²u, a·sech²u)
        let (a, w, b) = self.split(theta);
        let rule = GaussHermite::rule(X_NODES);
        let mut acc = DMatrix::<f64>::zeros(3, 3);
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        for (z, wt) in rule.nodes.iter().zip(&rule.weights) {
            let x = std::f64::consts::SQRT_2 * z;
            let u = w * x + b;
            let t = u.tanh();
            let sech2 = 1.0 - t * t;
            let g = [t, a * x * sech2, a * sech2];
            for i in 0..3 {
                for j in 0..3 {
                    acc[(i, j)] += wt * g[i] * g[j];
                }
            }
        }
        Some(acc * inv_sqrt_pi / (self.noise_std * self.noise_std))
    }

    fn quadrature_hint(&self, theta: &ParamVector) -> Vec<(f64, f64)> {
        let (a, _, _) = self.split(theta);
        vec![(0.0, 1.0), (0.0, a.abs() + self.noise_std)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theta(a: f64, w: f64, b: f64) -> ParamVector {
        ParamVector::new(vec![a, w, b]).unwrap()
    }

    #[test]
    fn response_vanishes_with_amplitude() {
        let m = TanhUnitModel::new(1.0).unwrap();
        for c in [-1.0, 0.0, 1.0] {
            assert_eq!(m.response(&theta(0.0, 1.3, -0.4), c).unwrap(), 0.0);
        }
    }

    #[test]
    fn odd_symmetry_kills_centered_bump() {
        let m = TanhUnitModel::new(1.0).unwrap();
        // tanh odd, X symmetric, bump at 0 even
        let v = m.response(&theta(1.0, 1.0, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn factorization_is_exact() {
        let m = TanhUnitModel::new(1.0).unwrap();
        for (a, w, b, c) in [(0.5, 1.0, 0.0, 1.0), (-1.7, 0.3, 0.8, -1.0), (2.0, 2.0, -1.0, 0.0)] {
            let full = m.response(&theta(a, w, b), c).unwrap();
            let unit = m.response(&theta(1.0, w, b), c).unwrap();
            assert_abs_diff_eq!(full, a * unit, epsilon = 1e-14);
        }
    }

    #[test]
    fn positive_response_pinned_by_refined_quadrature() {
        let m = TanhUnitModel::new(1.0).unwrap();
        let v = m.response(&theta(0.5, 1.0, 0.0), 1.0).unwrap();
        assert!(v > 0.0);
        // two resolutions agree
        let coarse = {
            let rule = GaussHermite::rule(100);
            0.5 * rule.gaussian_expectation(0.0, 1.0, |x| {
                let d = x - 1.0;
                x.tanh() * (-0.5 * d * d).exp()
            })
        };
        assert_abs_diff_eq!(v, coarse, epsilon = 1e-10);
    }

    #[test]
    fn kl_is_zero_at_reference() {
        let m = TanhUnitModel::new(1.0).unwrap();
        let t = theta(0.7, 1.0, 0.2);
        assert_abs_diff_eq!(m.closed_form_kl(&t, &t).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn score_vanishes_in_w_and_b_at_inactive_unit() {
        let m = TanhUnitModel::new(1.0).unwrap();
        let t = theta(0.0, 1.0, 0.0);
        for (x, y) in [(0.5, 1.0), (-1.0, 0.3), (2.0, -2.0)] {
            let s = m.analytic_score(&t, &[x, y]).unwrap();
            assert_eq!(s[1], 0.0);
            assert_eq!(s[2], 0.0);
        }
    }
}
