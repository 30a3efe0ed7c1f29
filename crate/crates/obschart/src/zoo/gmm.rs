//! Two-component Gaussian mixture with fixed component variance:
//! P = (1/2+α)·N(μ+δ, σ²) + (1/2−α)·N(μ−δ, σ²), parameters θ = (μ, δ, α).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chart::{Observable, ObservableKind};
use crate::error::{Error, Result};
use crate::model::{GaussComponent, Model, ParamVector, Support};
use crate::numerics::cumulants_from_moments;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct GmmModel {
    /// Fixed component standard deviation.
    pub sigma: f64,
}

impl GmmModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gmm sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    fn split(&self, theta: &ParamVector) -> (f64, f64, f64) {
        let v = theta.values();
        (v[0], v[1], v[2])
    }

    /// Exact first cumulants: m₁ = μ + 2αδ, κ₂ = σ² + δ² − 4α²δ²,
    /// κ₃ = −4αδ³(1 − 4α²).
    pub fn cumulants(&self, theta: &ParamVector) -> Result<(f64, f64, f64)> {
        self.validate_theta(theta)?;
        let (mu, delta, alpha) = self.split(theta);
        let m1 = mu + 2.0 * alpha * delta;
        let k2 = self.sigma * self.sigma + delta * delta - 4.0 * alpha * alpha * delta * delta;
        let k3 = -4.0 * alpha * delta.powi(3) * (1.0 - 4.0 * alpha * alpha);
        Ok((m1, k2, k3))
    }

    /// Exact raw moment E[X^k] via the component Gaussian moments.
    pub fn raw_moment(&self, theta: &ParamVector, k: u32) -> f64 {
        let (mu, delta, alpha) = self.split(theta);
        let w1 = 0.5 + alpha;
        let w2 = 0.5 - alpha;
        w1 * gaussian_raw_moment(mu + delta, self.sigma, k)
            + w2 * gaussian_raw_moment(mu - delta, self.sigma, k)
    }
}

/// E[X^k] for X ~ N(mean, std²), via the binomial expansion over central
/// moments (odd central moments vanish; even ones are σ^j (j−1)!!).
pub fn gaussian_raw_moment(mean: f64, std_dev: f64, k: u32) -> f64 {
    let mut acc = 0.0;
    for j in (0..=k).step_by(2) {
        let mut c = 1.0;
        for i in 0..j {
            c = c * (k - i) as f64 / (i + 1) as f64;
        }
        let double_fact: f64 = (1..j as i64).step_by(2).map(|v| v as f64).product();
        acc += c * mean.powi((k - j) as i32) * std_dev.powi(j as i32) * double_fact;
    }
    acc
}

impl Model for GmmModel {
    fn name(&self) -> &str {
        "gmm"
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn data_dim(&self) -> usize {
        1
    }

    fn support(&self) -> Support {
        Support::RealSpace { dim: 1 }
    }

    fn validate_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != 3 {
            return Err(Error::InvalidParameter {
                model: "gmm".to_string(),
                reason: format!("expected theta=(mu, delta, alpha), got dim {}", theta.dim()),
            });
        }
        let alpha = theta.values()[2];
        if alpha.abs() >= 0.5 {
            return Err(Error::InvalidParameter {
                model: "gmm".to_string(),
                reason: format!("mixture weights must stay in (0,1): |alpha|={} >= 1/2", alpha.abs()),
            });
        }
        Ok(())
    }

    fn log_density(&self, theta: &ParamVector, x: &[f64]) -> Result<f64> {
        let (mu, delta, alpha) = self.split(theta);
        let z1 = (x[0] - mu - delta) / self.sigma;
        let z2 = (x[0] - mu + delta) / self.sigma;
        let l1 = (0.5 + alpha).ln() - 0.5 * z1 * z1;
        let l2 = (0.5 - alpha).ln() - 0.5 * z2 * z2;
        let hi = l1.max(l2);
        Ok(hi + ((l1 - hi).exp() + (l2 - hi).exp()).ln() - 0.5 * LN_2PI - self.sigma.ln())
    }

    fn sample_points(&self, theta: &ParamVector, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate_theta(theta)?;
        let (mu, delta, alpha) = self.split(theta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mean = if rng.random::<f64>() < 0.5 + alpha {
                mu + delta
            } else {
                mu - delta
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            out.push(vec![mean + self.sigma * z]);
        }
        Ok(out)
    }

    fn analytic_score(&self, theta: &ParamVector, x: &[f64]) -> Option<Vec<f64>> {
        let (mu, delta, alpha) = self.split(theta);
        let s2 = self.sigma * self.sigma;
        let z1 = (x[0] - mu - delta) / self.sigma;
        let z2 = (x[0] - mu + delta) / self.sigma;
        // work with densities normalized by the shared Gaussian prefactor
        let g1 = (0.5 + alpha) * (-0.5 * z1 * z1).exp();
        let g2 = (0.5 - alpha) * (-0.5 * z2 * z2).exp();
        let p = g1 + g2;
        if p == 0.0 {
            return None; // defer to finite differences in the extreme tail
        }
        let d1 = x[0] - mu - delta;
        let d2 = x[0] - mu + delta;
        let s_mu = (g1 * d1 + g2 * d2) / (s2 * p);
        let s_delta = (g1 * d1 - g2 * d2) / (s2 * p);
        let s_alpha = ((-0.5 * z1 * z1).exp() - (-0.5 * z2 * z2).exp()) / p;
        Some(vec![s_mu, s_delta, s_alpha])
    }

    fn closed_form_expectation(&self, obs: &Observable, theta: &ParamVector) -> Option<f64> {
        match &obs.kind {
            ObservableKind::Monomial(deg) if deg.len() == 1 => {
                Some(self.raw_moment(theta, deg[0]))
            }
            ObservableKind::Cumulant(k) => match k {
                1 => Some(self.cumulants(theta).ok()?.0),
                2 => Some(self.cumulants(theta).ok()?.1),
                3 => Some(self.cumulants(theta).ok()?.2),
                k if *k <= 10 => {
                    let moments: Vec<f64> =
                        (1..=*k).map(|j| self.raw_moment(theta, j)).collect();
                    let (kappa, _) = cumulants_from_moments(&moments);
                    Some(kappa[*k as usize - 1])
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn gauss_components(&self, theta: &ParamVector) -> Option<Vec<GaussComponent>> {
        let (mu, delta, alpha) = self.split(theta);
        Some(vec![
            GaussComponent {
                weight: 0.5 + alpha,
                mean: mu + delta,
                std_dev: self.sigma,
            },
            GaussComponent {
                weight: 0.5 - alpha,
                mean: mu - delta,
                std_dev: self.sigma,
            },
        ])
    }

    fn quadrature_hint(&self, theta: &ParamVector) -> Vec<(f64, f64)> {
        let (mu, delta, _) = self.split(theta);
        vec![(mu, self.sigma + delta.abs())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theta(mu: f64, delta: f64, alpha: f64) -> ParamVector {
        ParamVector::new(vec![mu, delta, alpha]).unwrap()
    }

    #[test]
    fn degenerate_point_is_standard_normal() {
        let m = GmmModel::new(1.0).unwrap();
        let lp = m.log_density(&theta(0.0, 0.0, 0.0), &[0.0]).unwrap();
        assert_abs_diff_eq!(lp, -0.9189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn log_density_matches_two_term_mixture_sum() {
        let m = GmmModel::new(1.0).unwrap();
        let t = theta(0.0, 0.5, 0.1);
        let x = 1.0;
        let norm = |x: f64, mean: f64| {
            (-0.5 * (x - mean) * (x - mean)).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let brute = (0.6 * norm(x, 0.5) + 0.4 * norm(x, -0.5)).ln();
        assert_abs_diff_eq!(m.log_density(&t, &[x]).unwrap(), brute, epsilon = 1e-12);
    }

    #[test]
    fn cumulant_formulas_match_moment_recursion() {
        let m = GmmModel::new(0.8).unwrap();
        for (mu, delta, alpha) in [(0.0, 0.5, 0.1), (-0.3, 1.2, -0.2), (1.0, 0.0, 0.3)] {
            let t = theta(mu, delta, alpha);
            let (m1, k2, k3) = m.cumulants(&t).unwrap();
            let moments: Vec<f64> = (1..=3).map(|k| m.raw_moment(&t, k)).collect();
            let (kappa, _) = cumulants_from_moments(&moments);
            assert_abs_diff_eq!(m1, kappa[0], epsilon = 1e-12);
            assert_abs_diff_eq!(k2, kappa[1], epsilon = 1e-12);
            assert_abs_diff_eq!(k3, kappa[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_point_cumulants_are_standard_normal() {
        let m = GmmModel::new(1.0).unwrap();
        let (m1, k2, k3) = m.cumulants(&theta(0.0, 0.0, 0.0)).unwrap();
        assert_eq!((m1, k2, k3), (0.0, 1.0, 0.0));
    }

    #[test]
    fn mean_formula() {
        let m = GmmModel::new(1.0).unwrap();
        let (m1, _, _) = m.cumulants(&theta(0.0, 0.5, 0.1)).unwrap();
        assert_abs_diff_eq!(m1, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn weight_constraint_enforced() {
        let m = GmmModel::new(1.0).unwrap();
        assert!(m.validate_theta(&theta(0.0, 0.0, 0.5)).is_err());
    }

    #[test]
    fn sampler_is_reproducible() {
        let m = GmmModel::new(1.0).unwrap();
        let t = theta(0.0, 0.5, 0.1);
        let a = m.sample_points(&t, 100, 42).unwrap();
        let b = m.sample_points(&t, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = m.sample_points(&t, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn score_at_collapse_point_kills_delta_and_alpha() {
        let m = GmmModel::new(1.0).unwrap();
        let t = theta(0.0, 0.0, 0.0);
        for x in [-2.0, -0.5, 0.0, 1.3, 4.0] {
            let s = m.analytic_score(&t, &[x]).unwrap();
            assert_abs_diff_eq!(s[0], x, epsilon = 1e-12); // Gaussian location score
            assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-12);
        }
    }
}
