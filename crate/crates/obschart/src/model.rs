//! Model abstraction: densities, scores, sampling.
//!
//! A [`Model`] exposes a log-density over its declared support together with a
//! seeded sampler. Everything else (closed-form expectation tables, analytic
//! scores, Gaussian quadrature hints) is optional and lets the numerical
//! kernels pick faster or more accurate routes when available.

use nalgebra::DMatrix;

use crate::chart::Observable;
use crate::error::{Error, Result};

/// A parameter vector θ ∈ ℝ^d with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has non-finite entries: {values:?}"
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Returns a copy with `delta` added to coordinate `i`.
    pub fn perturbed(&self, i: usize, delta: f64) -> Self {
        let mut v = self.values.clone();
        v[i] += delta;
        Self { values: v }
    }
}

impl From<&[f64]> for ParamVector {
    fn from(v: &[f64]) -> Self {
        ParamVector::new(v.to_vec()).expect("finite parameter entries")
    }
}

/// Support of the data distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// All of ℝ^dim.
    RealSpace { dim: usize },
    /// Product of closed intervals, one per data coordinate.
    Intervals(Vec<(f64, f64)>),
}

impl Support {
    pub fn dim(&self) -> usize {
        match self {
            Support::RealSpace { dim } => *dim,
            Support::Intervals(iv) => iv.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            Support::RealSpace { .. } => x.iter().all(|v| v.is_finite()),
            Support::Intervals(iv) => x
                .iter()
                .zip(iv)
                .all(|(v, (lo, hi))| v.is_finite() && *lo <= *v && *v <= *hi),
        }
    }
}

/// One Gaussian component of a 1-D mixture-structured data law, used by the
/// quadrature kernels to integrate exactly against each component.
#[derive(Debug, Clone, Copy)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: f64,
    pub std_dev: f64,
}

/// A batch of i.i.d. draws with provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    pub source_seed: u64,
    pub source_theta: ParamVector,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, source_seed: u64, source_theta: ParamVector) -> Self {
        Self {
            points,
            source_seed,
            source_theta,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A parametric statistical model θ ↦ P_θ.
///
/// All methods must be pure: evaluation is safe from many threads, and the
/// sampler is deterministic given `(theta, n, seed)`.
pub trait Model: Send + Sync {
    /// Short identifier used in errors and reports.
    fn name(&self) -> &str;

    /// Dimension d of the parameter space.
    fn param_dim(&self) -> usize;

    /// Dimension of a data point x.
    fn data_dim(&self) -> usize;

    fn support(&self) -> Support;

    /// log p_θ(x) on the declared support.
    fn log_density(&self, theta: &ParamVector, x: &[f64]) -> Result<f64>;

    /// Draw `n` i.i.d. points from P_θ.
    fn sample_points(&self, theta: &ParamVector, n: usize, seed: u64) -> Result<Vec<Vec<f64>>>;

    /// Checks model-specific parameter constraints.
    fn validate_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != self.param_dim() {
            return Err(Error::InvalidParameter {
                model: self.name().to_string(),
                reason: format!(
                    "dimension {} does not match declared d={}",
                    theta.dim(),
                    self.param_dim()
                ),
            });
        }
        Ok(())
    }

    /// Analytic score ∇_θ log p_θ(x), when the model registers one.
    fn analytic_score(&self, _theta: &ParamVector, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form E_θ[f] for registered observables.
    fn closed_form_expectation(&self, _obs: &Observable, _theta: &ParamVector) -> Option<f64> {
        None
    }

    /// Closed-form E_θ0[f · s_θ0,j] for registered observables, one entry per
    /// parameter coordinate.
    fn closed_form_score_correlation(
        &self,
        _obs: &Observable,
        _theta: &ParamVector,
    ) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form KL(P_θ0 ‖ P_θ), when available.
    fn closed_form_kl(&self, _theta0: &ParamVector, _theta: &ParamVector) -> Option<f64> {
        None
    }

    /// Closed-form Fisher information, when available.
    fn analytic_fisher(&self, _theta: &ParamVector) -> Option<DMatrix<f64>> {
        None
    }

    /// For 1-D models whose data law is a finite Gaussian mixture: the
    /// component list, enabling exact Gauss–Hermite integration per component.
    fn gauss_components(&self, _theta: &ParamVector) -> Option<Vec<GaussComponent>> {
        None
    }

    /// Affine standardization (center, scale) per data coordinate for
    /// Gaussian-tailed quadrature.
    fn quadrature_hint(&self, theta: &ParamVector) -> Vec<(f64, f64)> {
        let _ = theta;
        vec![(0.0, 1.0); self.data_dim()]
    }
}

/// log p_θ(x) with support and finiteness checks.
pub fn log_density(model: &dyn Model, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    model.validate_theta(theta)?;
    if !model.support().contains(x) {
        return Err(Error::OutOfSupport {
            model: model.name().to_string(),
            point: x.to_vec(),
        });
    }
    let lp = model.log_density(theta, x)?;
    if lp.is_nan() || lp == f64::INFINITY {
        return Err(Error::NonFinite {
            context: format!("log_density of `{}`", model.name()),
            theta: theta.values().to_vec(),
            x: x.to_vec(),
        });
    }
    Ok(lp)
}

/// Score s_θ(x) = ∇_θ log p_θ(x).
///
/// Uses the model's analytic score when registered, otherwise central finite
/// differences with one Richardson extrapolation level and relative step 1e-5.
pub fn score(model: &dyn Model, theta: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    model.validate_theta(theta)?;
    let s = match model.analytic_score(theta, x) {
        Some(s) => s,
        None => finite_difference_score(model, theta, x)?,
    };
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("score of `{}`", model.name()),
            theta: theta.values().to_vec(),
            x: x.to_vec(),
        });
    }
    Ok(s)
}

/// Finite-difference score, always available; used to cross-check analytic
/// score registrations.
pub fn finite_difference_score(
    model: &dyn Model,
    theta: &ParamVector,
    x: &[f64],
) -> Result<Vec<f64>> {
    let d = model.param_dim();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let h = 1e-5 * theta.values()[i].abs().max(1.0);
        let g = |step: f64| -> Result<f64> {
            log_density(model, &theta.perturbed(i, step), x)
        };
        // central difference at steps h and h/2, one Richardson level
        let dh = (g(h)? - g(-h)?) / (2.0 * h);
        let dh2 = (g(h / 2.0)? - g(-h / 2.0)?) / h;
        out.push((4.0 * dh2 - dh) / 3.0);
    }
    Ok(out)
}

/// Draws `n` i.i.d. points from P_θ, recording provenance.
pub fn sample(model: &dyn Model, theta: &ParamVector, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".to_string(),
        ));
    }
    model.validate_theta(theta)?;
    let points = model.sample_points(theta, n, seed)?;
    Ok(Dataset::new(points, seed, theta.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct UnitInterval;

    impl Model for UnitInterval {
        fn name(&self) -> &str {
            "unit-interval"
        }
        fn param_dim(&self) -> usize {
            1
        }
        fn data_dim(&self) -> usize {
            1
        }
        fn support(&self) -> Support {
            Support::Intervals(vec![(0.0, 1.0)])
        }
        fn log_density(&self, _theta: &ParamVector, _x: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
        fn sample_points(
            &self,
            _theta: &ParamVector,
            n: usize,
            _seed: u64,
        ) -> Result<Vec<Vec<f64>>> {
            Ok(vec![vec![0.5]; n])
        }
    }

    #[test]
    fn out_of_support_is_domain_error() {
        let m = UnitInterval;
        let theta = ParamVector::new(vec![0.0]).unwrap();
        let err = log_density(&m, &theta, &[2.0]).unwrap_err();
        assert!(matches!(err, Error::OutOfSupport { .. }));
    }

    #[test]
    fn empty_sample_rejected() {
        let m = UnitInterval;
        let theta = ParamVector::new(vec![0.0]).unwrap();
        assert!(matches!(
            sample(&m, &theta, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn param_vector_rejects_nan() {
        assert!(ParamVector::new(vec![0.0, f64::NAN]).is_err());
    }
}
