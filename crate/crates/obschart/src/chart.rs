//! Observables, charts, chart Jacobians, hidden directions, and the
//! first-order completeness check against the score kernel.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};
use crate::numerics::{
    expectation, fisher_information, map_jacobian, numeric_nullspace, score_correlation, Budget,
    ExpectationResult, NullspaceResult,
};

/// A Gaussian bump test function φ(x) = exp(−(x−center)²/2), width 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub center: f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        (-0.5 * d * d).exp()
    }
}

/// What an observable measures. Evaluation rules are pointwise functions of a
/// data vector, except cumulants, which are derived from raw moments of 1-D
/// data during expectation.
#[derive(Clone)]
pub enum ObservableKind {
    /// ∏ x_i^{d_i} over data coordinates.
    Monomial(Vec<u32>),
    /// k-th cumulant of 1-D data (κ₁ = mean, κ₂ = variance, ...).
    Cumulant(u32),
    /// y·φ(x) on regression data (x, y); expectation is the response E[f_θ(X)φ(X)].
    Response(TestFunction),
    /// Y_i X_j on regression data laid out as [x_1..x_q, y_1..y_p]; 1-based i, j.
    CrossMoment { i: usize, j: usize, x_dim: usize },
    /// Arbitrary pointwise functional, not serializable.
    Custom {
        name: String,
        eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableKind::Monomial(d) => write!(f, "Monomial({d:?})"),
            ObservableKind::Cumulant(k) => write!(f, "Cumulant({k})"),
            ObservableKind::Response(t) => write!(f, "Response(center={})", t.center),
            ObservableKind::CrossMoment { i, j, .. } => write!(f, "CrossMoment({i},{j})"),
            ObservableKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A named measurable functional of the data.
#[derive(Debug, Clone)]
pub struct Observable {
    id: String,
    pub kind: ObservableKind,
}

impl Observable {
    pub fn monomial(degrees: Vec<u32>) -> Self {
        let id = format!(
            "moment:{}",
            degrees
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        Self {
            id,
            kind: ObservableKind::Monomial(degrees),
        }
    }

    pub fn cumulant(order: u32) -> Self {
        Self {
            id: format!("cumulant:{order}"),
            kind: ObservableKind::Cumulant(order),
        }
    }

    pub fn response(center: f64) -> Self {
        Self {
            id: format!("response:bump:{center}"),
            kind: ObservableKind::Response(TestFunction { center }),
        }
    }

    pub fn cross_moment(i: usize, j: usize, x_dim: usize) -> Self {
        Self {
            id: format!("cross:{i},{j}"),
            kind: ObservableKind::CrossMoment { i, j, x_dim },
        }
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let name = name.into();
        Self {
            id: format!("custom:{name}"),
            kind: ObservableKind::Custom {
                name,
                eval: Arc::new(eval),
            },
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Pointwise evaluation x ↦ f(x); `None` for cumulants, which are not
    /// expectations of a fixed function.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            ObservableKind::Monomial(deg) => {
                let mut v = 1.0;
                for (xi, d) in x.iter().zip(deg) {
                    v *= xi.powi(*d as i32);
                }
                Some(v)
            }
            ObservableKind::Cumulant(_) => None,
            ObservableKind::Response(phi) => Some(x[1] * phi.eval(x[0])),
            ObservableKind::CrossMoment { i, j, x_dim } => Some(x[x_dim + i - 1] * x[j - 1]),
            ObservableKind::Custom { eval, .. } => Some(eval(x)),
        }
    }

    /// Tie-breaking hint for the chart builder: roughly the polynomial degree
    /// of the functional.
    pub fn degree_hint(&self) -> u32 {
        match &self.kind {
            ObservableKind::Monomial(deg) => deg.iter().sum(),
            ObservableKind::Cumulant(k) => *k,
            ObservableKind::Response(_) => 2,
            ObservableKind::CrossMoment { .. } => 2,
            ObservableKind::Custom { .. } => u32::MAX,
        }
    }

    /// Serialized form; round-trips through [`Observable::parse`]. Custom
    /// observables are not serializable.
    pub fn serialize(&self) -> Result<String> {
        if matches!(self.kind, ObservableKind::Custom { .. }) {
            return Err(Error::InvalidArgument(format!(
                "custom observable `{}` cannot be serialized",
                self.id
            )));
        }
        Ok(self.id.clone())
    }

    /// Parses an observable code. Accepted forms:
    /// `moment:d1,d2,...`, `cumulant:k` (aliases `m1`, `k1`..`k9`),
    /// `response:bump:<center>`, `cross:i,j`.
    /// `x_dim` supplies the data layout for cross-moments.
    pub fn parse(code: &str, x_dim: usize) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("observable `{code}`: {msg}"));
        let code = code.trim();
        // aliases: m1 is the mean, k<n> the n-th cumulant
        if code == "m1" {
            return Ok(Observable::cumulant(1));
        }
        if let Some(rest) = code.strip_prefix('k') {
            if let Ok(k) = rest.parse::<u32>() {
                if k >= 1 {
                    return Ok(Observable::cumulant(k));
                }
            }
        }
        if let Some(rest) = code.strip_prefix("moment:") {
            let degrees = rest
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("degrees must be non-negative integers"))?;
            if degrees.is_empty() {
                return Err(bad("empty degree vector"));
            }
            return Ok(Observable::monomial(degrees));
        }
        if let Some(rest) = code.strip_prefix("cumulant:") {
            let k: u32 = rest.parse().map_err(|_| bad("order must be an integer"))?;
            if k == 0 {
                return Err(bad("cumulant order must be at least 1"));
            }
            return Ok(Observable::cumulant(k));
        }
        if let Some(rest) = code.strip_prefix("response:bump:") {
            let c: f64 = rest.parse().map_err(|_| bad("bump center must be a number"))?;
            return Ok(Observable::response(c));
        }
        if let Some(rest) = code.strip_prefix("cross:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(bad("expected cross:i,j"));
            }
            let i: usize = parts[0].trim().parse().map_err(|_| bad("bad index i"))?;
            let j: usize = parts[1].trim().parse().map_err(|_| bad("bad index j"))?;
            if i == 0 || j == 0 {
                return Err(bad("cross-moment indices are 1-based"));
            }
            return Ok(Observable::cross_moment(i, j, x_dim));
        }
        Err(bad("unknown observable kind"))
    }
}

/// An ordered finite list of observables anchored at a reference point.
#[derive(Debug, Clone)]
pub struct Chart {
    observables: Vec<Observable>,
    reference_point: ParamVector,
}

impl Chart {
    pub fn new(observables: Vec<Observable>, reference_point: ParamVector) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for obs in &observables {
            if !seen.insert(obs.id().to_string()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate observable id `{}` in chart",
                    obs.id()
                )));
            }
        }
        Ok(Self {
            observables,
            reference_point,
        })
    }

    /// An empty chart (used as a builder seed).
    pub fn empty(reference_point: ParamVector) -> Self {
        Self {
            observables: Vec::new(),
            reference_point,
        }
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn reference_point(&self) -> &ParamVector {
        &self.reference_point
    }

    pub fn contains(&self, id: &str) -> bool {
        self.observables.iter().any(|o| o.id() == id)
    }

    /// Returns a new chart with `obs` appended.
    pub fn with_observable(&self, obs: Observable) -> Result<Self> {
        let mut observables = self.observables.clone();
        observables.push(obs);
        Chart::new(observables, self.reference_point.clone())
    }

    pub fn ids(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.id().to_string()).collect()
    }

    pub fn serialize(&self) -> Result<Vec<String>> {
        self.observables.iter().map(|o| o.serialize()).collect()
    }

    pub fn parse(codes: &[String], x_dim: usize, reference_point: ParamVector) -> Result<Self> {
        let observables = codes
            .iter()
            .map(|c| Observable::parse(c, x_dim))
            .collect::<Result<Vec<_>>>()?;
        Chart::new(observables, reference_point)
    }
}

/// Outcome of comparing the chart kernel with the score (Fisher) kernel.
#[derive(Debug, Clone)]
pub struct CompletenessVerdict {
    pub chart_kernel: NullspaceResult,
    pub score_kernel: NullspaceResult,
    pub complete: bool,
    /// Largest principal angle between the two kernels (radians); NaN when the
    /// dimensions differ.
    pub max_principal_angle: f64,
}

/// Angular tolerance for subspace equality tests.
pub const ANGLE_TOL: f64 = 1e-4;

/// Ψ(θ) with per-entry error estimates. Entry order follows the chart.
pub fn eval_chart(
    chart: &Chart,
    model: &dyn Model,
    theta: &ParamVector,
    budget: &Budget,
) -> Result<Vec<ExpectationResult>> {
    chart
        .observables()
        .iter()
        .map(|obs| {
            expectation(model, theta, obs, budget).map_err(|e| Error::Numeric {
                context: format!("eval_chart[{}]", obs.id()),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Chart values only, as a vector.
pub fn eval_chart_values(
    chart: &Chart,
    model: &dyn Model,
    theta: &ParamVector,
    budget: &Budget,
) -> Result<Vec<f64>> {
    Ok(eval_chart(chart, model, theta, budget)?
        .into_iter()
        .map(|r| r.value)
        .collect())
}

/// Chart Jacobian DΨ(θ0) and its route diagnostics.
#[derive(Debug, Clone)]
pub struct ChartJacobian {
    /// Finite-difference value (the reported Jacobian).
    pub matrix: DMatrix<f64>,
    /// Score-correlation route E[f_i s_j], where feasible.
    pub score_route: Option<DMatrix<f64>>,
    /// max_ij |score − fd| / max(1, ‖fd‖∞) between the two routes.
    pub route_discrepancy: Option<f64>,
    pub warnings: Vec<String>,
}

/// Computes DΨ(θ0) two ways: finite differences of `eval_chart` (reported)
/// and the score-correlation formula Dψ_f[v] = E[f · vᵀs] (diagnostic).
pub fn chart_jacobian(
    chart: &Chart,
    model: &dyn Model,
    theta0: &ParamVector,
    budget: &Budget,
) -> Result<ChartJacobian> {
    let fd = map_jacobian(
        |theta| eval_chart_values(chart, model, theta, budget),
        theta0,
        budget.fd_rel_step,
    )?;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(chart.len());
    let mut feasible = true;
    for obs in chart.observables() {
        match score_correlation(model, theta0, obs, budget) {
            Ok(Some(row)) => rows.push(row),
            Ok(None) => {
                feasible = false;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let mut warnings = Vec::new();
    let (score_route, route_discrepancy) = if feasible && chart.len() > 0 {
        let m = chart.len();
        let d = model.param_dim();
        let sr = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
        let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let disc = (&sr - &fd).iter().fold(0.0f64, |a, v| a.max(v.abs())) / scale;
        if disc > 1e-4 {
            warnings.push(format!(
                "chart Jacobian routes disagree: relative discrepancy {disc:.3e} exceeds 1e-4 \
                 (expectation accuracy shortfall)"
            ));
        }
        (Some(sr), Some(disc))
    } else {
        (None, None)
    };

    Ok(ChartJacobian {
        matrix: fd,
        score_route,
        route_discrepancy,
        warnings,
    })
}

/// Kernel of the chart Jacobian: parameter directions invisible to the chart
/// at first order.
pub fn hidden_directions(
    chart: &Chart,
    model: &dyn Model,
    theta0: &ParamVector,
    rel_tol: f64,
    budget: &Budget,
) -> Result<NullspaceResult> {
    let jac = chart_jacobian(chart, model, theta0, budget)?;
    Ok(numeric_nullspace(&jac.matrix, rel_tol))
}

/// Largest principal angle between two subspaces given by orthonormal bases.
/// Returns 0 for two empty bases and NaN when dimensions differ.
pub fn max_principal_angle(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::NAN;
    }
    if a.is_empty() {
        return 0.0;
    }
    let d = a[0].len();
    let qa = DMatrix::from_fn(d, a.len(), |i, j| a[j][i]);
    let qb = DMatrix::from_fn(d, b.len(), |i, j| b[j][i]);
    let m = qa.transpose() * qb;
    let svd = m.svd(false, false);
    let min_sigma = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, s| acc.min(*s));
    min_sigma.clamp(-1.0, 1.0).acos()
}

/// Compares ker DΨ(θ0) against the score kernel (null eigenspace of the
/// Fisher information). Complete iff equal dimension and max principal angle
/// within [`ANGLE_TOL`].
pub fn completeness_check(
    chart: &Chart,
    model: &dyn Model,
    theta0: &ParamVector,
    budget: &Budget,
) -> Result<CompletenessVerdict> {
    let chart_kernel = hidden_directions(chart, model, theta0, budget.jacobian_rank_tol, budget)?;
    let fisher = fisher_information(model, theta0, budget)?;
    let score_kernel = numeric_nullspace(&fisher, budget.fisher_rank_tol);
    let angle = max_principal_angle(&chart_kernel.basis, &score_kernel.basis);
    let complete = chart_kernel.basis.len() == score_kernel.basis.len() && angle <= ANGLE_TOL;
    Ok(CompletenessVerdict {
        chart_kernel,
        score_kernel,
        complete,
        max_principal_angle: angle,
    })
}

/// Rank of the Fisher information: the dimension of the identifiable tangent
/// space at θ0.
pub fn identifiable_rank(model: &dyn Model, theta0: &ParamVector, budget: &Budget) -> Result<usize> {
    let fisher = fisher_information(model, theta0, budget)?;
    let kernel = numeric_nullspace(&fisher, budget.fisher_rank_tol);
    Ok(model.param_dim() - kernel.basis.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observable_codes_round_trip() {
        for code in [
            "moment:1",
            "moment:2,0,1",
            "cumulant:3",
            "response:bump:-1",
            "cross:2,1",
        ] {
            let obs = Observable::parse(code, 2).unwrap();
            assert_eq!(obs.serialize().unwrap(), code);
        }
    }

    #[test]
    fn aliases_map_to_cumulants() {
        assert_eq!(Observable::parse("m1", 1).unwrap().id(), "cumulant:1");
        assert_eq!(Observable::parse("k3", 1).unwrap().id(), "cumulant:3");
    }

    #[test]
    fn chart_rejects_duplicate_ids() {
        let theta = ParamVector::new(vec![0.0]).unwrap();
        let err = Chart::new(
            vec![Observable::cumulant(2), Observable::cumulant(2)],
            theta,
        );
        assert!(err.is_err());
    }

    #[test]
    fn cross_moment_layout() {
        // data [x1, x2, y1, y2], cross:2,1 = y2 * x1
        let obs = Observable::cross_moment(2, 1, 2);
        assert_eq!(obs.eval(&[3.0, 5.0, 7.0, 11.0]), Some(33.0));
    }

    #[test]
    fn principal_angle_of_identical_spans() {
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        // same plane, rotated basis
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let f1 = DVector::from_vec(vec![r, r, 0.0]);
        let f2 = DVector::from_vec(vec![r, -r, 0.0]);
        let angle = max_principal_angle(&[e1, e2], &[f1, f2]);
        assert!(angle < 1e-7, "angle={angle}");
    }
}
