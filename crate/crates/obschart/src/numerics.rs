//! Shared numerical kernels: expectations (closed form / quadrature / Monte
//! Carlo), KL divergence, finite-difference Jacobians, and SVD-based rank and
//! nullspace detection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chart::{Observable, ObservableKind};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};
use crate::quad::GaussHermite;

/// How an expectation was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        };
        f.write_str(s)
    }
}

/// Accuracy configuration shared by all stochastic and quadrature kernels.
/// All randomness is seeded; there is no global RNG state.
#[derive(Debug, Clone)]
pub struct Budget {
    /// Gauss–Hermite node count (per dimension).
    pub quad_nodes: usize,
    /// Monte Carlo sample count for models outside quadrature reach.
    pub mc_samples: usize,
    /// Seed for every Monte Carlo draw issued under this budget.
    pub seed: u64,
    /// Relative finite-difference step for Jacobians.
    pub fd_rel_step: f64,
    /// Relative singular-value threshold for Jacobian rank decisions.
    pub jacobian_rank_tol: f64,
    /// Relative eigenvalue threshold for Fisher rank decisions.
    pub fisher_rank_tol: f64,
    /// Skip registered closed forms (used by oracle-equivalence tests to force
    /// the independent quadrature route).
    pub disable_closed_form: bool,
    /// Warn when a Monte Carlo standard error exceeds this.
    pub mc_warn_tol: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            quad_nodes: 200,
            mc_samples: 100_000,
            seed: 0,
            fd_rel_step: 1e-5,
            jacobian_rank_tol: 1e-8,
            fisher_rank_tol: 1e-6,
            disable_closed_form: false,
            mc_warn_tol: None,
        }
    }
}

impl Budget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// An expectation value with provenance.
#[derive(Debug, Clone)]
pub struct ExpectationResult {
    pub value: f64,
    pub method: Method,
    /// Absolute error estimate (standard error for Monte Carlo).
    pub error_estimate: f64,
    pub n_evals: usize,
    pub warning: Option<String>,
}

impl ExpectationResult {
    fn closed_form(value: f64) -> Self {
        Self {
            value,
            method: Method::ClosedForm,
            error_estimate: 1e-15 * (1.0 + value.abs()),
            n_evals: 0,
            warning: None,
        }
    }
}

/// Quadrature abscissae with effective weights such that
/// ∫ g(x) p_θ(x) dx ≈ Σ w_i g(x_i). Supports data_dim ≤ 2.
fn density_nodes(
    model: &dyn Model,
    theta: &ParamVector,
    n: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    if let Some(components) = model.gauss_components(theta) {
        let rule = GaussHermite::rule(n);
        let mut out = Vec::with_capacity(components.len() * n);
        for c in &components {
            let s = std::f64::consts::SQRT_2 * c.std_dev;
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((vec![c.mean + s * z], c.weight * w * inv_sqrt_pi));
            }
        }
        return Ok(out);
    }
    let hint = model.quadrature_hint(theta);
    match model.data_dim() {
        1 => {
            let rule = GaussHermite::rule(n);
            let (center, scale) = hint[0];
            let s = std::f64::consts::SQRT_2 * scale;
            let ln_s = s.ln();
            let mut out = Vec::with_capacity(n);
            for (i, z) in rule.nodes.iter().enumerate() {
                let x = vec![center + s * z];
                let lp = model.log_density(theta, &x)?;
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let w = (rule.ln_weights[i] + z * z + lp + ln_s).exp();
                out.push((x, w));
            }
            Ok(out)
        }
        2 => {
            let rule = GaussHermite::rule(n);
            let (c0, s0) = hint[0];
            let (c1, s1) = hint[1];
            let a0 = std::f64::consts::SQRT_2 * s0;
            let a1 = std::f64::consts::SQRT_2 * s1;
            let ln_jac = (a0 * a1).ln();
            let mut out = Vec::with_capacity(n * n);
            for (i, zi) in rule.nodes.iter().enumerate() {
                for (j, zj) in rule.nodes.iter().enumerate() {
                    let x = vec![c0 + a0 * zi, c1 + a1 * zj];
                    let lp = model.log_density(theta, &x)?;
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    let w = (rule.ln_weights[i] + zi * zi + rule.ln_weights[j] + zj * zj + lp
                        + ln_jac)
                        .exp();
                    out.push((x, w));
                }
            }
            Ok(out)
        }
        d => Err(Error::Numeric {
            context: "density_nodes".to_string(),
            reason: format!("quadrature not supported for data_dim={d}"),
        }),
    }
}

/// Quadrature expectation of a pointwise function with a refinement-based
/// error estimate.
fn quadrature_expectation(
    model: &dyn Model,
    theta: &ParamVector,
    g: &dyn Fn(&[f64]) -> f64,
    budget: &Budget,
) -> Result<ExpectationResult> {
    let full = density_nodes(model, theta, budget.quad_nodes)?;
    let half = density_nodes(model, theta, (budget.quad_nodes / 2).max(2))?;
    let sum = |nodes: &[(Vec<f64>, f64)]| nodes.iter().map(|(x, w)| w * g(x)).sum::<f64>();
    let value = sum(&full);
    let coarse = sum(&half);
    let n_evals = full.len() + half.len();
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "quadrature expectation".to_string(),
            theta: theta.values().to_vec(),
            x: vec![],
        });
    }
    Ok(ExpectationResult {
        value,
        method: Method::Quadrature,
        error_estimate: (value - coarse).abs().max(1e-15 * (1.0 + value.abs())),
        n_evals,
        warning: None,
    })
}

fn monte_carlo_expectation(
    model: &dyn Model,
    theta: &ParamVector,
    g: &dyn Fn(&[f64]) -> f64,
    budget: &Budget,
) -> Result<ExpectationResult> {
    let n = budget.mc_samples.max(2);
    let points = model.sample_points(theta, n, budget.seed)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for x in &points {
        let v = g(x);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let se = (var / n as f64).sqrt();
    let warning = match budget.mc_warn_tol {
        Some(tol) if se > tol => Some(format!(
            "monte carlo standard error {se:.3e} exceeds requested tolerance {tol:.3e}"
        )),
        _ => None,
    };
    Ok(ExpectationResult {
        value: mean,
        method: Method::MonteCarlo,
        error_estimate: se,
        n_evals: n,
        warning,
    })
}

/// Expectation of a pointwise function, quadrature when the data dimension
/// allows it, Monte Carlo otherwise.
fn pointwise_expectation(
    model: &dyn Model,
    theta: &ParamVector,
    g: &dyn Fn(&[f64]) -> f64,
    budget: &Budget,
) -> Result<ExpectationResult> {
    if model.data_dim() <= 2 {
        quadrature_expectation(model, theta, g, budget)
    } else {
        monte_carlo_expectation(model, theta, g, budget)
    }
}

/// Raw moment E[x^k] of 1-D data.
fn raw_moment(
    model: &dyn Model,
    theta: &ParamVector,
    k: u32,
    budget: &Budget,
) -> Result<ExpectationResult> {
    let obs = Observable::monomial(vec![k]);
    if !budget.disable_closed_form {
        if let Some(v) = model.closed_form_expectation(&obs, theta) {
            return Ok(ExpectationResult::closed_form(v));
        }
    }
    pointwise_expectation(model, theta, &|x: &[f64]| x[0].powi(k as i32), budget)
}

/// Cumulants κ_1..κ_K from raw moments m_1..m_K, together with the gradient
/// ∂κ_n/∂m_l used for error propagation and score-correlation chain rules.
///
/// Recursion: κ_n = m_n − Σ_{j=1}^{n-1} C(n−1, j−1) κ_j m_{n−j}.
pub fn cumulants_from_moments(moments: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let k = moments.len();
    let mut kappa = vec![0.0; k];
    let mut grad = DMatrix::<f64>::zeros(k, k);
    for n in 1..=k {
        let mut value = moments[n - 1];
        let mut row = DVector::<f64>::zeros(k);
        row[n - 1] = 1.0;
        for j in 1..n {
            let c = binomial(n - 1, j - 1);
            value -= c * kappa[j - 1] * moments[n - j - 1];
            for l in 0..k {
                row[l] -= c * grad[(j - 1, l)] * moments[n - j - 1];
            }
            row[n - j - 1] -= c * kappa[j - 1];
        }
        kappa[n - 1] = value;
        for l in 0..k {
            grad[(n - 1, l)] = row[l];
        }
    }
    (kappa, grad)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// E_θ[f] with dispatch: registered closed form, then quadrature for
/// data_dim ≤ 2, then seeded Monte Carlo.
pub fn expectation(
    model: &dyn Model,
    theta: &ParamVector,
    obs: &Observable,
    budget: &Budget,
) -> Result<ExpectationResult> {
    model.validate_theta(theta)?;
    if !budget.disable_closed_form {
        if let Some(v) = model.closed_form_expectation(obs, theta) {
            return Ok(ExpectationResult::closed_form(v));
        }
    }
    if let ObservableKind::Cumulant(k) = &obs.kind {
        if model.data_dim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "cumulant observables require 1-D data; model `{}` has data_dim={}",
                model.name(),
                model.data_dim()
            )));
        }
        let k = *k as usize;
        let mut moments = Vec::with_capacity(k);
        let mut errs = Vec::with_capacity(k);
        let mut method = Method::ClosedForm;
        let mut n_evals = 0;
        let mut warning = None;
        for order in 1..=k {
            let r = raw_moment(model, theta, order as u32, budget)?;
            method = method.max(r.method);
            n_evals += r.n_evals;
            if warning.is_none() {
                warning = r.warning.clone();
            }
            moments.push(r.value);
            errs.push(r.error_estimate);
        }
        let (kappa, grad) = cumulants_from_moments(&moments);
        let error_estimate: f64 = (0..k).map(|l| grad[(k - 1, l)].abs() * errs[l]).sum();
        return Ok(ExpectationResult {
            value: kappa[k - 1],
            method,
            error_estimate,
            n_evals,
            warning,
        });
    }
    let eval = obs.clone();
    pointwise_expectation(
        model,
        theta,
        &move |x: &[f64]| eval.eval(x).expect("pointwise observable"),
        budget,
    )
}

/// Score-correlation derivative route: the vector E_θ0[f · s_θ0,j], j = 1..d.
///
/// Returns `Ok(None)` when no accurate route exists (data_dim > 2 without a
/// registered closed form); Monte Carlo is deliberately not used here since
/// this route serves as an accuracy diagnostic.
pub fn score_correlation(
    model: &dyn Model,
    theta0: &ParamVector,
    obs: &Observable,
    budget: &Budget,
) -> Result<Option<Vec<f64>>> {
    if !budget.disable_closed_form {
        if let Some(v) = model.closed_form_score_correlation(obs, theta0) {
            return Ok(Some(v));
        }
    }
    if model.data_dim() > 2 {
        return Ok(None);
    }
    let d = model.param_dim();
    if let ObservableKind::Cumulant(k) = &obs.kind {
        let k = *k as usize;
        // chain rule through the moment sequence: dκ = (∂κ/∂m) · dm,
        // dm_l[j] = E[x^l s_j]
        let mut moments = Vec::with_capacity(k);
        for order in 1..=k {
            moments.push(raw_moment(model, theta0, order as u32, budget)?.value);
        }
        let (_, grad) = cumulants_from_moments(&moments);
        let nodes = density_nodes(model, theta0, budget.quad_nodes)?;
        let mut dm = vec![vec![0.0; d]; k];
        for (x, w) in &nodes {
            let s = crate::model::score(model, theta0, x)?;
            let mut xp = 1.0;
            for row in dm.iter_mut() {
                xp *= x[0];
                for (target, sj) in row.iter_mut().zip(&s) {
                    *target += w * xp * sj;
                }
            }
        }
        let mut out = vec![0.0; d];
        for (l, row) in dm.iter().enumerate() {
            let g = grad[(k - 1, l)];
            for (o, v) in out.iter_mut().zip(row) {
                *o += g * v;
            }
        }
        return Ok(Some(out));
    }
    let nodes = density_nodes(model, theta0, budget.quad_nodes)?;
    let mut out = vec![0.0; d];
    for (x, w) in &nodes {
        let f = obs.eval(x).expect("pointwise observable");
        let s = crate::model::score(model, theta0, x)?;
        for (o, sj) in out.iter_mut().zip(&s) {
            *o += w * f * sj;
        }
    }
    Ok(Some(out))
}

/// KL(P_θ0 ‖ P_θ). Dispatch: registered closed form, quadrature of
/// p0·log(p0/pθ) for data_dim ≤ 2, Monte Carlo under P_θ0 otherwise.
/// Small negative results within the error estimate clamp to 0 with a flag.
pub fn kl_divergence(
    model: &dyn Model,
    theta0: &ParamVector,
    theta: &ParamVector,
    budget: &Budget,
) -> Result<ExpectationResult> {
    model.validate_theta(theta0)?;
    model.validate_theta(theta)?;
    if !budget.disable_closed_form {
        if let Some(v) = model.closed_form_kl(theta0, theta) {
            return Ok(ExpectationResult::closed_form(v));
        }
    }
    let mut result = if model.data_dim() <= 2 {
        let integrate = |n: usize| -> Result<(f64, usize)> {
            let nodes = density_nodes(model, theta0, n)?;
            let mut acc = 0.0;
            for (x, w) in &nodes {
                let lp0 = model.log_density(theta0, x)?;
                let lpt = model.log_density(theta, x)?;
                if lpt == f64::NEG_INFINITY && *w > 0.0 {
                    return Err(Error::Numeric {
                        context: "kl_divergence".to_string(),
                        reason: format!("target density vanishes at x={x:?} inside the support of P_theta0"),
                    });
                }
                acc += w * (lp0 - lpt);
            }
            Ok((acc, nodes.len()))
        };
        let (value, n1) = integrate(budget.quad_nodes)?;
        let (coarse, n2) = integrate((budget.quad_nodes / 2).max(2))?;
        ExpectationResult {
            value,
            method: Method::Quadrature,
            error_estimate: (value - coarse).abs().max(1e-14 * (1.0 + value.abs())),
            n_evals: n1 + n2,
            warning: None,
        }
    } else {
        let n = budget.mc_samples.max(2);
        let points = model.sample_points(theta0, n, budget.seed)?;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for x in &points {
            let v = model.log_density(theta0, x)? - model.log_density(theta, x)?;
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        ExpectationResult {
            value: mean,
            method: Method::MonteCarlo,
            error_estimate: (var / n as f64).sqrt(),
            n_evals: n,
            warning: None,
        }
    };
    if result.value < 0.0 {
        let slack = result.error_estimate.max(1e-12);
        if result.value >= -slack {
            result.warning = Some(format!(
                "KL estimate {:.3e} negative within error estimate; clamped to 0",
                result.value
            ));
            result.value = 0.0;
        } else {
            return Err(Error::Numeric {
                context: "kl_divergence".to_string(),
                reason: format!(
                    "KL estimate {:.3e} is negative beyond the error estimate {:.3e}",
                    result.value, result.error_estimate
                ),
            });
        }
    }
    Ok(result)
}

/// Jacobian of an arbitrary map θ ↦ ℝ^m by central differences with one
/// Richardson extrapolation level and per-coordinate relative step.
pub fn map_jacobian(
    map: impl Fn(&ParamVector) -> Result<Vec<f64>>,
    theta0: &ParamVector,
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let base = map(theta0)?;
    let m = base.len();
    let d = theta0.dim();
    let mut jac = DMatrix::<f64>::zeros(m, d);
    for col in 0..d {
        let h = rel_step * theta0.values()[col].abs().max(1.0);
        let fp = map(&theta0.perturbed(col, h))?;
        let fm = map(&theta0.perturbed(col, -h))?;
        let fph = map(&theta0.perturbed(col, h / 2.0))?;
        let fmh = map(&theta0.perturbed(col, -h / 2.0))?;
        for row in 0..m {
            let dh = (fp[row] - fm[row]) / (2.0 * h);
            let dh2 = (fph[row] - fmh[row]) / h;
            let v = (4.0 * dh2 - dh) / 3.0;
            if !v.is_finite() {
                return Err(Error::Numeric {
                    context: "map_jacobian".to_string(),
                    reason: format!("non-finite entry at (row {row}, column {col})"),
                });
            }
            jac[(row, col)] = v;
        }
    }
    Ok(jac)
}

/// Orthonormal kernel basis with the singular values that justify it.
#[derive(Debug, Clone)]
pub struct NullspaceResult {
    /// Mutually orthonormal kernel basis vectors.
    pub basis: Vec<DVector<f64>>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    /// Relative threshold requested.
    pub rel_tolerance: f64,
    /// Largest singular value.
    pub sigma_max: f64,
    /// Absolute cut applied: rel_tolerance · sigma_max.
    pub tolerance_used: f64,
}

impl NullspaceResult {
    pub fn kernel_dim(&self) -> usize {
        self.basis.len()
    }
}

/// SVD-based kernel detection: right-singular vectors whose singular value is
/// at most `rel_tol · σ_max`. A zero map yields the whole space.
pub fn numeric_nullspace(j: &DMatrix<f64>, rel_tol: f64) -> NullspaceResult {
    let d = j.ncols();
    let m = j.nrows();
    if d == 0 {
        return NullspaceResult {
            basis: vec![],
            singular_values: vec![],
            rel_tolerance: rel_tol,
            sigma_max: 0.0,
            tolerance_used: 0.0,
        };
    }
    // pad with zero rows so the thin SVD still produces all d right-singular
    // vectors when m < d
    let padded = if m < d {
        let mut p = DMatrix::<f64>::zeros(d, d);
        p.view_mut((0, 0), (m, d)).copy_from(j);
        p
    } else {
        j.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut pairs: Vec<(f64, DVector<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, v_t.row(i).transpose()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let sigma_max = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let cut = rel_tol * sigma_max;
    let basis: Vec<DVector<f64>> = pairs
        .iter()
        .filter(|(s, _)| *s <= cut || sigma_max == 0.0)
        .map(|(_, v)| v.clone())
        .collect();
    NullspaceResult {
        singular_values: pairs.iter().map(|p| p.0).collect(),
        basis,
        rel_tolerance: rel_tol,
        sigma_max,
        tolerance_used: cut,
    }
}

/// Fisher information I(θ0) = E[s sᵀ]: analytic registration, else quadrature
/// for data_dim ≤ 2, else Monte Carlo. Symmetrized; eigenvalues below
/// −1e-8·max(1, λ_max) signal a score or integration bug and raise an error.
pub fn fisher_information(
    model: &dyn Model,
    theta0: &ParamVector,
    budget: &Budget,
) -> Result<DMatrix<f64>> {
    model.validate_theta(theta0)?;
    let d = model.param_dim();
    let raw = if let Some(f) = model.analytic_fisher(theta0) {
        f
    } else if model.data_dim() <= 2 {
        let nodes = density_nodes(model, theta0, budget.quad_nodes)?;
        let mut acc = DMatrix::<f64>::zeros(d, d);
        for (x, w) in &nodes {
            let s = crate::model::score(model, theta0, x)?;
            for i in 0..d {
                for j in 0..d {
                    acc[(i, j)] += w * s[i] * s[j];
                }
            }
        }
        acc
    } else {
        let n = budget.mc_samples.max(2);
        let points = model.sample_points(theta0, n, budget.seed)?;
        let mut acc = DMatrix::<f64>::zeros(d, d);
        for x in &points {
            let s = crate::model::score(model, theta0, x)?;
            for i in 0..d {
                for j in 0..d {
                    acc[(i, j)] += s[i] * s[j];
                }
            }
        }
        acc / n as f64
    };
    let sym = (&raw + raw.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    let lambda_min = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.min(*v));
    if lambda_min < -1e-8 * lambda_max.max(1.0) {
        return Err(Error::Numeric {
            context: "fisher_information".to_string(),
            reason: format!(
                "matrix indefinite beyond tolerance: lambda_min={lambda_min:.3e}, lambda_max={lambda_max:.3e}"
            ),
        });
    }
    Ok(sym)
}

/// Rank of a symmetric PSD matrix at a relative eigenvalue threshold.
pub fn psd_rank(f: &DMatrix<f64>, rel_tol: f64) -> usize {
    let eig = SymmetricEigen::new(f.clone());
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    if lambda_max == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|l| **l > rel_tol * lambda_max)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nullspace_of_identity_is_empty() {
        let j = DMatrix::<f64>::identity(3, 3);
        let ns = numeric_nullspace(&j, 1e-8);
        assert!(ns.basis.is_empty());
        assert_eq!(ns.singular_values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn nullspace_of_zero_map_is_everything() {
        let j = DMatrix::<f64>::zeros(2, 3);
        let ns = numeric_nullspace(&j, 1e-8);
        assert_eq!(ns.basis.len(), 3);
        // orthonormality
        for (i, a) in ns.basis.iter().enumerate() {
            for (j2, b) in ns.basis.iter().enumerate() {
                let dot = a.dot(b);
                let want = if i == j2 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn nullspace_wide_matrix_kernel_certificate() {
        // 1x3 row [1, 1, 0]: kernel is 2-dimensional
        let j = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = numeric_nullspace(&j, 1e-8);
        assert_eq!(ns.basis.len(), 2);
        for v in &ns.basis {
            let norm = (&j * v).norm();
            assert!(norm <= ns.rel_tolerance * ns.sigma_max * (3.0f64).sqrt());
        }
    }

    #[test]
    fn jacobian_of_linear_map_is_exact() {
        let a = [[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        let theta = ParamVector::new(vec![0.3, -0.7, 1.1]).unwrap();
        let jac = map_jacobian(
            |t| {
                Ok(a.iter()
                    .map(|row| row.iter().zip(t.values()).map(|(c, v)| c * v).sum())
                    .collect())
            },
            &theta,
            1e-5,
        )
        .unwrap();
        for (i, row) in a.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                assert_abs_diff_eq!(jac[(i, j)], *c, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn jacobian_of_constant_map_is_zero() {
        let theta = ParamVector::new(vec![1.0, 2.0]).unwrap();
        let jac = map_jacobian(|_| Ok(vec![4.0, 5.0, 6.0]), &theta, 1e-5).unwrap();
        assert!(jac.iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn cumulants_match_hand_formulas() {
        // raw moments of N(mu, 1) with mu = 0.7
        let mu: f64 = 0.7;
        let m = [mu, mu * mu + 1.0, mu.powi(3) + 3.0 * mu, mu.powi(4) + 6.0 * mu * mu + 3.0];
        let (kappa, _) = cumulants_from_moments(&m);
        assert_abs_diff_eq!(kappa[0], mu, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa[3], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn cumulant_gradient_matches_finite_differences() {
        let m = [0.3, 1.4, 0.9, 5.0];
        let (_, grad) = cumulants_from_moments(&m);
        let h = 1e-6;
        for l in 0..4 {
            let mut mp = m;
            mp[l] += h;
            let mut mm = m;
            mm[l] -= h;
            let (kp, _) = cumulants_from_moments(&mp);
            let (km, _) = cumulants_from_moments(&mm);
            for n in 0..4 {
                let fd = (kp[n] - km[n]) / (2.0 * h);
                assert_abs_diff_eq!(grad[(n, l)], fd, epsilon = 1e-6);
            }
        }
    }
}
