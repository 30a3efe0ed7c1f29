//! Job configs (TOML, strict), orchestration, and machine-readable reports
//! (sorted-key JSON plus per-arc CSV traces).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arc::{arc_chart_samples, arc_kl_samples, order_from_samples, Arc, GridSpec, Order, OrderEstimate};
use crate::builder::{build_chart, BuildOptions, BuildTrace, ObservablePool, TerminationReason};
use crate::chart::{chart_jacobian, completeness_check, Chart};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};
use crate::numerics::{fisher_information, numeric_nullspace, psd_rank, Budget};
use crate::zoo::{GmmModel, RrrModel, TanhUnitModel};

pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Job configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub model: ModelConfig,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    #[serde(default)]
    pub builder: Option<BuilderSpec>,
    #[serde(default)]
    pub arcs: Vec<ArcSpec>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default)]
    pub outputs: Option<OutputsConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of `gmm`, `tanh`, `rrr`.
    pub kind: String,
    /// Model hyperparameters; keys validated strictly per kind.
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    /// Observable codes, e.g. `["m1", "k2", "k3"]` or `["cross:1,1"]`.
    pub observables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderSpec {
    #[serde(default)]
    pub pool: Option<PoolSpec>,
    #[serde(default = "default_target_order")]
    pub target_order: i64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_target_order() -> i64 {
    4
}

fn default_max_iterations() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    /// `cumulants` or `regression`.
    pub kind: String,
    #[serde(default)]
    pub max_order: Option<u32>,
    #[serde(default)]
    pub bump_centers: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub id: String,
    /// Coefficient vectors c_1..c_K of γ(t) = θ0 + Σ c_k t^k.
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub ratio: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub floor: Option<f64>,
}

impl GridConfig {
    pub fn to_grid(&self) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            t0: self.t0.unwrap_or(d.t0),
            ratio: self.ratio.unwrap_or(d.ratio),
            count: self.count.unwrap_or(d.count),
            floor: self.floor.unwrap_or(d.floor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default)]
    pub quad_nodes: Option<usize>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub fd_rel_step: Option<f64>,
    #[serde(default)]
    pub jacobian_rank_tol: Option<f64>,
    #[serde(default)]
    pub fisher_rank_tol: Option<f64>,
}

impl BudgetConfig {
    pub fn to_budget(&self, seed: u64) -> Budget {
        let d = Budget::default();
        Budget {
            quad_nodes: self.quad_nodes.unwrap_or(d.quad_nodes),
            mc_samples: self.mc_samples.unwrap_or(d.mc_samples),
            seed,
            fd_rel_step: self.fd_rel_step.unwrap_or(d.fd_rel_step),
            jacobian_rank_tol: self.jacobian_rank_tol.unwrap_or(d.jacobian_rank_tol),
            fisher_rank_tol: self.fisher_rank_tol.unwrap_or(d.fisher_rank_tol),
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    /// Report destination (JSON).
    #[serde(default)]
    pub report: Option<String>,
    /// Directory for per-arc CSV traces.
    #[serde(default)]
    pub trace_dir: Option<String>,
}

impl JobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.chart, &self.builder) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "job must specify exactly one of [chart] and [builder]; both present".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "job must specify exactly one of [chart] and [builder]; neither present".into(),
                ))
            }
            _ => {}
        }
        // params strictness lives in the per-kind typed structs; surface it here
        // so a corrupted [model.params] key fails at parse time, not at run time
        let handle = build_model(&self.model)?;
        let d = self.theta0.len();
        if d != handle.model.param_dim() {
            return Err(Error::Config(format!(
                "theta0 has dimension {d}, model `{}` expects {}",
                self.model.kind,
                handle.model.param_dim()
            )));
        }
        for arc in &self.arcs {
            for (k, c) in arc.coefficients.iter().enumerate() {
                if c.len() != d {
                    return Err(Error::Config(format!(
                        "arcs.{}: coefficient c_{} has dimension {}, theta0 has dimension {d}",
                        arc.id,
                        k + 1,
                        c.len()
                    )));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for arc in &self.arcs {
            if !seen.insert(arc.id.as_str()) {
                return Err(Error::Config(format!("duplicate arc id `{}`", arc.id)));
            }
        }
        if let Some(g) = &self.grid {
            let spec = g.to_grid();
            if !(spec.t0 > 0.0 && spec.t0.is_finite()) {
                return Err(Error::Config(format!("grid.t0 must be positive, got {}", spec.t0)));
            }
            if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
                return Err(Error::Config(format!(
                    "grid.ratio must lie in (0, 1), got {}",
                    spec.ratio
                )));
            }
            if spec.count < 2 {
                return Err(Error::Config(format!(
                    "grid.count must be at least 2, got {}",
                    spec.count
                )));
            }
            if !(spec.floor > 0.0) {
                return Err(Error::Config(format!(
                    "grid.floor must be positive, got {}",
                    spec.floor
                )));
            }
        }
        if let Some(b) = &self.budget {
            let budget = b.to_budget(self.seed);
            if budget.quad_nodes < 2 {
                return Err(Error::Config(format!(
                    "budget.quad_nodes must be at least 2, got {}",
                    budget.quad_nodes
                )));
            }
            if budget.mc_samples < 2 {
                return Err(Error::Config(format!(
                    "budget.mc_samples must be at least 2, got {}",
                    budget.mc_samples
                )));
            }
            if !(budget.fd_rel_step > 0.0) {
                return Err(Error::Config(format!(
                    "budget.fd_rel_step must be positive, got {}",
                    budget.fd_rel_step
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML job document (strict: unknown keys rejected).
pub fn parse_config(text: &str) -> Result<JobConfig> {
    let job: JobConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    job.validate()?;
    Ok(job)
}

pub fn load_job(path: &Path) -> Result<JobConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmParams {
    #[serde(default = "one")]
    sigma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TanhParams {
    #[serde(default = "one")]
    noise_std: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RrrParams {
    p: usize,
    q: usize,
    rank: usize,
    /// Row-major q×q input covariance; identity when omitted.
    #[serde(default)]
    sigma_x: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

/// A constructed model plus the layout facts the config layer needs.
pub struct ModelHandle {
    pub model: Box<dyn Model>,
    /// Number of input coordinates preceding the outputs in a data vector
    /// (used to resolve cross-moment observables).
    pub x_dim: usize,
    pub default_pool: ObservablePool,
}

fn typed_params<'de, T: Deserialize<'de>>(kind: &str, params: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(params))
        .map_err(|e| Error::Config(format!("model.params for `{kind}`: {e}")))
}

pub fn build_model(cfg: &ModelConfig) -> Result<ModelHandle> {
    match cfg.kind.as_str() {
        "gmm" => {
            let p: GmmParams = typed_params("gmm", cfg.params.clone())?;
            Ok(ModelHandle {
                model: Box::new(GmmModel::new(p.sigma)?),
                x_dim: 1,
                default_pool: ObservablePool::cumulants_up_to(6),
            })
        }
        "tanh" => {
            let p: TanhParams = typed_params("tanh", cfg.params.clone())?;
            Ok(ModelHandle {
                model: Box::new(TanhUnitModel::new(p.noise_std)?),
                x_dim: 1,
                default_pool: ObservablePool::regression(
                    1,
                    1,
                    &ObservablePool::DEFAULT_BUMP_CENTERS,
                ),
            })
        }
        "rrr" => {
            let p: RrrParams = typed_params("rrr", cfg.params.clone())?;
            let sigma_x = match p.sigma_x {
                None => None,
                Some(flat) => {
                    if flat.len() != p.q * p.q {
                        return Err(Error::Config(format!(
                            "model.params.sigma_x has {} entries, expected q*q = {}",
                            flat.len(),
                            p.q * p.q
                        )));
                    }
                    Some(nalgebra::DMatrix::from_row_slice(p.q, p.q, &flat))
                }
            };
            Ok(ModelHandle {
                model: Box::new(RrrModel::new(p.p, p.q, p.rank, sigma_x)?),
                x_dim: p.q,
                default_pool: ObservablePool::regression(
                    p.p,
                    p.q,
                    &ObservablePool::DEFAULT_BUMP_CENTERS,
                ),
            })
        }
        other => Err(Error::Config(format!(
            "unknown model kind `{other}` (expected gmm, tanh, or rrr)"
        ))),
    }
}

/// Resolves the builder pool for a job (explicit spec or model default).
pub fn resolve_pool(spec: Option<&PoolSpec>, handle: &ModelHandle) -> Result<ObservablePool> {
    match spec {
        None => Ok(handle.default_pool.clone()),
        Some(p) => match p.kind.as_str() {
            "cumulants" => Ok(ObservablePool::cumulants_up_to(p.max_order.unwrap_or(6))),
            "regression" => {
                let centers = p
                    .bump_centers
                    .clone()
                    .unwrap_or_else(|| ObservablePool::DEFAULT_BUMP_CENTERS.to_vec());
                // reuse the model's cross-moment layout from its default pool,
                // swapping the bump family
                let mut candidates: Vec<_> = handle
                    .default_pool
                    .candidates()
                    .iter()
                    .filter(|o| o.id().starts_with("cross:"))
                    .cloned()
                    .collect();
                if handle.x_dim == 1 && handle.model.data_dim() == 2 {
                    for c in centers {
                        candidates.push(crate::chart::Observable::response(c));
                    }
                }
                ObservablePool::new(candidates)
            }
            other => Err(Error::Config(format!(
                "unknown pool kind `{other}` (expected cumulants or regression)"
            ))),
        },
    }
}

// ---------------------------------------------------------------------------
// Report types (serializable mirrors of the analysis results)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderRepr {
    Finite(i64),
    Infinite,
}

impl From<Order> for OrderRepr {
    fn from(o: Order) -> Self {
        match o {
            Order::Finite(k) => OrderRepr::Finite(k),
            Order::Infinite => OrderRepr::Infinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimateReport {
    pub order: OrderRepr,
    /// `None` when every grid magnitude sat below the floor.
    pub raw_slope: Option<f64>,
    pub residual: f64,
    pub leading_coeff_mag: f64,
    pub grid: Vec<f64>,
    pub floor_hit: bool,
    pub dropped_points: usize,
}

impl From<&OrderEstimate> for OrderEstimateReport {
    fn from(e: &OrderEstimate) -> Self {
        Self {
            order: e.order.into(),
            raw_slope: if e.raw_slope.is_finite() {
                Some(e.raw_slope)
            } else {
                None
            },
            residual: e.residual,
            leading_coeff_mag: e.leading_coeff_mag,
            grid: e.grid.clone(),
            floor_hit: e.floor_hit,
            dropped_points: e.dropped_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl MatrixReport {
    pub fn from_dmatrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub complete: bool,
    /// `None` when the kernels have different dimensions.
    pub max_principal_angle: Option<f64>,
    pub chart_kernel_dim: usize,
    pub score_kernel_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckReport {
    pub observable_order: OrderEstimateReport,
    pub kl_order: OrderEstimateReport,
    pub inequality_holds: bool,
    pub equality_holds: Option<bool>,
    pub chart_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRowReport {
    pub t: f64,
    pub chart_delta_magnitude: f64,
    pub kl_value: f64,
    /// Worst method used across the row's expectations.
    pub expectation_method: String,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcReport {
    pub arc_id: String,
    pub coefficients: Vec<Vec<f64>>,
    /// `None` when an order came back undetermined (see `error`).
    pub check: Option<TheoremCheckReport>,
    pub error: Option<String>,
    pub trace: Vec<TraceRowReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionProbeReport {
    pub direction: Vec<f64>,
    pub order: Option<OrderRepr>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOrderReport {
    pub observable_id: String,
    pub degree_hint: u32,
    pub order: OrderRepr,
    pub arc_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddedObservableReport {
    pub observable_id: String,
    pub order: i64,
    pub arc_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub chart_ids: Vec<String>,
    pub kernel_dim: usize,
    pub kernel_basis: Vec<Vec<f64>>,
    pub probes: Vec<DirectionProbeReport>,
    pub candidates: Vec<CandidateOrderReport>,
    pub skipped: Vec<String>,
    pub added: Option<AddedObservableReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildTraceReport {
    pub iterations: Vec<IterationReport>,
    pub terminated_reason: String,
}

impl From<&BuildTrace> for BuildTraceReport {
    fn from(t: &BuildTrace) -> Self {
        Self {
            iterations: t
                .iterations
                .iter()
                .map(|it| IterationReport {
                    chart_ids: it.chart_ids.clone(),
                    kernel_dim: it.kernel_dim,
                    kernel_basis: it.kernel_basis.clone(),
                    probes: it
                        .probes
                        .iter()
                        .map(|p| DirectionProbeReport {
                            direction: p.direction.clone(),
                            order: p.order.map(Into::into),
                            note: p.note.clone(),
                        })
                        .collect(),
                    candidates: it
                        .candidates
                        .iter()
                        .map(|c| CandidateOrderReport {
                            observable_id: c.observable_id.clone(),
                            degree_hint: c.degree_hint,
                            order: c.order.into(),
                            arc_label: c.arc_label.clone(),
                        })
                        .collect(),
                    skipped: it.skipped.clone(),
                    added: it.added.as_ref().map(|a| AddedObservableReport {
                        observable_id: a.observable_id.clone(),
                        order: a.order,
                        arc_label: a.arc_label.clone(),
                    }),
                })
                .collect(),
            terminated_reason: t.terminated_reason.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartReport {
    pub observables: Vec<String>,
    pub reference_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool_version: String,
    pub job: JobConfig,
    pub chart: ChartReport,
    pub jacobian: MatrixReport,
    pub jacobian_singular_values: Vec<f64>,
    /// Relative disagreement between the finite-difference and
    /// score-correlation Jacobian routes, when both were computed.
    pub score_route_discrepancy: Option<f64>,
    pub fisher: MatrixReport,
    pub fisher_rank: usize,
    pub hidden_directions: Vec<Vec<f64>>,
    pub completeness: CompletenessReport,
    pub arcs: Vec<ArcReport>,
    pub build_trace: Option<BuildTraceReport>,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

fn stage_done(name: &str, start: Instant) {
    eprintln!("[obschart] stage {name}: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
}

/// Executes a validated job end to end. Deterministic given the job's seed;
/// per-arc undetermined orders are recorded as warnings and the run continues.
pub fn run_job(job: &JobConfig) -> Result<AnalysisReport> {
    job.validate()?;
    let handle = build_model(&job.model)?;
    let model = handle.model.as_ref();
    let theta0 = ParamVector::new(job.theta0.clone())?;
    model.validate_theta(&theta0)?;
    let budget = job
        .budget
        .clone()
        .unwrap_or(BudgetConfig {
            quad_nodes: None,
            mc_samples: None,
            fd_rel_step: None,
            jacobian_rank_tol: None,
            fisher_rank_tol: None,
        })
        .to_budget(job.seed);
    let grid = job.grid.clone().map(|g| g.to_grid()).unwrap_or_default();
    let mut warnings: Vec<String> = Vec::new();

    // chart: parsed from the spec, or produced by the builder
    let stage = Instant::now();
    let (chart, build_trace) = match (&job.chart, &job.builder) {
        (Some(spec), None) => (
            Chart::parse(&spec.observables, handle.x_dim, theta0.clone())?,
            None,
        ),
        (None, Some(spec)) => {
            let pool = resolve_pool(spec.pool.as_ref(), &handle)?;
            let opts = BuildOptions {
                target_order: spec.target_order,
                max_iterations: spec.max_iterations,
                grid: grid.clone(),
            };
            let (chart, trace) =
                build_chart(model, &theta0, &pool, Chart::empty(theta0.clone()), &opts, &budget)?;
            if trace.terminated_reason == TerminationReason::MaxIterations {
                warnings.push("builder stopped at max_iterations".into());
            }
            (chart, Some(trace))
        }
        _ => unreachable!("validated: exactly one of chart/builder"),
    };
    stage_done("chart", stage);

    // local geometry at the reference point
    let stage = Instant::now();
    let jac = chart_jacobian(&chart, model, &theta0, &budget)?;
    warnings.extend(jac.warnings.iter().cloned());
    let kernel = numeric_nullspace(&jac.matrix, budget.jacobian_rank_tol);
    let fisher = fisher_information(model, &theta0, &budget)?;
    let fisher_rank = psd_rank(&fisher, budget.fisher_rank_tol);
    let verdict = completeness_check(&chart, model, &theta0, &budget)?;
    stage_done("geometry", stage);

    // per-arc order analysis
    let stage = Instant::now();
    let mut arc_reports = Vec::with_capacity(job.arcs.len());
    for spec in &job.arcs {
        let arc = Arc::new(theta0.clone(), spec.coefficients.clone())?;
        let (chart_pts, chart_dropped) = arc_chart_samples(&chart, model, &arc, &grid, &budget)?;
        let (kl_pts, kl_dropped) = arc_kl_samples(model, &arc, &grid, &budget)?;
        let mut trace = Vec::new();
        for (cp, kp) in chart_pts.iter().zip(&kl_pts) {
            if cp.t != kp.t {
                return Err(Error::Numeric {
                    context: "run_job".into(),
                    reason: format!(
                        "arc `{}`: chart and KL traces drop different grid points",
                        spec.id
                    ),
                });
            }
            trace.push(TraceRowReport {
                t: cp.t,
                chart_delta_magnitude: cp.magnitude,
                kl_value: kp.magnitude,
                expectation_method: cp.method.max(kp.method).to_string(),
                error_estimate: cp.error_estimate.max(kp.error_estimate),
            });
        }
        let obs_samples: Vec<(f64, f64)> = chart_pts.iter().map(|p| (p.t, p.magnitude)).collect();
        let kl_samples: Vec<(f64, f64)> = kl_pts.iter().map(|p| (p.t, p.magnitude)).collect();
        let (check, error) = match (
            order_from_samples(&obs_samples, grid.floor),
            order_from_samples(&kl_samples, grid.floor),
        ) {
            (Ok(mut obs_est), Ok(mut kl_est)) => {
                obs_est.dropped_points = chart_dropped;
                kl_est.dropped_points = kl_dropped;
                let (inequality_holds, equality_holds) =
                    crate::arc::judge_orders(&obs_est.order, &kl_est.order);
                (
                    Some(TheoremCheckReport {
                        observable_order: (&obs_est).into(),
                        kl_order: (&kl_est).into(),
                        inequality_holds,
                        equality_holds,
                        chart_complete: verdict.complete,
                    }),
                    None,
                )
            }
            (obs_r, kl_r) => {
                let mut msgs = Vec::new();
                if let Err(e) = obs_r {
                    msgs.push(format!("observable order: {e}"));
                }
                if let Err(e) = kl_r {
                    msgs.push(format!("KL order: {e}"));
                }
                let msg = msgs.join("; ");
                warnings.push(format!("arc `{}`: {msg}", spec.id));
                (None, Some(msg))
            }
        };
        arc_reports.push(ArcReport {
            arc_id: spec.id.clone(),
            coefficients: spec.coefficients.clone(),
            check,
            error,
            trace,
        });
    }
    stage_done("arcs", stage);

    Ok(AnalysisReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        job: job.clone(),
        chart: ChartReport {
            observables: chart.serialize()?,
            reference_point: theta0.values().to_vec(),
        },
        jacobian: MatrixReport::from_dmatrix(&jac.matrix),
        jacobian_singular_values: kernel.singular_values.clone(),
        score_route_discrepancy: jac.route_discrepancy,
        fisher: MatrixReport::from_dmatrix(&fisher),
        fisher_rank,
        hidden_directions: kernel
            .basis
            .iter()
            .map(|b| b.iter().cloned().collect())
            .collect(),
        completeness: CompletenessReport {
            complete: verdict.complete,
            max_principal_angle: if verdict.max_principal_angle.is_finite() {
                Some(verdict.max_principal_angle)
            } else {
                None
            },
            chart_kernel_dim: verdict.chart_kernel.kernel_dim(),
            score_kernel_dim: verdict.score_kernel.kernel_dim(),
        },
        arcs: arc_reports,
        build_trace: build_trace.as_ref().map(Into::into),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// Serializes a report to JSON with sorted keys (byte-deterministic for a
/// given report value).
pub fn report_to_json(report: &AnalysisReport) -> Result<String> {
    let value = serde_json::to_value(report).map_err(|e| Error::Numeric {
        context: "report_to_json".into(),
        reason: e.to_string(),
    })?;
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Numeric {
        context: "report_to_json".into(),
        reason: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<AnalysisReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Writes the JSON report and per-arc CSV traces per the job's `[outputs]`
/// section; returns the paths written.
pub fn emit_report(report: &AnalysisReport, outputs: &OutputsConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(dest) = &outputs.report {
        let path = PathBuf::from(dest);
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io_err(&path))?;
            }
        }
        let mut f = std::fs::File::create(&path).map_err(io_err(&path))?;
        f.write_all(report_to_json(report)?.as_bytes())
            .map_err(io_err(&path))?;
        written.push(path);
    }
    if let Some(dir) = &outputs.trace_dir {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for arc in &report.arcs {
            let path = dir.join(format!("{}.csv", arc.arc_id));
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e),
            })?;
            w.write_record([
                "t",
                "chart_delta_magnitude",
                "kl_value",
                "expectation_method",
                "error_estimate",
            ])
            .map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: std::io::Error::other(e),
            })?;
            for row in &arc.trace {
                w.write_record([
                    format!("{}", row.t),
                    format!("{}", row.chart_delta_magnitude),
                    format!("{}", row.kl_value),
                    row.expectation_method.clone(),
                    format!("{}", row.error_estimate),
                ])
                .map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(e),
                })?;
            }
            w.flush().map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_GMM: &str = r#"
schema_version = 1
theta0 = [0.0, 0.0, 0.0]

[model]
kind = "gmm"

[chart]
observables = ["m1", "k2", "k3"]

[[arcs]]
id = "e_mu"
coefficients = [[1.0, 0.0, 0.0]]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let job = parse_config(MINIMAL_GMM).unwrap();
        assert_eq!(job.seed, 0);
        assert_eq!(job.schema_version, 1);
        assert!(job.builder.is_none());
        assert_eq!(job.arcs.len(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL_GMM.replace("[chart]", "typo_key = 1\n[chart]");
        assert!(matches!(parse_config(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn chart_and_builder_are_mutually_exclusive() {
        let text = format!("{MINIMAL_GMM}\n[builder]\ntarget_order = 4\n");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn missing_both_chart_and_builder_rejected() {
        let text = MINIMAL_GMM.replace("[chart]\nobservables = [\"m1\", \"k2\", \"k3\"]\n", "");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn unknown_model_kind_is_a_config_error() {
        let text = MINIMAL_GMM.replace("kind = \"gmm\"", "kind = \"mystery\"");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_model_param_rejected() {
        let text = MINIMAL_GMM.replace("kind = \"gmm\"", "kind = \"gmm\"\n[model.params]\nwat = 2");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn arc_dimension_mismatch_rejected() {
        let text = MINIMAL_GMM.replace("[[1.0, 0.0, 0.0]]", "[[1.0, 0.0]]");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }
}
