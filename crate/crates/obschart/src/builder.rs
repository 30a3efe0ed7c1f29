//! Iterative chart construction: find hidden directions, probe them with
//! linear and quadratic arcs, and greedily add pool observables that become
//! visible at the lowest finite order.

use std::collections::BTreeMap;

use crate::arc::{observable_order, Arc, GridSpec, Order, OrderEstimate};
use crate::chart::{chart_jacobian, Chart, Observable};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};
use crate::numerics::{numeric_nullspace, Budget};

/// Deterministically ordered candidate observables for the builder.
#[derive(Debug, Clone)]
pub struct ObservablePool {
    candidates: Vec<Observable>,
}

impl ObservablePool {
    pub fn new(candidates: Vec<Observable>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for obs in &candidates {
            if !seen.insert(obs.id().to_string()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate observable id `{}` in pool",
                    obs.id()
                )));
            }
        }
        Ok(Self { candidates })
    }

    /// Default pool for 1-D models: cumulants κ₁..κ_max.
    pub fn cumulants_up_to(max_order: u32) -> Self {
        Self {
            candidates: (1..=max_order).map(Observable::cumulant).collect(),
        }
    }

    /// Default pool for regression models with data laid out as
    /// [x_1..x_q, y_1..y_p]: all cross-moments Y_iX_j, plus (for scalar
    /// regression) responses against bumps at the given centers.
    pub fn regression(p: usize, q: usize, bump_centers: &[f64]) -> Self {
        let mut candidates = Vec::new();
        for i in 1..=p {
            for j in 1..=q {
                candidates.push(Observable::cross_moment(i, j, q));
            }
        }
        if p == 1 && q == 1 {
            for &c in bump_centers {
                candidates.push(Observable::response(c));
            }
        }
        Self { candidates }
    }

    /// The fixed 5-bump center grid used by default regression pools.
    pub const DEFAULT_BUMP_CENTERS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

    pub fn candidates(&self) -> &[Observable] {
        &self.candidates
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Why the builder loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// ker DΨ = 0: every direction visible at first order.
    KernelEmpty,
    /// Every kernel direction has finite chart order ≤ target along its
    /// linear probe arc.
    TargetOrderReached,
    /// No remaining candidate reveals anything (or pool empty).
    PoolExhausted,
    MaxIterations,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::KernelEmpty => "kernel_empty",
            TerminationReason::TargetOrderReached => "target_order_reached",
            TerminationReason::PoolExhausted => "pool_exhausted",
            TerminationReason::MaxIterations => "max_iterations",
        };
        f.write_str(s)
    }
}

/// Order of the current chart along one kernel direction's linear arc.
#[derive(Debug, Clone)]
pub struct DirectionProbe {
    pub direction: Vec<f64>,
    /// `None` when the slope fit came back undetermined.
    pub order: Option<Order>,
    pub note: Option<String>,
}

impl DirectionProbe {
    /// Revealed means a finite chart order ≤ `target_order` along the
    /// direction's linear arc.
    pub fn revealed(&self, target_order: i64) -> bool {
        matches!(self.order, Some(Order::Finite(k)) if k <= target_order)
    }
}

/// Best (lowest finite) order found for one candidate across the iteration's
/// probe arcs.
#[derive(Debug, Clone)]
pub struct CandidateOrder {
    pub observable_id: String,
    pub degree_hint: u32,
    /// `Order::Infinite` when the candidate never moved on any probe arc.
    pub order: Order,
    /// Label of the probe arc achieving the order (empty for infinite).
    pub arc_label: String,
}

#[derive(Debug, Clone)]
pub struct AddedObservable {
    pub observable_id: String,
    pub order: i64,
    pub arc_label: String,
}

/// One builder iteration: the chart going in, the kernel found, the probes,
/// the candidate table, and what got added.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub chart_ids: Vec<String>,
    pub kernel_dim: usize,
    pub kernel_basis: Vec<Vec<f64>>,
    pub probes: Vec<DirectionProbe>,
    pub candidates: Vec<CandidateOrder>,
    /// Per-candidate-per-arc undetermined fits, logged and skipped.
    pub skipped: Vec<String>,
    pub added: Option<AddedObservable>,
}

#[derive(Debug, Clone)]
pub struct BuildTrace {
    pub iterations: Vec<IterationRecord>,
    pub terminated_reason: TerminationReason,
}

/// Builder configuration; `target_order` is the order bound under which a
/// probed direction counts as revealed.
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub target_order: i64,
    pub max_iterations: usize,
    pub grid: GridSpec,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            target_order: 4,
            max_iterations: 20,
            grid: GridSpec::default(),
        }
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Probe arcs for one kernel direction: the linear arc plus quadratic
/// corrections t·v + t²·e_j over every coordinate direction.
fn probe_arcs(theta0: &ParamVector, v: &[f64], label: usize) -> Vec<(String, Arc)> {
    let d = theta0.dim();
    let mut arcs = Vec::with_capacity(d + 1);
    arcs.push((
        format!("linear[v{label}]"),
        Arc::linear(theta0.clone(), v.to_vec()).expect("dims match"),
    ));
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        arcs.push((
            format!("quad[v{label}+e{j}]"),
            Arc::new(theta0.clone(), vec![v.to_vec(), e]).expect("dims match"),
        ));
    }
    arcs
}

/// Order of a single observable's displacement along an arc.
fn single_observable_order(
    obs: &Observable,
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<OrderEstimate> {
    let chart = Chart::new(vec![obs.clone()], arc.base_point().clone())?;
    observable_order(&chart, model, arc, grid, budget)
}

/// Outcome of probing one candidate along one direction's linear arc.
#[derive(Debug, Clone)]
pub enum ProbeEntry {
    Order(OrderEstimate),
    Undetermined(String),
}

/// Per-candidate order of vanishing along the linear arc γ_v(t) = θ0 + t·v.
/// Undetermined slope fits are recorded, not fatal.
pub fn probe_direction(
    model: &dyn Model,
    theta0: &ParamVector,
    v: &[f64],
    pool: &ObservablePool,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<BTreeMap<String, ProbeEntry>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "probe direction must be a unit vector, got norm {norm}"
        )));
    }
    let arc = Arc::linear(theta0.clone(), v.to_vec())?;
    let mut out = BTreeMap::new();
    for obs in pool.candidates() {
        let entry = match single_observable_order(obs, model, &arc, grid, budget) {
            Ok(est) => ProbeEntry::Order(est),
            Err(Error::Undetermined {
                slope,
                nearest,
                residual,
                ..
            }) => ProbeEntry::Undetermined(format!(
                "slope {slope:.4} (nearest {nearest}, residual {residual:.4})"
            )),
            Err(e) => return Err(e),
        };
        out.insert(obs.id().to_string(), entry);
    }
    Ok(out)
}

/// Runs the iterative construction loop from `seed_chart` and returns the
/// final chart with its full trace. A direction counts as revealed when the
/// chart's order along its linear arc is finite and ≤ `target_order`;
/// quadratic probe arcs serve candidate discovery only.
pub fn build_chart(
    model: &dyn Model,
    theta0: &ParamVector,
    pool: &ObservablePool,
    seed_chart: Chart,
    opts: &BuildOptions,
    budget: &Budget,
) -> Result<(Chart, BuildTrace)> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("observable pool is empty".into()));
    }
    let mut chart = seed_chart;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut reason = TerminationReason::MaxIterations;

    for _ in 0..opts.max_iterations {
        let jac = chart_jacobian(&chart, model, theta0, budget)?;
        let kernel = numeric_nullspace(&jac.matrix, budget.jacobian_rank_tol);
        let mut record = IterationRecord {
            chart_ids: chart.ids(),
            kernel_dim: kernel.kernel_dim(),
            kernel_basis: kernel
                .basis
                .iter()
                .map(|b| b.iter().cloned().collect())
                .collect(),
            probes: Vec::new(),
            candidates: Vec::new(),
            skipped: Vec::new(),
            added: None,
        };

        if kernel.basis.is_empty() {
            reason = TerminationReason::KernelEmpty;
            iterations.push(record);
            break;
        }

        // step 3a: chart order along each kernel direction's linear arc
        for b in &kernel.basis {
            let v = unit(b.as_slice());
            let arc = Arc::linear(theta0.clone(), v.clone())?;
            let probe = if chart.is_empty() {
                DirectionProbe {
                    direction: v,
                    order: Some(Order::Infinite),
                    note: Some("empty chart".into()),
                }
            } else {
                match observable_order(&chart, model, &arc, &opts.grid, budget) {
                    Ok(est) => DirectionProbe {
                        direction: v,
                        order: Some(est.order),
                        note: None,
                    },
                    Err(Error::Undetermined {
                        slope, residual, ..
                    }) => DirectionProbe {
                        direction: v,
                        order: None,
                        note: Some(format!(
                            "undetermined chart order: slope {slope:.4}, residual {residual:.4}"
                        )),
                    },
                    Err(e) => return Err(e),
                }
            };
            record.probes.push(probe);
        }
        if record.probes.iter().all(|p| p.revealed(opts.target_order)) {
            reason = TerminationReason::TargetOrderReached;
            iterations.push(record);
            break;
        }

        // step 3b/4: probe arcs and the candidate order table
        let mut arcs: Vec<(String, Arc)> = Vec::new();
        for (i, b) in kernel.basis.iter().enumerate() {
            arcs.extend(probe_arcs(theta0, &unit(b.as_slice()), i));
        }
        let remaining: Vec<&Observable> = pool
            .candidates()
            .iter()
            .filter(|o| !chart.contains(o.id()))
            .collect();
        let mut best: Option<(i64, u32, usize)> = None; // (order, degree, pool index)
        for (pool_idx, obs) in remaining.iter().enumerate() {
            let mut cand = CandidateOrder {
                observable_id: obs.id().to_string(),
                degree_hint: obs.degree_hint(),
                order: Order::Infinite,
                arc_label: String::new(),
            };
            for (label, arc) in &arcs {
                match single_observable_order(obs, model, arc, &opts.grid, budget) {
                    Ok(est) => {
                        if let Order::Finite(k) = est.order {
                            let better = match cand.order {
                                Order::Finite(cur) => k < cur,
                                Order::Infinite => true,
                            };
                            if better {
                                cand.order = Order::Finite(k);
                                cand.arc_label = label.clone();
                            }
                        }
                    }
                    Err(Error::Undetermined {
                        slope, residual, ..
                    }) => record.skipped.push(format!(
                        "{}@{}: undetermined (slope {:.4}, residual {:.4})",
                        obs.id(),
                        label,
                        slope,
                        residual
                    )),
                    Err(e) => return Err(e),
                }
            }
            if let Order::Finite(k) = cand.order {
                let key = (k, cand.degree_hint, pool_idx);
                if best.map_or(true, |b| key < b) {
                    best = Some(key);
                }
            }
            record.candidates.push(cand);
        }

        match best {
            None => {
                reason = TerminationReason::PoolExhausted;
                iterations.push(record);
                break;
            }
            Some((order, degree, pool_idx)) => {
                let obs = remaining[pool_idx].clone();
                debug_assert_eq!(obs.degree_hint(), degree);
                let winner = record
                    .candidates
                    .iter()
                    .find(|c| c.observable_id == obs.id())
                    .expect("winner in candidate table");
                record.added = Some(AddedObservable {
                    observable_id: obs.id().to_string(),
                    order,
                    arc_label: winner.arc_label.clone(),
                });
                chart = chart.with_observable(obs)?;
                iterations.push(record);
            }
        }
    }

    Ok((
        chart,
        BuildTrace {
            iterations,
            terminated_reason: reason,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussComponent, Model, ParamVector, Support};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    /// Gaussian location family N(θ, 1): regular, one identifiable direction.
    #[derive(Debug)]
    struct GaussLocation;

    impl Model for GaussLocation {
        fn name(&self) -> &str {
            "gauss_location"
        }
        fn param_dim(&self) -> usize {
            1
        }
        fn data_dim(&self) -> usize {
            1
        }
        fn support(&self) -> Support {
            Support::RealSpace { dim: 1 }
        }
        fn log_density(&self, theta: &ParamVector, x: &[f64]) -> crate::error::Result<f64> {
            let d = x[0] - theta.values()[0];
            Ok(-0.5 * d * d - 0.9189385332046727)
        }
        fn sample_points(
            &self,
            theta: &ParamVector,
            n: usize,
            seed: u64,
        ) -> crate::error::Result<Vec<Vec<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = theta.values()[0];
            Ok((0..n)
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    vec![mu + z]
                })
                .collect())
        }
        fn analytic_score(&self, theta: &ParamVector, x: &[f64]) -> Option<Vec<f64>> {
            Some(vec![x[0] - theta.values()[0]])
        }
        fn gauss_components(&self, theta: &ParamVector) -> Option<Vec<GaussComponent>> {
            Some(vec![GaussComponent {
                weight: 1.0,
                mean: theta.values()[0],
                std_dev: 1.0,
            }])
        }
    }

    #[test]
    fn regular_family_stops_after_one_addition() {
        let model = GaussLocation;
        let theta0 = ParamVector::new(vec![0.3]).unwrap();
        let pool = ObservablePool::new(vec![
            Observable::monomial(vec![1]),
            Observable::monomial(vec![2]),
        ])
        .unwrap();
        let (chart, trace) = build_chart(
            &model,
            &theta0,
            &pool,
            Chart::empty(theta0.clone()),
            &BuildOptions::default(),
            &Budget::default(),
        )
        .unwrap();
        assert_eq!(trace.terminated_reason, TerminationReason::KernelEmpty);
        assert_eq!(chart.ids(), vec!["moment:1"]);
        // first iteration: whole-space kernel, adds the mean at order 1
        let added = trace.iterations[0].added.as_ref().unwrap();
        assert_eq!(added.observable_id, "moment:1");
        assert_eq!(added.order, 1);
    }

    #[test]
    fn kernel_dim_is_monotone() {
        let model = GaussLocation;
        let theta0 = ParamVector::new(vec![0.0]).unwrap();
        let pool = ObservablePool::cumulants_up_to(2);
        let (_, trace) = build_chart(
            &model,
            &theta0,
            &pool,
            Chart::empty(theta0.clone()),
            &BuildOptions::default(),
            &Budget::default(),
        )
        .unwrap();
        for w in trace.iterations.windows(2) {
            assert!(w[1].kernel_dim <= w[0].kernel_dim);
        }
    }

    #[test]
    fn probe_direction_requires_unit_vector() {
        let model = GaussLocation;
        let theta0 = ParamVector::new(vec![0.0]).unwrap();
        let pool = ObservablePool::cumulants_up_to(2);
        let err = probe_direction(
            &model,
            &theta0,
            &[2.0],
            &pool,
            &GridSpec::default(),
            &Budget::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_pool_is_rejected() {
        let model = GaussLocation;
        let theta0 = ParamVector::new(vec![0.0]).unwrap();
        let pool = ObservablePool::new(vec![]).unwrap();
        assert!(build_chart(
            &model,
            &theta0,
            &pool,
            Chart::empty(theta0.clone()),
            &BuildOptions::default(),
            &Budget::default(),
        )
        .is_err());
    }
}
