//! Analytic arcs through parameter space, order-of-vanishing estimation, and
//! the order-inequality check (KL order ≥ 2 × observable order).

use crate::chart::{completeness_check, eval_chart, Chart};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector};
use crate::numerics::{kl_divergence, Budget, Method};

/// An analytic curve γ(t) = θ0 + Σ_k c_k t^k given by coefficient vectors.
#[derive(Debug, Clone)]
pub struct Arc {
    base_point: ParamVector,
    /// c_1 .. c_K, each of the parameter dimension.
    coefficients: Vec<Vec<f64>>,
}

impl Arc {
    pub fn new(base_point: ParamVector, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let d = base_point.dim();
        for (k, c) in coefficients.iter().enumerate() {
            if c.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "arc coefficient c_{} has dimension {}, expected {}",
                    k + 1,
                    c.len(),
                    d
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "arc coefficient c_{} has non-finite entries",
                    k + 1
                )));
            }
        }
        Ok(Self {
            base_point,
            coefficients,
        })
    }

    /// The constant arc γ(t) ≡ θ0.
    pub fn constant(base_point: ParamVector) -> Self {
        Self {
            base_point,
            coefficients: Vec::new(),
        }
    }

    /// Linear arc θ0 + t·v.
    pub fn linear(base_point: ParamVector, direction: Vec<f64>) -> Result<Self> {
        Arc::new(base_point, vec![direction])
    }

    pub fn base_point(&self) -> &ParamVector {
        &self.base_point
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn max_degree(&self) -> usize {
        self.coefficients.len()
    }

    /// γ(t) by Horner evaluation.
    pub fn eval(&self, t: f64) -> ParamVector {
        let d = self.base_point.dim();
        let mut acc = vec![0.0; d];
        for c in self.coefficients.iter().rev() {
            for i in 0..d {
                acc[i] = acc[i] * t + c[i];
            }
        }
        let values: Vec<f64> = self
            .base_point
            .values()
            .iter()
            .zip(&acc)
            .map(|(b, a)| b + a * t)
            .collect();
        ParamVector::new(values).expect("finite arc point")
    }

    /// The time-substituted arc t ↦ γ(t²); finite orders double exactly.
    pub fn reparameterized_square(&self) -> Self {
        let d = self.base_point.dim();
        let mut coefficients = vec![vec![0.0; d]; 2 * self.coefficients.len()];
        for (k, c) in self.coefficients.iter().enumerate() {
            coefficients[2 * k + 1] = c.clone();
        }
        Self {
            base_point: self.base_point.clone(),
            coefficients,
        }
    }
}

/// Geometric evaluation grid t_j = t0·ratio^j with a numeric floor below
/// which magnitudes count as zero.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
    pub floor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0: 0.1,
            ratio: 0.5,
            count: 10,
            floor: 1e-10,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.t0 * self.ratio.powi(j as i32)).collect()
    }

    pub fn halved(&self) -> Self {
        Self {
            t0: self.t0 / 2.0,
            ..self.clone()
        }
    }
}

/// Estimated order of vanishing at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(i64),
    Infinite,
}

impl Order {
    pub fn is_finite(&self) -> bool {
        matches!(self, Order::Finite(_))
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinite => write!(f, "INFINITE"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrderEstimate {
    pub order: Order,
    /// Log-log least-squares slope (NaN when everything sat below the floor).
    pub raw_slope: f64,
    /// Max absolute deviation of the fit, in log10 units.
    pub residual: f64,
    /// Magnitude of the leading coefficient, from the fit intercept.
    pub leading_coeff_mag: f64,
    /// t values that entered the fit.
    pub grid: Vec<f64>,
    /// Whether any evaluated magnitude fell below the floor.
    pub floor_hit: bool,
    /// Grid points dropped because the arc left the parameter domain.
    pub dropped_points: usize,
}

/// One evaluated grid point along an arc, kept for trace export.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub t: f64,
    pub magnitude: f64,
    pub method: Method,
    pub error_estimate: f64,
}

/// Gate requiring expectation accuracy to beat the detection floor: Monte
/// Carlo backed magnitudes need floor ≥ 10× their standard error.
fn check_accuracy_floor(method: Method, error_estimate: f64, floor: f64, what: &str) -> Result<()> {
    if method == Method::MonteCarlo && floor < 10.0 * error_estimate {
        return Err(Error::Config(format!(
            "{what}: Monte Carlo standard error {error_estimate:.3e} cannot resolve the order \
             floor {floor:.3e}; need floor >= 10x the standard error (raise mc_samples or the floor)"
        )));
    }
    Ok(())
}

/// Fits the order of vanishing from (t, magnitude) samples.
///
/// Discards magnitudes below the floor, fits log10‖g‖ against log10 t by
/// least squares, and rounds the slope to the nearest integer. All samples
/// below the floor means infinite order. A slope that fails the rounding gate
/// (|slope − k| ≤ 0.15) or residual gate (≤ 0.1) is an `Undetermined` error.
pub fn order_from_samples(samples: &[(f64, f64)], floor: f64) -> Result<OrderEstimate> {
    order_from_samples_with_drops(samples, floor, 0)
}

fn order_from_samples_with_drops(
    samples: &[(f64, f64)],
    floor: f64,
    dropped_points: usize,
) -> Result<OrderEstimate> {
    let floor_hit = samples.iter().any(|(_, m)| *m < floor);
    let live: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, m)| *m >= floor)
        .cloned()
        .collect();
    if live.is_empty() {
        return Ok(OrderEstimate {
            order: Order::Infinite,
            raw_slope: f64::NAN,
            residual: 0.0,
            leading_coeff_mag: 0.0,
            grid: samples.iter().map(|(t, _)| *t).collect(),
            floor_hit: true,
            dropped_points,
        });
    }
    if live.len() < 2 {
        return Err(Error::Undetermined {
            slope: f64::NAN,
            nearest: 0,
            residual: f64::NAN,
            n_points: live.len(),
        });
    }
    let xs: Vec<f64> = live.iter().map(|(t, _)| t.log10()).collect();
    let ys: Vec<f64> = live.iter().map(|(_, m)| m.log10()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (slope * x + intercept - y).abs())
        .fold(0.0f64, f64::max);
    let nearest = slope.round() as i64;
    if nearest < 1 || (slope - nearest as f64).abs() > 0.15 || residual > 0.1 {
        return Err(Error::Undetermined {
            slope,
            nearest,
            residual,
            n_points: live.len(),
        });
    }
    Ok(OrderEstimate {
        order: Order::Finite(nearest),
        raw_slope: slope,
        residual,
        leading_coeff_mag: 10f64.powf(intercept),
        grid: live.iter().map(|(t, _)| *t).collect(),
        floor_hit,
        dropped_points,
    })
}

/// Order of vanishing of a vector-valued curve g with g(0) = 0 (the caller
/// subtracts the base value), measured in the sup norm on the grid.
pub fn order_of_vanishing(
    mut g: impl FnMut(f64) -> Result<Vec<f64>>,
    grid: &GridSpec,
) -> Result<OrderEstimate> {
    let mut samples = Vec::with_capacity(grid.count);
    for t in grid.points() {
        let v = g(t)?;
        let mag = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        samples.push((t, mag));
    }
    order_from_samples(&samples, grid.floor)
}

/// Chart displacement samples Ψ(γ(t)) − Ψ(θ0) along the grid, with per-point
/// provenance; in-domain grid points only (out-of-domain points are dropped
/// and counted).
pub fn arc_chart_samples(
    chart: &Chart,
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<(Vec<TracePoint>, usize)> {
    let base = eval_chart(chart, model, arc.base_point(), budget)?;
    for (obs, entry) in chart.observables().iter().zip(&base) {
        check_accuracy_floor(
            entry.method,
            entry.error_estimate,
            grid.floor,
            &format!("observable order of `{}`", obs.id()),
        )?;
    }
    let base_values: Vec<f64> = base.iter().map(|r| r.value).collect();
    let mut out = Vec::with_capacity(grid.count);
    let mut dropped = 0usize;
    for t in grid.points() {
        let theta = arc.eval(t);
        if model.validate_theta(&theta).is_err() {
            dropped += 1;
            continue;
        }
        let entries = eval_chart(chart, model, &theta, budget)?;
        let mut mag = 0.0f64;
        let mut err = 0.0f64;
        let mut method = Method::ClosedForm;
        for (entry, b) in entries.iter().zip(&base_values) {
            mag = mag.max((entry.value - b).abs());
            err = err.max(entry.error_estimate);
            method = method.max(entry.method);
        }
        out.push(TracePoint {
            t,
            magnitude: mag,
            method,
            error_estimate: err,
        });
    }
    Ok((out, dropped))
}

/// Observable order o_Ψ(γ): order of vanishing of Ψ(γ(t)) − Ψ(θ0).
pub fn observable_order(
    chart: &Chart,
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<OrderEstimate> {
    let (points, dropped) = arc_chart_samples(chart, model, arc, grid, budget)?;
    let samples: Vec<(f64, f64)> = points.iter().map(|p| (p.t, p.magnitude)).collect();
    order_from_samples_with_drops(&samples, grid.floor, dropped)
}

/// KL samples t ↦ KL(P_θ0 ‖ P_γ(t)) along the grid.
pub fn arc_kl_samples(
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<(Vec<TracePoint>, usize)> {
    let mut out = Vec::with_capacity(grid.count);
    let mut dropped = 0usize;
    let mut checked_floor = false;
    for t in grid.points() {
        let theta = arc.eval(t);
        if model.validate_theta(&theta).is_err() {
            dropped += 1;
            continue;
        }
        let kl = kl_divergence(model, arc.base_point(), &theta, budget)?;
        if !checked_floor {
            check_accuracy_floor(kl.method, kl.error_estimate, grid.floor, "KL order")?;
            checked_floor = true;
        }
        out.push(TracePoint {
            t,
            magnitude: kl.value,
            method: kl.method,
            error_estimate: kl.error_estimate,
        });
    }
    Ok((out, dropped))
}

/// KL order o_K(γ): order of vanishing of the KL divergence along the arc.
pub fn kl_order(
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
) -> Result<OrderEstimate> {
    let (points, dropped) = arc_kl_samples(model, arc, grid, budget)?;
    let samples: Vec<(f64, f64)> = points.iter().map(|p| (p.t, p.magnitude)).collect();
    order_from_samples_with_drops(&samples, grid.floor, dropped)
}

/// Joint verdict for one arc.
#[derive(Debug, Clone)]
pub struct TheoremCheck {
    pub observable_order: OrderEstimate,
    pub kl_order: OrderEstimate,
    /// o_K ≥ 2·o_Ψ, with infinite observable order requiring KL at the floor.
    pub inequality_holds: bool,
    /// o_K = 2·o_Ψ; `None` when either order is infinite.
    pub equality_holds: Option<bool>,
    /// Whether the chart passed the first-order completeness check at the
    /// base point; when false the inequality is computed but not guaranteed.
    pub chart_complete: bool,
    pub chart_id: String,
    pub arc_id: String,
}

/// Computes both orders along the arc and evaluates the order inequality.
/// The chart's completeness at the base point is checked first and recorded;
/// an incomplete chart yields a verdict annotated as not guaranteed.
pub fn verify_order_theorem(
    chart: &Chart,
    model: &dyn Model,
    arc: &Arc,
    grid: &GridSpec,
    budget: &Budget,
    arc_id: &str,
) -> Result<TheoremCheck> {
    let verdict = completeness_check(chart, model, arc.base_point(), budget)?;
    let obs_order = observable_order(chart, model, arc, grid, budget)?;
    let kl = kl_order(model, arc, grid, budget)?;
    let (inequality_holds, equality_holds) = judge_orders(&obs_order.order, &kl.order);
    Ok(TheoremCheck {
        observable_order: obs_order,
        kl_order: kl,
        inequality_holds,
        equality_holds,
        chart_complete: verdict.complete,
        chart_id: chart.ids().join(","),
        arc_id: arc_id.to_string(),
    })
}

pub(crate) fn judge_orders(obs: &Order, kl: &Order) -> (bool, Option<bool>) {
    match (obs, kl) {
        (Order::Finite(a), Order::Finite(b)) => (*b >= 2 * *a, Some(*b == 2 * *a)),
        (Order::Finite(_), Order::Infinite) => (true, None),
        (Order::Infinite, Order::Infinite) => (true, None),
        (Order::Infinite, Order::Finite(_)) => (false, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn arc_evaluation_is_polynomial() {
        let theta0 = ParamVector::new(vec![1.0, -2.0]).unwrap();
        let arc = Arc::new(
            theta0,
            vec![vec![1.0, 0.0], vec![0.0, 3.0]],
        )
        .unwrap();
        let p = arc.eval(0.25);
        assert_abs_diff_eq!(p.values()[0], 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.values()[1], -2.0 + 3.0 * 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn constant_arc_stays_at_base() {
        let theta0 = ParamVector::new(vec![0.5, 0.5]).unwrap();
        let arc = Arc::constant(theta0.clone());
        for t in [0.0, 0.01, 0.1] {
            assert_eq!(arc.eval(t), theta0);
        }
    }

    #[test]
    fn pure_monomial_orders() {
        let est = order_of_vanishing(|t| Ok(vec![t * t, 0.0]), &grid()).unwrap();
        assert_eq!(est.order, Order::Finite(2));
        assert!(est.residual < 1e-10);
        assert_abs_diff_eq!(est.leading_coeff_mag, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_curve_is_infinite_order() {
        let est = order_of_vanishing(|_| Ok(vec![0.0]), &grid()).unwrap();
        assert_eq!(est.order, Order::Infinite);
        assert!(est.floor_hit);
    }

    #[test]
    fn higher_order_terms_do_not_disturb_rounding() {
        // brute-force oracle: direct evaluation of t^3 + 10 t^5 on the grid
        let est = order_of_vanishing(|t| Ok(vec![t.powi(3) + 10.0 * t.powi(5)]), &grid()).unwrap();
        assert_eq!(est.order, Order::Finite(3));
    }

    #[test]
    fn non_integer_slope_is_undetermined() {
        let est = order_of_vanishing(|t| Ok(vec![t.powf(1.5)]), &grid());
        assert!(matches!(est, Err(Error::Undetermined { .. })));
    }

    #[test]
    fn square_reparameterization_doubles_the_polynomial() {
        let theta0 = ParamVector::new(vec![0.0]).unwrap();
        let arc = Arc::new(theta0, vec![vec![2.0], vec![-1.0]]).unwrap();
        let sq = arc.reparameterized_square();
        for t in [0.3, 0.7] {
            assert_abs_diff_eq!(
                sq.eval(t).values()[0],
                arc.eval(t * t).values()[0],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn order_judgement_table() {
        assert_eq!(judge_orders(&Order::Finite(2), &Order::Finite(4)), (true, Some(true)));
        assert_eq!(judge_orders(&Order::Finite(1), &Order::Finite(3)), (true, Some(false)));
        assert_eq!(judge_orders(&Order::Finite(2), &Order::Finite(3)), (false, Some(false)));
        assert_eq!(judge_orders(&Order::Infinite, &Order::Infinite), (true, None));
        assert_eq!(judge_orders(&Order::Infinite, &Order::Finite(4)), (false, None));
        assert_eq!(judge_orders(&Order::Finite(1), &Order::Infinite), (true, None));
    }
}
