//! The inactive tanh unit: at a = 0 the weight and bias are invisible at
//! first order (vanishing Jacobian columns, Fisher rank 1) and only appear
//! through mixed second-order terms, which quadratic probe arcs expose.
//!
//! Run with: cargo run --example tanh_inactive_unit

use obschart::arc::observable_order;
use obschart::chart::chart_jacobian;
use obschart::numerics::{fisher_information, psd_rank};
use obschart::zoo::TanhUnitModel;
use obschart::{Arc, Budget, GridSpec, ParamVector, Result};

fn main() -> Result<()> {
    let model = TanhUnitModel::new(1.0)?;
    let theta0 = ParamVector::new(vec![0.0, 1.0, 0.0])?;
    let budget = Budget::default();
    let grid = GridSpec::default();
    let chart = model.default_chart(theta0.clone())?;

    let jac = chart_jacobian(&chart, &model, &theta0, &budget)?;
    println!("chart Jacobian at the inactive unit (rows = bumps, cols = a, w, b):");
    for i in 0..jac.matrix.nrows() {
        println!(
            "  [{:+.6}, {:+.2e}, {:+.2e}]",
            jac.matrix[(i, 0)],
            jac.matrix[(i, 1)],
            jac.matrix[(i, 2)]
        );
    }

    let fisher = fisher_information(&model, &theta0, &budget)?;
    println!(
        "Fisher rank: {} of {} (w and b are statistically invisible here)",
        psd_rank(&fisher, budget.fisher_rank_tol),
        3
    );
    println!();

    // pure w motion at a = 0 changes nothing...
    let arc_w = Arc::linear(theta0.clone(), vec![0.0, 1.0, 0.0])?;
    let est = observable_order(&chart, &model, &arc_w, &grid, &budget)?;
    println!("order along w-arc (a stays 0):      {}", est.order);

    // ...but the quadratic probe a = t^2, w = 1 + t reveals w at order 2
    let arc_mixed = Arc::new(
        theta0.clone(),
        vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]],
    )?;
    let est = observable_order(&chart, &model, &arc_mixed, &grid, &budget)?;
    println!(
        "order along a = t^2, w = 1 + t:     {} (mixed term a(w - w0))",
        est.order
    );
    Ok(())
}
