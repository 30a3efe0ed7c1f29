//! Local geometry of the two-component Gaussian mixture at its collapse
//! point: hidden directions, Fisher rank, completeness, and the observable/KL
//! orders along coordinate arcs.
//!
//! Run with: cargo run --example gmm_singular

use obschart::arc::verify_order_theorem;
use obschart::chart::completeness_check;
use obschart::zoo::GmmModel;
use obschart::{Arc, Budget, Chart, GridSpec, Observable, ParamVector, Result};

fn main() -> Result<()> {
    let model = GmmModel::new(1.0)?;
    let theta0 = ParamVector::new(vec![0.0, 0.0, 0.0])?;
    let budget = Budget::default();
    let grid = GridSpec::default();

    // the (m1, kappa2, kappa3) chart from the mixture's cumulants
    let chart = Chart::new(
        vec![
            Observable::cumulant(1),
            Observable::cumulant(2),
            Observable::cumulant(3),
        ],
        theta0.clone(),
    )?;

    let verdict = completeness_check(&chart, &model, &theta0, &budget)?;
    println!("chart: {:?}", chart.ids());
    println!(
        "chart kernel dim: {} (hidden directions at first order)",
        verdict.chart_kernel.kernel_dim()
    );
    for (i, v) in verdict.chart_kernel.basis.iter().enumerate() {
        println!("  hidden[{i}] = [{:+.4}, {:+.4}, {:+.4}]", v[0], v[1], v[2]);
    }
    println!("score kernel dim: {}", verdict.score_kernel.kernel_dim());
    println!(
        "first-order complete: {} (max principal angle {:.2e} rad)",
        verdict.complete, verdict.max_principal_angle
    );
    println!();

    for (id, direction) in [
        ("e_mu", vec![1.0, 0.0, 0.0]),
        ("e_delta", vec![0.0, 1.0, 0.0]),
        ("e_alpha", vec![0.0, 0.0, 1.0]),
    ] {
        let arc = Arc::linear(theta0.clone(), direction)?;
        let check = verify_order_theorem(&chart, &model, &arc, &grid, &budget, id)?;
        println!(
            "arc {id:>8}: o_psi = {:>8}, o_kl = {:>8}, o_kl >= 2 o_psi: {}",
            check.observable_order.order.to_string(),
            check.kl_order.order.to_string(),
            check.inequality_holds
        );
    }
    println!();
    println!("mu moves the mean at order 1; delta moves the variance at order 2");
    println!("(KL order 4); pure alpha motion at delta = 0 never changes the law.");
    Ok(())
}
