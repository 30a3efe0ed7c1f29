//! Reduced-rank regression at B = 0: the cross-moment chart, the rank-1 arc
//! with observable order 2 and KL order 4, and the determinantal relation the
//! chart image satisfies.
//!
//! Run with: cargo run --example order_theorem_rrr

use nalgebra::DMatrix;
use obschart::arc::verify_order_theorem;
use obschart::zoo::{cross_moment_chart, determinant_relation, RrrModel};
use obschart::{Arc, Budget, GridSpec, ParamVector, Result};

fn main() -> Result<()> {
    let model = RrrModel::default_2x2();
    let theta0 = ParamVector::new(vec![0.0; 4])?;
    let chart = cross_moment_chart(&model, theta0.clone())?;
    let budget = Budget::default();
    let grid = GridSpec::default();

    // u(t) = t a, v(t) = t b with a = b = (1, 0): B(t) = t^2 a b^T
    let arc = Arc::linear(theta0.clone(), vec![1.0, 0.0, 1.0, 0.0])?;
    let check = verify_order_theorem(&chart, &model, &arc, &grid, &budget, "rank1_diag")?;
    println!("chart: {:?}", chart.ids());
    println!(
        "observable order: {} (slope {:.4}, residual {:.4})",
        check.observable_order.order, check.observable_order.raw_slope, check.observable_order.residual
    );
    println!(
        "KL order:         {} (slope {:.4}, residual {:.4})",
        check.kl_order.order, check.kl_order.raw_slope, check.kl_order.residual
    );
    println!(
        "o_kl = 2 o_psi: {}",
        check.equality_holds == Some(true)
    );

    // the chart image lies on the determinantal variety m11 m22 = m12 m21
    let u = DMatrix::from_column_slice(2, 1, &[0.7, -0.3]);
    let v = DMatrix::from_column_slice(2, 1, &[0.2, 0.9]);
    let m = model.cross_moments(&u, &v)?;
    println!(
        "determinant relation at a generic rank-1 point: {:+.2e}",
        determinant_relation(&m)?
    );
    Ok(())
}
