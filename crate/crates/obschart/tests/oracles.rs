//! Independent oracles for the derived closed forms: large Monte Carlo
//! cross-checks and self-consistency at multiple resolutions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use obschart::numerics::cumulants_from_moments;
use obschart::zoo::{GmmModel, RrrModel};
use obschart::{Model, ParamVector};

/// Sample cumulants (kappa_1..kappa_3) of a batch of scalar draws.
fn sample_cumulants(xs: &[f64]) -> [f64; 3] {
    let n = xs.len() as f64;
    let mut m = [0.0; 3];
    for x in xs {
        m[0] += x;
        m[1] += x * x;
        m[2] += x * x * x;
    }
    let moments = [m[0] / n, m[1] / n, m[2] / n];
    let (kappa, _) = cumulants_from_moments(&moments);
    [kappa[0], kappa[1], kappa[2]]
}

/// Batch-means mean and standard error over `k` batches.
fn batch_stats(batches: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let k = batches.len() as f64;
    let mut mean = [0.0; 3];
    for b in batches {
        for i in 0..3 {
            mean[i] += b[i] / k;
        }
    }
    let mut se = [0.0; 3];
    for b in batches {
        for i in 0..3 {
            se[i] += (b[i] - mean[i]).powi(2);
        }
    }
    for s in &mut se {
        *s = (*s / (k * (k - 1.0))).sqrt();
    }
    (mean, se)
}

#[test]
fn gmm_cumulant_formulas_vs_monte_carlo() {
    // 10^7 draws in 20 batches; exact formulas must sit within 4 batch-means
    // standard errors
    let model = GmmModel::new(1.0).unwrap();
    let theta = ParamVector::new(vec![0.0, 0.5, 0.1]).unwrap();
    let (m1, k2, k3) = model.cumulants(&theta).unwrap();
    let exact = [m1, k2, k3];

    let batches: Vec<[f64; 3]> = (0..20)
        .map(|b| {
            let points = model.sample_points(&theta, 500_000, 1000 + b).unwrap();
            let xs: Vec<f64> = points.into_iter().map(|p| p[0]).collect();
            sample_cumulants(&xs)
        })
        .collect();
    let (mean, se) = batch_stats(&batches);
    for i in 0..3 {
        assert!(
            (mean[i] - exact[i]).abs() <= 4.0 * se[i],
            "kappa_{} mc {} vs exact {} (se {})",
            i + 1,
            mean[i],
            exact[i],
            se[i]
        );
    }
}

#[test]
fn rrr_cross_moments_vs_monte_carlo() {
    // E[Y X^T] estimated from 10^6 joint draws must match B Sigma_X = B
    // within 4 standard errors entrywise
    let model = RrrModel::default_2x2();
    let theta = ParamVector::new(vec![0.6, -0.4, 0.3, 0.8]).unwrap();
    let b = model.coefficient_matrix(&theta);
    let n = 1_000_000usize;
    let points = model.sample_points(&theta, n, 99).unwrap();
    // data layout [x1, x2, y1, y2]
    let mut sum = [[0.0f64; 2]; 2];
    let mut sum_sq = [[0.0f64; 2]; 2];
    for p in &points {
        for i in 0..2 {
            for j in 0..2 {
                let v = p[2 + i] * p[j];
                sum[i][j] += v;
                sum_sq[i][j] += v * v;
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let mean = sum[i][j] / n as f64;
            let var = (sum_sq[i][j] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - b[(i, j)]).abs() <= 4.0 * se,
                "cross moment ({i},{j}): mc {mean} vs closed form {} (se {se})",
                b[(i, j)]
            );
        }
    }
}

#[test]
fn gmm_log_density_normalizes() {
    // direct trapezoid integration of exp(log_density) over a wide interval
    let model = GmmModel::new(0.7).unwrap();
    let theta = ParamVector::new(vec![0.3, 1.1, -0.2]).unwrap();
    let (lo, hi, n) = (-12.0f64, 12.0f64, 24_000usize);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * model.log_density(&theta, &[x]).unwrap().exp();
    }
    assert!((acc * h - 1.0).abs() < 1e-10, "density mass {}", acc * h);
}

#[test]
fn gmm_score_has_zero_mean_under_sampling() {
    // E_theta[s_theta(X)] = 0; checked against 10^6 draws within 4 SE
    let model = GmmModel::new(1.0).unwrap();
    let theta = ParamVector::new(vec![0.2, 0.8, 0.15]).unwrap();
    let n = 1_000_000usize;
    let points = model.sample_points(&theta, n, 5).unwrap();
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for p in &points {
        let s = model.analytic_score(&theta, p).unwrap();
        for i in 0..3 {
            sum[i] += s[i];
            sum_sq[i] += s[i] * s[i];
        }
    }
    for i in 0..3 {
        let mean = sum[i] / n as f64;
        let var = (sum_sq[i] / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() <= 4.0 * se, "score component {i}: mean {mean}, se {se}");
    }
}

#[test]
fn tanh_sampler_matches_its_own_density_mean() {
    // E[Y] from draws vs quadrature of the regression function
    let model = obschart::zoo::TanhUnitModel::new(1.0).unwrap();
    let theta = ParamVector::new(vec![0.8, 1.2, -0.4]).unwrap();
    let n = 500_000usize;
    let points = model.sample_points(&theta, n, 11).unwrap();
    let mc: f64 = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    // independent oracle: plain Monte Carlo over X with a fresh generator
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut acc = 0.0;
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        acc += 0.8 * (1.2 * x - 0.4).tanh();
    }
    let oracle = acc / n as f64;
    assert!((mc - oracle).abs() < 5e-3, "E[Y]: sampler {mc} vs oracle {oracle}");
}
