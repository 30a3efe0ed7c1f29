//! Reduced-rank regression: Y = BX + ε with B = UVᵀ of rank ≤ r,
//! X ~ N(0, Σ_X), ε ~ N(0, I_p). Parameters are θ = (vec U, vec V),
//! column-major, so d = r(p+q). Data points are laid out [x_1..x_q, y_1..y_p].

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chart::{Chart, Observable, ObservableKind};
use crate::error::{Error, Result};
use crate::model::{Model, ParamVector, Support};

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone)]
pub struct RrrModel {
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    sigma_x: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    sigma_x_inv: DMatrix<f64>,
    ln_det_sigma_x: f64,
}

impl RrrModel {
    pub fn new(p: usize, q: usize, rank: usize, sigma_x: Option<DMatrix<f64>>) -> Result<Self> {
        if p == 0 || q == 0 || rank == 0 || rank > p.min(q) {
            return Err(Error::InvalidArgument(format!(
                "rrr dims must satisfy 1 <= r <= min(p, q); got p={p}, q={q}, r={rank}"
            )));
        }
        let sigma_x = sigma_x.unwrap_or_else(|| DMatrix::identity(q, q));
        if sigma_x.nrows() != q || sigma_x.ncols() != q {
            return Err(Error::InvalidArgument(format!(
                "sigma_x must be {q}x{q}, got {}x{}",
                sigma_x.nrows(),
                sigma_x.ncols()
            )));
        }
        let chol = Cholesky::new(sigma_x.clone()).ok_or_else(|| {
            Error::InvalidArgument("sigma_x must be symmetric positive definite".to_string())
        })?;
        let sigma_x_inv = chol.inverse();
        let ln_det_sigma_x = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            p,
            q,
            rank,
            sigma_x,
            chol,
            sigma_x_inv,
            ln_det_sigma_x,
        })
    }

    /// Default 2x2 rank-1 model with Σ_X = I.
    pub fn default_2x2() -> Self {
        Self::new(2, 2, 1, None).expect("valid dims")
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    /// Packs factor matrices into a parameter vector.
    pub fn pack(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<ParamVector> {
        if u.nrows() != self.p || u.ncols() != self.rank || v.nrows() != self.q
            || v.ncols() != self.rank
        {
            return Err(Error::InvalidArgument(
                "factor dimensions do not match the model".to_string(),
            ));
        }
        let mut values = Vec::with_capacity(self.param_dim());
        values.extend(u.iter());
        values.extend(v.iter());
        ParamVector::new(values)
    }

    /// Unpacks (U, V) from a parameter vector.
    pub fn unpack(&self, theta: &ParamVector) -> (DMatrix<f64>, DMatrix<f64>) {
        let vals = theta.values();
        let nu = self.p * self.rank;
        let u = DMatrix::from_column_slice(self.p, self.rank, &vals[..nu]);
        let v = DMatrix::from_column_slice(self.q, self.rank, &vals[nu..]);
        (u, v)
    }

    pub fn coefficient_matrix(&self, theta: &ParamVector) -> DMatrix<f64> {
        let (u, v) = self.unpack(theta);
        u * v.transpose()
    }

    /// E[YXᵀ] = B·Σ_X in closed form.
    pub fn cross_moments(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if u.nrows() != self.p || v.nrows() != self.q || u.ncols() != v.ncols() {
            return Err(Error::InvalidArgument(
                "factor dimensions do not match the model".to_string(),
            ));
        }
        Ok(u * v.transpose() * &self.sigma_x)
    }

    /// KL(P_{B0} ‖ P_B) = ½·tr((B − B0)·Σ_X·(B − B0)ᵀ) for unit isotropic noise.
    pub fn kl_between(&self, b0: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let d = b - b0;
        0.5 * (&d * &self.sigma_x * d.transpose()).trace()
    }

    /// ∂B/∂θ_a as a p×q matrix for each parameter coordinate.
    fn coefficient_derivative(&self, theta: &ParamVector, a: usize) -> DMatrix<f64> {
        let (u, v) = self.unpack(theta);
        let nu = self.p * self.rank;
        let mut db = DMatrix::<f64>::zeros(self.p, self.q);
        if a < nu {
            let i = a % self.p;
            let k = a / self.p;
            // dB = e_i v_k^T
            for j in 0..self.q {
                db[(i, j)] = v[(j, k)];
            }
        } else {
            let a = a - nu;
            let j = a % self.q;
            let k = a / self.q;
            // dB = u_k e_j^T
            for i in 0..self.p {
                db[(i, j)] = u[(i, k)];
            }
        }
        db
    }
}

/// Δ = m₁₁m₂₂ − m₁₂m₂₁, the determinantal relation a rank-1 2×2 model's
/// cross-moment matrix satisfies exactly.
pub fn determinant_relation(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::InvalidArgument(
            "determinant relation is defined for 2x2 moment matrices".to_string(),
        ));
    }
    Ok(m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)])
}

/// The full cross-moment chart (all Y_iX_j entries in row-major order).
pub fn cross_moment_chart(model: &RrrModel, theta0: ParamVector) -> Result<Chart> {
    let mut obs = Vec::with_capacity(model.p * model.q);
    for i in 1..=model.p {
        for j in 1..=model.q {
            obs.push(Observable::cross_moment(i, j, model.q));
        }
    }
    Chart::new(obs, theta0)
}

impl Model for RrrModel {
    fn name(&self) -> &str {
        "rrr"
    }

    fn param_dim(&self) -> usize {
        self.rank * (self.p + self.q)
    }

    fn data_dim(&self) -> usize {
        self.p + self.q
    }

    fn support(&self) -> Support {
        Support::RealSpace {
            dim: self.p + self.q,
        }
    }

    fn log_density(&self, theta: &ParamVector, data: &[f64]) -> Result<f64> {
        let x = DVector::from_column_slice(&data[..self.q]);
        let y = DVector::from_column_slice(&data[self.q..]);
        let b = self.coefficient_matrix(theta);
        let resid = y - &b * &x;
        let x_quad = (&self.sigma_x_inv * &x).dot(&x);
        let lp_x = -0.5 * (self.q as f64 * LN_2PI + self.ln_det_sigma_x + x_quad);
        let lp_y = -0.5 * (self.p as f64 * LN_2PI + resid.norm_squared());
        Ok(lp_x + lp_y)
    }

    fn sample_points(&self, theta: &ParamVector, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.validate_theta(theta)?;
        let b = self.coefficient_matrix(theta);
        let l = self.chol.l();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let z = DVector::from_fn(self.q, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            let eps = DVector::from_fn(self.p, |_, _| StandardNormal.sample(&mut rng));
            let y = &b * &x + eps;
            let mut point = Vec::with_capacity(self.p + self.q);
            point.extend(x.iter());
            point.extend(y.iter());
            out.push(point);
        }
        Ok(out)
    }

    fn analytic_score(&self, theta: &ParamVector, data: &[f64]) -> Option<Vec<f64>> {
        let x = DVector::from_column_slice(&data[..self.q]);
        let y = DVector::from_column_slice(&data[self.q..]);
        let (u, v) = self.unpack(theta);
        let b = &u * v.transpose();
        let resid = y - &b * &x;
        let vtx = v.transpose() * &x; // r-vector
        let utr = u.transpose() * &resid; // r-vector
        let mut s = Vec::with_capacity(self.param_dim());
        for k in 0..self.rank {
            for i in 0..self.p {
                s.push(resid[i] * vtx[k]);
            }
        }
        for k in 0..self.rank {
            for j in 0..self.q {
                s.push(utr[k] * x[j]);
            }
        }
        Some(s)
    }

    fn closed_form_expectation(&self, obs: &Observable, theta: &ParamVector) -> Option<f64> {
        match &obs.kind {
            ObservableKind::CrossMoment { i, j, .. } if *i <= self.p && *j <= self.q => {
                let (u, v) = self.unpack(theta);
                let m = self.cross_moments(&u, &v).ok()?;
                Some(m[(i - 1, j - 1)])
            }
            _ => None,
        }
    }

    fn closed_form_score_correlation(
        &self,
        obs: &Observable,
        theta: &ParamVector,
    ) -> Option<Vec<f64>> {
        // E[Y_i X_j · s_a]: for s wrt U_{lk} this is δ_{il}(Σ_X v_k)_j, and for
        // s wrt V_{mk} it is u_{ik}(Σ_X)_{jm}
        let ObservableKind::CrossMoment { i, j, .. } = &obs.kind else {
            return None;
        };
        if *i > self.p || *j > self.q {
            return None;
        }
        let (u, v) = self.unpack(theta);
        let (i, j) = (i - 1, j - 1);
        let mut out = Vec::with_capacity(self.param_dim());
        for k in 0..self.rank {
            let sv = &self.sigma_x * v.column(k);
            for l in 0..self.p {
                out.push(if l == i { sv[j] } else { 0.0 });
            }
        }
        for k in 0..self.rank {
            for m in 0..self.q {
                out.push(u[(i, k)] * self.sigma_x[(j, m)]);
            }
        }
        Some(out)
    }

    fn closed_form_kl(&self, theta0: &ParamVector, theta: &ParamVector) -> Option<f64> {
        Some(self.kl_between(&self.coefficient_matrix(theta0), &self.coefficient_matrix(theta)))
    }

    fn analytic_fisher(&self, theta: &ParamVector) -> Option<DMatrix<f64>> {
        // I_{ab} = tr((∂_a B)ᵀ (∂_b B) Σ_X)
        let d = self.param_dim();
        let derivs: Vec<DMatrix<f64>> = (0..d)
            .map(|a| self.coefficient_derivative(theta, a))
            .collect();
        let mut fisher = DMatrix::<f64>::zeros(d, d);
        for a in 0..d {
            let da_sx = &derivs[a] * &self.sigma_x;
            for b in a..d {
                let val = (&da_sx * derivs[b].transpose()).trace();
                fisher[(a, b)] = val;
                fisher[(b, a)] = val;
            }
        }
        Some(fisher)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_factors_give_zero_moments() {
        let m = RrrModel::default_2x2();
        let u = DMatrix::zeros(2, 1);
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let cm = m.cross_moments(&u, &v).unwrap();
        assert!(cm.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rank_one_moments_satisfy_determinant_relation() {
        let m = RrrModel::default_2x2();
        let u = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let cm = m.cross_moments(&u, &v).unwrap();
        assert_eq!(cm, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_abs_diff_eq!(determinant_relation(&cm).unwrap(), 0.0, epsilon = 1e-15);
        let full_rank = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(determinant_relation(&full_rank).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kl_is_half_squared_frobenius_for_identity_sigma() {
        let m = RrrModel::default_2x2();
        let b0 = DMatrix::zeros(2, 2);
        let mut b = DMatrix::zeros(2, 2);
        b[(0, 1)] = 0.2;
        assert_abs_diff_eq!(m.kl_between(&b0, &b), 0.02, epsilon = 1e-15);
    }

    #[test]
    fn standard_bivariate_log_density_at_origin() {
        let m = RrrModel::default_2x2();
        let theta = m
            .pack(&DMatrix::zeros(2, 1), &DMatrix::zeros(2, 1))
            .unwrap();
        // y | x is standard bivariate normal at the origin
        let lp = m.log_density(&theta, &[0.0, 0.0, 0.0, 0.0]).unwrap();
        let lp_y = -LN_2PI; // -log(2π)
        let lp_x = -LN_2PI;
        assert_abs_diff_eq!(lp, lp_x + lp_y, epsilon = 1e-12);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let m = RrrModel::new(3, 2, 2, None).unwrap();
        let u = DMatrix::from_fn(3, 2, |i, j| (i + 1) as f64 + 10.0 * j as f64);
        let v = DMatrix::from_fn(2, 2, |i, j| -(i as f64) - j as f64);
        let theta = m.pack(&u, &v).unwrap();
        let (u2, v2) = m.unpack(&theta);
        assert_eq!(u, u2);
        assert_eq!(v, v2);
    }

    #[test]
    fn gauge_transform_leaves_moments_unchanged() {
        let m = RrrModel::new(2, 2, 2, None).unwrap();
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]);
        let v = DMatrix::from_row_slice(2, 2, &[0.7, -1.0, 0.2, 0.4]);
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.5]);
        let q_inv_t = q.clone().try_inverse().unwrap().transpose();
        let a = m.cross_moments(&u, &v).unwrap();
        let b = m.cross_moments(&(&u * &q), &(&v * &q_inv_t)).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
