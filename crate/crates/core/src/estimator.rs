//! One-shot team estimation with a common measurement `y_0` and local measurements `y_1..y_n`.
//!
//! The optimal estimate of agent `i` is `ẑ_i = L_i x̂_0 + F_i ỹ_i` where
//! `x̂_0 = E[x | y_0]` and `ỹ_i = y_i − E[y_i | y_0]`. The gains solve the
//! coupled stationarity conditions
//!
//! ```text
//! Σ_j S_ij F_j Σ̂_ji = S_{i•} L Θ̂_i        for every agent i,
//! ```
//!
//! which vectorize to `Γ vec(F) = η` with `Γ_ij = Σ̂_ij ⊗ S_ij`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CostModel;

/// Relative tolerance on the gain-equation residual.
pub const TOL_RESIDUAL: f64 = 1e-9;

/// Second moments of the zero-mean jointly Gaussian `(x, y_0, y_1, …, y_n)`.
///
/// Index 0 of `theta` and `sigma` is the common measurement; it may have zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianJointModel {
    var_x: DMatrix<f64>,
    theta: Vec<DMatrix<f64>>,
    sigma: Vec<Vec<DMatrix<f64>>>,
}

impl GaussianJointModel {
    pub fn new(
        var_x: DMatrix<f64>,
        theta: Vec<DMatrix<f64>>,
        sigma: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let dx = var_x.nrows();
        if !var_x.is_square() || dx == 0 {
            return Err(Error::Dimension(
                "var(x) must be square and non-empty".into(),
            ));
        }
        let m = theta.len();
        if m < 2 {
            return Err(Error::Dimension(
                "need the common block and at least one agent".into(),
            ));
        }
        if sigma.len() != m || sigma.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension(format!(
                "Sigma must be a {m}x{m} grid of blocks"
            )));
        }
        for (i, t) in theta.iter().enumerate() {
            if t.nrows() != dx {
                return Err(Error::Dimension(format!("Theta_{i} must have {dx} rows")));
            }
        }
        for i in 0..m {
            for j in 0..m {
                if sigma[i][j].shape() != (theta[i].ncols(), theta[j].ncols()) {
                    return Err(Error::Dimension(format!(
                        "Sigma_{i}{j} must be {}x{}, got {:?}",
                        theta[i].ncols(),
                        theta[j].ncols(),
                        sigma[i][j].shape()
                    )));
                }
            }
        }
        Ok(Self {
            var_x,
            theta,
            sigma,
        })
    }

    /// `y_i = C_i x + v_i` with independent `v_i ~ N(0, R_i)`; `common` is `(C_0, R_0)`.
    pub fn from_observations(
        var_x: DMatrix<f64>,
        common: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
        c: &[DMatrix<f64>],
        r: &[DMatrix<f64>],
    ) -> Result<Self> {
        let dx = var_x.nrows();
        let empty_c = DMatrix::zeros(0, dx);
        let empty_r = DMatrix::zeros(0, 0);
        let (c0, r0) = common.unwrap_or((&empty_c, &empty_r));
        let cs: Vec<&DMatrix<f64>> = std::iter::once(c0).chain(c).collect();
        let rs: Vec<&DMatrix<f64>> = std::iter::once(r0).chain(r).collect();
        if cs.iter().any(|ci| ci.ncols() != dx) || cs.len() != rs.len() {
            return Err(Error::Dimension(
                "observation matrices inconsistent with var(x)".into(),
            ));
        }
        let theta = cs.iter().map(|ci| &var_x * ci.transpose()).collect();
        let sigma = (0..cs.len())
            .map(|i| {
                (0..cs.len())
                    .map(|j| {
                        let mut b = cs[i] * &var_x * cs[j].transpose();
                        if i == j {
                            b += rs[i];
                        }
                        b
                    })
                    .collect()
            })
            .collect();
        Self::new(var_x, theta, sigma)
    }

    pub fn agents(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn has_common(&self) -> bool {
        self.theta[0].ncols() > 0
    }

    pub fn var_x(&self) -> &DMatrix<f64> {
        &self.var_x
    }

    /// `Θ_i = cov(x, y_i)`; index 0 is the common measurement.
    pub fn theta(&self, i: usize) -> &DMatrix<f64> {
        &self.theta[i]
    }

    pub fn sigma(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.sigma[i][j]
    }

    /// Full covariance of `(y_0, y_1, …, y_n)`.
    pub fn sigma_assembled(&self) -> DMatrix<f64> {
        linalg::assemble(&self.sigma)
    }
}

/// Second moments of the local innovations `ỹ_i = y_i − E[y_i | y_0]`. Agent indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationModel {
    pub theta_hat: Vec<DMatrix<f64>>,
    pub sigma_hat: Vec<Vec<DMatrix<f64>>>,
    /// `x̂_0 = x0_projection · y_0`.
    pub x0_projection: DMatrix<f64>,
    /// `ŷ_i = y_projection[i] · y_0`.
    pub y_projection: Vec<DMatrix<f64>>,
    /// `var(x − x̂_0)`.
    pub p0: DMatrix<f64>,
}

impl InnovationModel {
    pub fn agents(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn sigma_hat_assembled(&self) -> DMatrix<f64> {
        linalg::assemble(&self.sigma_hat)
    }
}

/// Condition the joint model on the common measurement.
pub fn innovation_model(joint: &GaussianJointModel) -> Result<InnovationModel> {
    let n = joint.agents();
    let dx = joint.var_x.nrows();
    if !joint.has_common() {
        return Ok(InnovationModel {
            theta_hat: joint.theta[1..].to_vec(),
            sigma_hat: joint.sigma[1..]
                .iter()
                .map(|row| row[1..].to_vec())
                .collect(),
            x0_projection: DMatrix::zeros(dx, 0),
            y_projection: (1..=n)
                .map(|i| DMatrix::zeros(joint.theta[i].ncols(), 0))
                .collect(),
            p0: joint.var_x.clone(),
        });
    }
    let chol =
        linalg::cholesky(&joint.sigma[0][0], "Sigma_00").map_err(|_| Error::SingularBlock {
            name: "Sigma_00".into(),
        })?;
    // Σ_00⁻¹ Σ_0j for every j, and Σ_00⁻¹ Θ_0ᵀ
    let solved: Vec<DMatrix<f64>> = (0..=n).map(|j| chol.solve(&joint.sigma[0][j])).collect();
    let theta0_solved = chol.solve(&joint.theta[0].transpose());
    let theta_hat = (1..=n)
        .map(|i| &joint.theta[i] - &joint.theta[0] * &solved[i])
        .collect();
    let sigma_hat = (1..=n)
        .map(|i| {
            (1..=n)
                .map(|j| &joint.sigma[i][j] - &joint.sigma[i][0] * &solved[j])
                .collect()
        })
        .collect();
    let x0_projection = theta0_solved.transpose();
    let y_projection = (1..=n).map(|i| solved[i].transpose()).collect();
    let p0 = linalg::symmetrize(&(&joint.var_x - &joint.theta[0] * &theta0_solved));
    Ok(InnovationModel {
        theta_hat,
        sigma_hat,
        x0_projection,
        y_projection,
        p0,
    })
}

/// Team-optimal gains together with the assembled linear system they solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamGains {
    pub f: Vec<DMatrix<f64>>,
    pub gamma: DMatrix<f64>,
    pub eta: DVector<f64>,
    /// `vec(F_1, …, F_n)`.
    pub stacked: DVector<f64>,
    /// Largest per-agent relative residual of the stationarity conditions.
    pub residual: f64,
}

impl TeamGains {
    /// `ηᵀ Γ⁻¹ η`, evaluated as `ηᵀ F`.
    pub fn reduction(&self) -> f64 {
        self.eta.dot(&self.stacked)
    }

    /// `Tr(Lᵀ S L P_0) − ηᵀ Γ⁻¹ η`.
    pub fn optimal_cost(&self, cost: &CostModel, p0: &DMatrix<f64>) -> Result<f64> {
        let base = (cost.lsl() * p0).trace();
        let j = base - self.reduction();
        if j < -TOL_RESIDUAL * base.abs().max(1.0) {
            return Err(Error::NegativeCost { value: j, step: 0 });
        }
        Ok(j.max(0.0))
    }
}

/// Solve `Σ_j S_ij F_j Σ̂_ji = S_{i•} L Θ̂_i` through `Γ vec(F) = η`.
///
/// Blocks with `S_ij = 0` contribute nothing to `Γ`, so their `Σ̂_ij` is never read.
pub fn solve_gain_system(
    sigma_hat: &[Vec<DMatrix<f64>>],
    theta_hat: &[DMatrix<f64>],
    cost: &CostModel,
) -> Result<TeamGains> {
    let n = cost.agents();
    if theta_hat.len() != n || sigma_hat.len() != n {
        return Err(Error::Dimension(format!(
            "cost has {n} agents, covariances have {}",
            theta_hat.len()
        )));
    }
    let dims: Vec<(usize, usize)> = (0..n)
        .map(|i| (cost.estimate_dim(i), theta_hat[i].ncols()))
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut total = 0;
    for &(dz, dy) in &dims {
        offsets.push(total);
        total += dz * dy;
    }
    offsets.push(total);
    for i in 0..n {
        if theta_hat[i].nrows() != cost.state_dim()
            || sigma_hat[i][i].shape() != (dims[i].1, dims[i].1)
        {
            return Err(Error::Dimension(format!(
                "covariance blocks of agent {i} have inconsistent shapes"
            )));
        }
    }

    let s_row_l: Vec<DMatrix<f64>> = (0..n).map(|i| cost.s_row_l(i)).collect();
    let mut gamma = DMatrix::zeros(total, total);
    let mut eta = DVector::zeros(total);
    for i in 0..n {
        for j in 0..n {
            if cost.is_zero_block(i, j) {
                continue;
            }
            let block = sigma_hat[i][j].kronecker(cost.s(i, j));
            gamma
                .view_mut((offsets[i], offsets[j]), block.shape())
                .copy_from(&block);
        }
        let rhs = &s_row_l[i] * &theta_hat[i];
        eta.rows_mut(offsets[i], offsets[i + 1] - offsets[i])
            .copy_from(&linalg::vec(&rhs));
    }
    let gamma = linalg::symmetrize(&gamma);
    let stacked = linalg::spd_solve(
        &gamma,
        &DMatrix::from_column_slice(total, 1, eta.as_slice()),
        "Gamma",
    )?
    .column(0)
    .into_owned();
    let f: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            linalg::unvec(
                &stacked.as_slice()[offsets[i]..offsets[i + 1]],
                dims[i].0,
                dims[i].1,
            )
        })
        .collect();

    let scale = 1.0 + cost.s_assembled().norm() * block_norm(sigma_hat, cost);
    let mut residual = 0.0f64;
    for i in 0..n {
        let mut res = -(&s_row_l[i] * &theta_hat[i]);
        for j in 0..n {
            if !cost.is_zero_block(i, j) {
                res += cost.s(i, j) * &f[j] * &sigma_hat[j][i];
            }
        }
        residual = residual.max(res.norm() / scale);
    }
    if residual.is_nan() || residual > TOL_RESIDUAL {
        return Err(Error::Residual {
            residual,
            tolerance: TOL_RESIDUAL,
        });
    }
    Ok(TeamGains {
        f,
        gamma,
        eta,
        stacked,
        residual,
    })
}

/// Frobenius norm over the blocks that enter the gain equations.
fn block_norm(sigma_hat: &[Vec<DMatrix<f64>>], cost: &CostModel) -> f64 {
    let n = cost.agents();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j || !cost.is_zero_block(i, j) {
                acc += sigma_hat[i][j].norm_squared();
            }
        }
    }
    acc.sqrt()
}

pub fn solve_team_gains(inn: &InnovationModel, cost: &CostModel) -> Result<TeamGains> {
    solve_gain_system(&inn.sigma_hat, &inn.theta_hat, cost)
}

/// Team-optimal estimates `ẑ_i = L_i x̂_0 + F_i (y_i − ŷ_i)`.
pub fn mtmse_estimate(
    inn: &InnovationModel,
    gains: &TeamGains,
    cost: &CostModel,
    y0: &DVector<f64>,
    ys: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = inn.agents();
    if ys.len() != n || y0.len() != inn.x0_projection.ncols() {
        return Err(Error::Dimension(
            "measurement count or common measurement length mismatch".into(),
        ));
    }
    let x0 = &inn.x0_projection * y0;
    (0..n)
        .map(|i| {
            if ys[i].len() != inn.y_projection[i].nrows() {
                return Err(Error::Dimension(format!(
                    "y_{i} has length {}, expected {}",
                    ys[i].len(),
                    inn.y_projection[i].nrows()
                )));
            }
            let innovation = &ys[i] - &inn.y_projection[i] * y0;
            Ok(cost.l(i) * &x0 + &gains.f[i] * innovation)
        })
        .collect()
}

/// Minimum team mean-squared error for the given innovation model.
pub fn optimal_static_cost(
    inn: &InnovationModel,
    cost: &CostModel,
    p0: &DMatrix<f64>,
) -> Result<f64> {
    solve_team_gains(inn, cost)?.optimal_cost(cost, p0)
}

/// Expected team cost of `ẑ_i = L_i x̂_0 + G_i ỹ_i` for arbitrary gains `G_i`.
pub fn team_cost_of_gains(
    sigma_hat: &[Vec<DMatrix<f64>>],
    theta_hat: &[DMatrix<f64>],
    cost: &CostModel,
    p0: &DMatrix<f64>,
    gains: &[DMatrix<f64>],
) -> f64 {
    let n = cost.agents();
    let mut total = (cost.lsl() * p0).trace();
    for i in 0..n {
        for j in 0..n {
            if cost.is_zero_block(i, j) {
                continue;
            }
            let sij = cost.s(i, j);
            let gi_t = gains[i].transpose();
            total -= 2.0 * (&gi_t * sij * cost.l(j) * &theta_hat[i]).trace();
            total += (&gi_t * sij * &gains[j] * &sigma_hat[j][i]).trace();
        }
    }
    total
}

/// Per-agent conditional-mean gains `K_i = Θ̂_i Σ̂_ii⁻¹`, so that `E[x | y_0, y_i] = x̂_0 + K_i ỹ_i`.
pub fn mmse_gains(
    sigma_hat: &[Vec<DMatrix<f64>>],
    theta_hat: &[DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    (0..theta_hat.len())
        .map(|i| {
            linalg::right_spd_solve(
                &theta_hat[i],
                &sigma_hat[i][i],
                &format!("Sigma_hat_{i}{i}"),
            )
        })
        .collect()
}
