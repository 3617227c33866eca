//! Second moments of the local innovations at one time step.

use nalgebra::DMatrix;

use super::FilterModel;
use crate::error::{Error, Result};
use crate::linalg;

/// Contributions of process and measurement noise after the anchor time.
///
/// `sigma_w = var(Σ_back A^{back−1} w(t−back))`, `p_sigma[i] = cov(that sum, w^loc_i)`,
/// `p_w[i][j] = cov(w^loc_i, w^loc_j)` and `p_v[i][j] = cov(v^loc_i, v^loc_j)`.
/// Inactive blocks of the mask are left as zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAggregates {
    pub span: usize,
    pub sigma_w: DMatrix<f64>,
    pub p_sigma: Vec<DMatrix<f64>>,
    pub p_w: Vec<Vec<DMatrix<f64>>>,
    pub p_v: Vec<Vec<DMatrix<f64>>>,
}

/// `Σ̂_ij(t) = cov(Ĩ^loc_i, Ĩ^loc_j)`, `Θ̂_i(t) = cov(x(t), Ĩ^loc_i)` and `P_0(t) = var(x(t) − x̂^com(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub t: usize,
    pub sigma_hat: Vec<Vec<DMatrix<f64>>>,
    pub theta_hat: Vec<DMatrix<f64>>,
    pub p0: DMatrix<f64>,
}

pub(super) fn noise_aggregate_covariances(model: &FilterModel, t: usize) -> NoiseAggregates {
    let system = model.system();
    let slice = model.slice(t);
    let n = model.agents();
    let dx = system.state_dim();
    let q = system.q();
    let span = slice.span;

    let mut sigma_w = DMatrix::zeros(dx, dx);
    for back in 1..=span {
        let ap = model.a_power(back - 1);
        sigma_w += ap * q * ap.transpose();
    }

    let p_sigma = slice
        .agents
        .iter()
        .map(|agent| {
            let mut out = DMatrix::zeros(dx, agent.dim());
            let mut col = 0;
            for b in &agent.blocks {
                for term in &b.process {
                    let block = model.a_power(term.back - 1) * q * term.coeff.transpose();
                    let mut view = out.view_mut((0, col), (dx, b.rows()));
                    view += block;
                }
                col += b.rows();
            }
            out
        })
        .collect();

    let mut p_w = Vec::with_capacity(n);
    let mut p_v = Vec::with_capacity(n);
    for i in 0..n {
        let ai = &slice.agents[i];
        let mut row_w = Vec::with_capacity(n);
        let mut row_v = Vec::with_capacity(n);
        for j in 0..n {
            let aj = &slice.agents[j];
            let mut bw = DMatrix::zeros(ai.dim(), aj.dim());
            let mut bv = DMatrix::zeros(ai.dim(), aj.dim());
            if model.mask().is_active(i, j) {
                let mut r = 0;
                for bi in &ai.blocks {
                    let mut c = 0;
                    for bj in &aj.blocks {
                        for ti in &bi.process {
                            if let Some(tj) = bj.process.iter().find(|tj| tj.back == ti.back) {
                                let mut view = bw.view_mut((r, c), (bi.rows(), bj.rows()));
                                view += &ti.coeff * q * tj.coeff.transpose();
                            }
                        }
                        if bi.entry == bj.entry {
                            bv.view_mut((r, c), (bi.rows(), bj.rows()))
                                .copy_from(system.r(bi.entry.source));
                        }
                        c += bj.rows();
                    }
                    r += bi.rows();
                }
            }
            row_w.push(bw);
            row_v.push(bv);
        }
        p_w.push(row_w);
        p_v.push(row_v);
    }
    NoiseAggregates {
        span,
        sigma_w,
        p_sigma,
        p_w,
        p_v,
    }
}

pub(super) fn innovation_covariances(
    model: &FilterModel,
    t: usize,
    p_anchor: &DMatrix<f64>,
    noise: &NoiseAggregates,
) -> Result<CovarianceSet> {
    let slice = model.slice(t);
    let n = model.agents();
    let dx = model.system().state_dim();
    if p_anchor.shape() != (dx, dx) {
        return Err(Error::Dimension(format!(
            "P must be {dx}x{dx}, got {:?}",
            p_anchor.shape()
        )));
    }
    if noise.span != slice.span || noise.p_sigma.len() != n {
        return Err(Error::Dimension(format!(
            "noise aggregates cover span {} but time {t} needs span {}",
            noise.span, slice.span
        )));
    }
    for (i, agent) in slice.agents.iter().enumerate() {
        if noise.p_sigma[i].ncols() != agent.dim() {
            return Err(Error::Dimension(format!(
                "local block of agent {i} has {} rows at time {t}",
                agent.dim()
            )));
        }
    }
    let am = model.a_power(slice.span);
    let pc: Vec<DMatrix<f64>> = slice
        .agents
        .iter()
        .map(|a| p_anchor * a.c_loc.transpose())
        .collect();
    let sigma_hat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let ci = &slice.agents[i].c_loc;
                    if !model.mask().is_active(i, j) {
                        return DMatrix::zeros(ci.nrows(), slice.agents[j].dim());
                    }
                    let b = ci * &pc[j] + &noise.p_w[i][j] + &noise.p_v[i][j];
                    if i == j {
                        linalg::symmetrize(&b)
                    } else {
                        b
                    }
                })
                .collect()
        })
        .collect();
    let theta_hat = (0..n).map(|i| am * &pc[i] + &noise.p_sigma[i]).collect();
    let p0 = linalg::symmetrize(&(am * p_anchor * am.transpose() + &noise.sigma_w));
    Ok(CovarianceSet {
        t,
        sigma_hat,
        theta_hat,
        p0,
    })
}
