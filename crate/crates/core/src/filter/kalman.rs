//! Centralized one-step predictor driven by the stacked measurement `y(t)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LinearSystem;

/// Prediction `x̂(t) = E[x(t) | y(1:t−1)]` with error covariance `P(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub t: usize,
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    /// Gain used for the last update; `None` before the first step.
    pub k: Option<DMatrix<f64>>,
}

impl KalmanState {
    /// `x̂(1) = 0`, `P(1) = Σ_x`.
    pub fn initial(system: &LinearSystem) -> Self {
        Self {
            t: 1,
            x_hat: DVector::zeros(system.state_dim()),
            p: system.sigma_x().clone(),
            k: None,
        }
    }
}

/// `K = P Cᵀ (C P Cᵀ + R)⁻¹`.
pub fn kalman_gain(p: &DMatrix<f64>, system: &LinearSystem) -> Result<DMatrix<f64>> {
    let c = system.c_stacked();
    let innovation = linalg::symmetrize(&(c * p * c.transpose() + system.r_stacked()));
    linalg::right_spd_solve(&(p * c.transpose()), &innovation, "C P C^T + R")
}

/// `P⁺ = A Δ P Δᵀ Aᵀ + A K R Kᵀ Aᵀ + Q` with `Δ = I − K C`.
pub fn riccati_update(p: &DMatrix<f64>, k: &DMatrix<f64>, system: &LinearSystem) -> DMatrix<f64> {
    let a = system.a();
    let n = system.state_dim();
    let delta = DMatrix::identity(n, n) - k * system.c_stacked();
    let ak = a * k;
    let next = a * &delta * p * delta.transpose() * a.transpose()
        + &ak * system.r_stacked() * ak.transpose()
        + system.q();
    linalg::symmetrize(&next)
}

pub fn kalman_step(
    state: &KalmanState,
    system: &LinearSystem,
    y: &DVector<f64>,
) -> Result<KalmanState> {
    if y.len() != system.total_measurement_dim() {
        return Err(Error::Dimension(format!(
            "stacked measurement has length {}, expected {}",
            y.len(),
            system.total_measurement_dim()
        )));
    }
    let k = kalman_gain(&state.p, system)?;
    let x_hat = system.a() * (&state.x_hat + &k * (y - system.c_stacked() * &state.x_hat));
    let p = riccati_update(&state.p, &k, system);
    Ok(KalmanState {
        t: state.t + 1,
        x_hat,
        p,
        k: Some(k),
    })
}

/// Covariances `P(1..=count)` and the gains `K(1..=count)` computed from them.
pub fn riccati_sequence(
    system: &LinearSystem,
    count: usize,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let mut ps = Vec::with_capacity(count);
    let mut ks = Vec::with_capacity(count);
    let mut p = system.sigma_x().clone();
    for _ in 0..count {
        let k = kalman_gain(&p, system)?;
        let next = riccati_update(&p, &k, system);
        ps.push(p);
        ks.push(k);
        p = next;
    }
    Ok((ps, ks))
}
