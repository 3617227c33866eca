//! Time-homogeneous gains for the infinite-horizon average cost.

use nalgebra::DMatrix;

use super::{kalman_gain, riccati_update, CovarianceSet, FilterModel};
use crate::error::{Error, Result};
use crate::estimator::{mmse_gains, solve_gain_system, team_cost_of_gains};
use crate::linalg;

/// Relative Frobenius change at which the Riccati iteration stops.
pub const STEADY_TOL: f64 = 1e-12;
pub const STEADY_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub p_bar: DMatrix<f64>,
    pub k_bar: DMatrix<f64>,
    pub iterations: usize,
    /// `ρ(A − K̄ C)`.
    pub spectral_radius: f64,
    /// `ρ(A (I − K̄ C))`, the error dynamics of the predictor.
    pub closed_loop_radius: f64,
    pub covariances: CovarianceSet,
    pub f_bar: Vec<DMatrix<f64>>,
    pub residual: f64,
    /// Optimal average cost per step.
    pub j_star: f64,
    /// Average cost per step of the per-agent conditional means.
    pub j_mmse: f64,
}

/// Fixed point of the Riccati recursion started from `Σ_x`.
pub fn steady_riccati(model: &FilterModel) -> Result<(DMatrix<f64>, usize)> {
    let system = model.system();
    let mut p = system.sigma_x().clone();
    let mut change = f64::INFINITY;
    for it in 1..=STEADY_MAX_ITER {
        let k = kalman_gain(&p, system)?;
        let next = riccati_update(&p, &k, system);
        change = (&next - &p).norm();
        let scale = next.norm();
        p = next;
        if change <= STEADY_TOL * scale {
            return Ok((p, it));
        }
    }
    let scale = p.norm().max(f64::MIN_POSITIVE);
    Err(Error::NotConverged {
        iterations: STEADY_MAX_ITER,
        change: change / scale,
    })
}

pub fn steady_state(model: &FilterModel) -> Result<SteadyState> {
    let system = model.system();
    let (p_bar, iterations) = steady_riccati(model)?;
    let k_bar = kalman_gain(&p_bar, system)?;
    let c = system.c_stacked();
    let spectral_radius = linalg::spectral_radius(&(system.a() - &k_bar * c));
    let n = system.state_dim();
    let closed_loop_radius =
        linalg::spectral_radius(&(system.a() * (DMatrix::identity(n, n) - &k_bar * c)));
    if closed_loop_radius >= 1.0 {
        return Err(Error::Unstable {
            radius: closed_loop_radius,
        });
    }

    let tau = model.tau_star();
    let covariances = model.covariances(tau, &p_bar, &model.noise_aggregates(tau))?;
    let cost = model.cost();
    let gains = solve_gain_system(&covariances.sigma_hat, &covariances.theta_hat, cost)?;
    let j_star = gains.optimal_cost(cost, &covariances.p0)?;
    let k = mmse_gains(&covariances.sigma_hat, &covariances.theta_hat)?;
    let mmse: Vec<DMatrix<f64>> = k.iter().enumerate().map(|(i, ki)| cost.l(i) * ki).collect();
    let j_mmse = team_cost_of_gains(
        &covariances.sigma_hat,
        &covariances.theta_hat,
        cost,
        &covariances.p0,
        &mmse,
    );
    Ok(SteadyState {
        p_bar,
        k_bar,
        iterations,
        spectral_radius,
        closed_loop_radius,
        covariances,
        f_bar: gains.f,
        residual: gains.residual,
        j_star,
        j_mmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::InfoStructure;
    use crate::model::{CostModel, LinearSystem};
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, q: f64, sx: f64) -> FilterModel {
        let m = |v| DMatrix::from_element(1, 1, v);
        let sys = LinearSystem::new(m(a), vec![m(1.0)], m(q), vec![m(1.0)], m(sx)).unwrap();
        let cost = CostModel::new(vec![vec![m(1.0)]], vec![m(1.0)]).unwrap();
        FilterModel::new(sys, cost, InfoStructure::single_agent()).unwrap()
    }

    #[test]
    fn golden_ratio() {
        let ss = steady_state(&scalar(1.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(ss.p_bar[(0, 0)], (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-9);
        assert!(ss.spectral_radius < 1.0);
        // filtered covariance P̄ − P̄²/(P̄+1) = 1 / φ... equals φ − 1
        assert_abs_diff_eq!(ss.j_star, (1.0 + 5f64.sqrt()) / 2.0 - 1.0, epsilon = 1e-9);
    }

    #[test]
    fn no_process_noise() {
        let ss = steady_state(&scalar(0.5, 0.0, 0.0)).unwrap();
        assert_eq!(ss.p_bar[(0, 0)], 0.0);
        assert_eq!(ss.j_star, 0.0);
        assert_eq!(ss.iterations, 1);
    }

    #[test]
    fn independent_of_prior() {
        let a = steady_state(&scalar(1.0, 1.0, 0.0)).unwrap();
        let b = steady_state(&scalar(1.0, 1.0, 10.0)).unwrap();
        assert!((a.p_bar - b.p_bar).norm() < 1e-9);
    }

    #[test]
    fn unstable_open_loop_converges() {
        let ss = steady_state(&scalar(2.0, 1.0, 1.0)).unwrap();
        // P² − 4P − 1 = 0 for a = 2
        assert_abs_diff_eq!(ss.p_bar[(0, 0)], 2.0 + 5f64.sqrt(), epsilon = 1e-9);
        assert!(ss.closed_loop_radius < 1.0);
        assert!(ss.spectral_radius > 1.0);
    }
}
