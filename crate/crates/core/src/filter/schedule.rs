//! Offline computation of the time-varying gains over a finite horizon.

use nalgebra::DMatrix;

use super::online::OnlineGains;
use super::{riccati_sequence, CovarianceSet, FilterModel, NoiseAggregates};
use crate::error::{Error, Result};
use crate::estimator::{mmse_gains, solve_gain_system, team_cost_of_gains};
use crate::exec::Execution;

#[derive(Debug, Clone, PartialEq)]
pub struct GainStep {
    pub t: usize,
    pub anchor: usize,
    pub covariances: CovarianceSet,
    /// Team-optimal gains `F_i(t)`.
    pub f: Vec<DMatrix<f64>>,
    /// `L_i K_i(t)` with `K_i(t) = Θ̂_i Σ̂_ii⁻¹`.
    pub mmse: Vec<DMatrix<f64>>,
    /// `Tr(Lᵀ S L P_0(t)) − η(t)ᵀ Γ(t)⁻¹ η(t)`.
    pub j_step: f64,
    pub j_mmse_step: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub horizon: usize,
    pub tau_star: usize,
    /// `P(1..=anchor(T))`.
    pub p: Vec<DMatrix<f64>>,
    /// `K(1..=anchor(T))`.
    pub kalman_gains: Vec<DMatrix<f64>>,
    pub steps: Vec<GainStep>,
}

impl GainSchedule {
    pub fn step(&self, t: usize) -> Result<&GainStep> {
        if t == 0 || t > self.horizon {
            return Err(Error::Horizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(&self.steps[t - 1])
    }

    /// `J*_T`.
    pub fn optimal_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.j_step).sum()
    }

    /// `J^mmse_T`.
    pub fn mmse_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.j_mmse_step).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.steps.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// Gains for the online team filter.
    pub fn team_gains(&self) -> OnlineGains {
        OnlineGains {
            kalman: self.kalman_gains.clone(),
            agent: self.steps.iter().map(|s| s.f.clone()).collect(),
        }
    }

    /// Gains for the online per-agent conditional-mean filter.
    pub fn mmse_gains(&self) -> OnlineGains {
        OnlineGains {
            kalman: self.kalman_gains.clone(),
            agent: self.steps.iter().map(|s| s.mmse.clone()).collect(),
        }
    }
}

/// Covariances, gains and step costs for `t = 1..=horizon`. Steps are independent given the Riccati sequence.
pub fn gain_schedule(model: &FilterModel, horizon: usize, exec: Execution) -> Result<GainSchedule> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let tau = model.tau_star();
    let (p, kalman_gains) = riccati_sequence(model.system(), model.anchor(horizon))?;
    // aggregates only change while the anchor is pinned at 1
    let noise: Vec<NoiseAggregates> = (1..=horizon.min(tau))
        .map(|t| model.noise_aggregates(t))
        .collect();
    let steps = exec.try_map(horizon, |idx| {
        let t = idx + 1;
        let anchor = model.anchor(t);
        compute_step(model, t, anchor, &p[anchor - 1], &noise[t.min(tau) - 1])
    })?;
    Ok(GainSchedule {
        horizon,
        tau_star: tau,
        p,
        kalman_gains,
        steps,
    })
}

fn compute_step(
    model: &FilterModel,
    t: usize,
    anchor: usize,
    p: &DMatrix<f64>,
    noise: &NoiseAggregates,
) -> Result<GainStep> {
    let cost = model.cost();
    let covariances = model.covariances(t, p, noise)?;
    let gains = solve_gain_system(&covariances.sigma_hat, &covariances.theta_hat, cost)?;
    let j_step = gains
        .optimal_cost(cost, &covariances.p0)
        .map_err(|e| match e {
            Error::NegativeCost { value, .. } => Error::NegativeCost { value, step: t },
            other => other,
        })?;
    let k = mmse_gains(&covariances.sigma_hat, &covariances.theta_hat)?;
    let mmse: Vec<DMatrix<f64>> = k.iter().enumerate().map(|(i, ki)| cost.l(i) * ki).collect();
    let j_mmse_step = team_cost_of_gains(
        &covariances.sigma_hat,
        &covariances.theta_hat,
        cost,
        &covariances.p0,
        &mmse,
    );
    Ok(GainStep {
        t,
        anchor,
        f: gains.f,
        mmse,
        j_step,
        j_mmse_step,
        residual: gains.residual,
        covariances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{CommGraph, InfoStructure};
    use crate::linalg;
    use crate::model::{
        build_average_coupling_cost, build_chain_coupling_cost, CostModel, LinearSystem,
    };
    use approx::assert_abs_diff_eq;

    fn chain_system(n: usize) -> LinearSystem {
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.9
            } else if i == j + 1 {
                0.5
            } else {
                0.0
            }
        });
        LinearSystem::new(
            a,
            (0..n)
                .map(|i| DMatrix::from_fn(1, n, |_, j| if j == i { 1.0 } else { 0.0 }))
                .collect(),
            DMatrix::identity(n, n),
            (0..n).map(|_| DMatrix::from_element(1, 1, 0.2)).collect(),
            DMatrix::identity(n, n),
        )
        .unwrap()
    }

    #[test]
    fn block_diagonal_cost_gives_mmse_gains() {
        let sys = chain_system(3);
        let s = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| DMatrix::from_element(1, 1, if i == j { 1.0 + i as f64 } else { 0.0 }))
                    .collect()
            })
            .collect();
        let l = (0..3)
            .map(|i| DMatrix::from_fn(1, 3, |_, j| if j == i { 1.0 } else { 0.0 }))
            .collect();
        let cost = CostModel::new(s, l).unwrap();
        let info =
            InfoStructure::from_graph(&CommGraph::bidirectional_chain(3, 1).unwrap()).unwrap();
        let model = FilterModel::new(sys, cost, info).unwrap();
        let sched = gain_schedule(&model, 12, Execution::Sequential).unwrap();
        for st in &sched.steps {
            for i in 0..3 {
                assert_abs_diff_eq!(st.f[i], st.mmse[i], epsilon = 1e-10);
            }
            assert_abs_diff_eq!(st.j_step, st.j_mmse_step, epsilon = 1e-10);
        }
    }

    #[test]
    fn sparse_blocks_match_dense_bitwise() {
        let sys = chain_system(4);
        let info =
            InfoStructure::from_graph(&CommGraph::bidirectional_chain(4, 1).unwrap()).unwrap();
        let cost = build_chain_coupling_cost(4, 1, 3.0).unwrap();
        let sparse = FilterModel::new(sys, cost, info).unwrap();
        let dense = sparse.clone().with_dense_blocks();
        let a = gain_schedule(&sparse, 8, Execution::Sequential).unwrap();
        let b = gain_schedule(&dense, 8, Execution::Sequential).unwrap();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            assert_eq!(sa.f, sb.f);
            assert_eq!(sa.j_step.to_bits(), sb.j_step.to_bits());
            assert_eq!(sa.j_mmse_step.to_bits(), sb.j_mmse_step.to_bits());
        }
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let sys = chain_system(3);
        let info = InfoStructure::from_graph(&CommGraph::complete(3, 2).unwrap()).unwrap();
        let model =
            FilterModel::new(sys, build_average_coupling_cost(3, 1, 9.0).unwrap(), info).unwrap();
        let a = gain_schedule(&model, 20, Execution::Sequential).unwrap();
        let b = gain_schedule(&model, 20, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centralized_gain_is_filtered_gain() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.95]),
            vec![DMatrix::from_row_slice(1, 2, &[1.0, 0.0])],
            DMatrix::identity(2, 2) * 0.1,
            vec![DMatrix::from_element(1, 1, 0.5)],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let cost = CostModel::new(
            vec![vec![DMatrix::identity(2, 2) * 3.0]],
            vec![DMatrix::identity(2, 2)],
        )
        .unwrap();
        let model = FilterModel::new(sys.clone(), cost, InfoStructure::single_agent()).unwrap();
        let sched = gain_schedule(&model, 10, Execution::Sequential).unwrap();
        let (ps, _) = riccati_sequence(&sys, 10).unwrap();
        for (t, st) in sched.steps.iter().enumerate() {
            let p = &ps[t];
            let c = sys.c(0);
            let k = p * c.transpose() * (c * p * c.transpose() + sys.r(0)).try_inverse().unwrap();
            assert_abs_diff_eq!(st.f[0], k.clone(), epsilon = 1e-12);
            let filtered = (DMatrix::identity(2, 2) - &k * c) * p;
            assert_abs_diff_eq!(st.j_step, 3.0 * filtered.trace(), epsilon = 1e-11);
        }
    }

    #[test]
    fn noiseless_fully_observed_costs_nothing() {
        let sys = LinearSystem::new(
            DMatrix::identity(1, 1) * 0.5,
            vec![DMatrix::identity(1, 1)],
            DMatrix::zeros(1, 1),
            vec![DMatrix::identity(1, 1)],
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let cost = CostModel::new(
            vec![vec![DMatrix::identity(1, 1)]],
            vec![DMatrix::identity(1, 1)],
        )
        .unwrap();
        let model = FilterModel::new(sys, cost, InfoStructure::single_agent()).unwrap();
        let sched = gain_schedule(&model, 5, Execution::Sequential).unwrap();
        assert_eq!(sched.optimal_cost(), 0.0);
    }

    #[test]
    fn uncoupled_cost_equals_mmse() {
        let sys = chain_system(3);
        let info = InfoStructure::from_graph(&CommGraph::complete(3, 2).unwrap()).unwrap();
        let model =
            FilterModel::new(sys, build_average_coupling_cost(3, 1, 0.0).unwrap(), info).unwrap();
        let sched = gain_schedule(&model, 15, Execution::Parallel).unwrap();
        assert_abs_diff_eq!(sched.optimal_cost(), sched.mmse_cost(), epsilon = 1e-10);
        assert!(sched.max_residual() < 1e-9);
        assert!(linalg::min_eigenvalue(&sched.steps[3].covariances.p0) > 0.0);
    }

    #[test]
    fn horizon_checks() {
        let sys = chain_system(2);
        let info = InfoStructure::from_graph(&CommGraph::complete(2, 1).unwrap()).unwrap();
        let model =
            FilterModel::new(sys, build_average_coupling_cost(2, 1, 1.0).unwrap(), info).unwrap();
        assert!(gain_schedule(&model, 0, Execution::Sequential).is_err());
        let sched = gain_schedule(&model, 3, Execution::Sequential).unwrap();
        assert_eq!(sched.step(4), Err(Error::Horizon { t: 4, horizon: 3 }));
        assert!(sched.step(0).is_err());
        assert_eq!(sched.step(3).unwrap().t, 3);
    }
}
