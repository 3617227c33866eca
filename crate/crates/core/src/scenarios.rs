//! Reference setups: the two-agent toy problem, a UAV formation and a vehicle platoon.

use nalgebra::DMatrix;

use crate::baselines::{monte_carlo, ConsensusKf, ConsensusParams, McConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{gain_schedule, FilterModel};
use crate::graph::{CommGraph, InfoStructure};
use crate::model::{
    build_average_coupling_cost, build_chain_coupling_cost, CostModel, LinearSystem,
};

/// A system, a cost, the communication graph and a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub system: LinearSystem,
    pub cost: CostModel,
    /// `None` only for a single agent, which then filters centrally.
    pub graph: Option<CommGraph>,
    pub horizon: usize,
}

impl Setup {
    pub fn info(&self) -> Result<InfoStructure> {
        match (&self.graph, self.system.agents()) {
            (Some(g), _) => InfoStructure::from_graph(g),
            (None, 1) => Ok(InfoStructure::single_agent()),
            (None, n) => Err(Error::InvalidArgument(format!(
                "{n} agents need a communication graph"
            ))),
        }
    }

    pub fn filter_model(&self) -> Result<FilterModel> {
        FilterModel::new(self.system.clone(), self.cost.clone(), self.info()?)
    }

    /// The graph, or an edgeless single node.
    pub fn comm_graph(&self) -> Result<CommGraph> {
        match &self.graph {
            Some(g) => Ok(g.clone()),
            None => CommGraph::new(self.system.agents(), vec![]),
        }
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// `x ~ N(0, 1)` observed by two agents as `y_i = x + v_i`, `var(v_i) = σ²`, both estimating `x`.
pub fn two_agent(sigma: f64, lambda: f64) -> Result<Setup> {
    let v = sigma * sigma;
    let system = LinearSystem::new(
        scalar(0.0),
        vec![scalar(1.0); 2],
        scalar(1.0),
        vec![scalar(v); 2],
        scalar(1.0),
    )?;
    let cost = build_average_coupling_cost(2, 1, lambda)?.with_selector(vec![scalar(1.0); 2])?;
    Ok(Setup {
        system,
        cost,
        graph: Some(CommGraph::complete(2, 1)?),
        horizon: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoAgentClosedForm {
    pub alpha: f64,
    pub gain: f64,
    pub j_star: f64,
    pub j_mmse: f64,
    /// `(J^mmse − J*) / J*`.
    pub improvement: f64,
}

pub fn two_agent_closed_form(sigma: f64, lambda: f64) -> TwoAgentClosedForm {
    let v = sigma * sigma;
    let alpha = (1.0 + lambda / 4.0) / (1.0 + lambda / 2.0);
    let gain = 1.0 / (1.0 + alpha * v);
    let j_star = (2.0 + lambda) * alpha * v / (1.0 + alpha * v);
    let j_mmse = 2.0 * (v / (1.0 + v)) * (1.0 + (lambda / 4.0) * (1.0 + 2.0 * v) / (1.0 + v));
    TwoAgentClosedForm {
        alpha,
        gain,
        j_star,
        j_mmse,
        improvement: (j_mmse - j_star) / j_star,
    }
}

/// Altitude-holding formation: agent 0 sees twice the sum of all states, the others a weak reading of
/// their own. Complete graph with delay 2, average-coupling cost with `S_ij = (δ_ij + coupling) I`.
pub fn uav(n: usize, coupling: f64) -> Result<Setup> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "a formation needs at least two agents".into(),
        ));
    }
    let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.65 } else { 0.1 });
    let c = (0..n)
        .map(|i| {
            if i == 0 {
                DMatrix::from_element(1, n, 2.0)
            } else {
                DMatrix::from_fn(1, n, |_, j| if j == i { 0.1 } else { 0.0 })
            }
        })
        .collect();
    let system = LinearSystem::new(
        a,
        c,
        DMatrix::identity(n, n),
        vec![scalar(0.1); n],
        DMatrix::identity(n, n),
    )?;
    let lambda = coupling * (n * n) as f64;
    let cost = build_average_coupling_cost(n, 1, lambda)?;
    Ok(Setup {
        system,
        cost,
        graph: Some(CommGraph::complete(n, 2)?),
        horizon: 100,
    })
}

/// Four vehicles in a line, each observing the full state, with chain coupling on adjacent differences.
pub fn platoon(lambda: f64) -> Result<Setup> {
    let n = 4;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(n, n, &[
        0.9, 0.0, 0.0, 0.0,
        0.7, 0.9, 0.0, 0.0,
        0.7, 0.7, 0.9, 0.0,
        0.5, 0.7, 0.7, 0.9,
    ]);
    let system = LinearSystem::new(
        a,
        vec![DMatrix::identity(n, n); n],
        DMatrix::identity(n, n),
        vec![DMatrix::identity(n, n) * 0.1; n],
        DMatrix::identity(n, n),
    )?;
    let cost = build_chain_coupling_cost(n, 1, lambda)?;
    Ok(Setup {
        system,
        cost,
        graph: Some(CommGraph::bidirectional_chain(n, 1)?),
        horizon: 100,
    })
}

/// One agent, scalar state, `S = L = 1`.
pub fn scalar_benchmark(
    a: f64,
    c: f64,
    q: f64,
    r: f64,
    sigma_x: f64,
    horizon: usize,
) -> Result<Setup> {
    let system = LinearSystem::new(
        scalar(a),
        vec![scalar(c)],
        scalar(q),
        vec![scalar(r)],
        scalar(sigma_x),
    )?;
    let cost = CostModel::new(vec![vec![scalar(1.0)]], vec![scalar(1.0)])?;
    Ok(Setup {
        system,
        cost,
        graph: None,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusRun {
    pub params: ConsensusParams,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub lambda: f64,
    pub j_star: f64,
    pub j_mmse: f64,
    pub delta_mmse: f64,
    /// Empirical consensus-filter cost and its standard error.
    pub j_ckf: Option<(f64, f64)>,
    pub delta_ckf: Option<f64>,
}

/// Relative improvements of the team-optimal filter over the horizon of `setup`.
pub fn improvement(
    setup: &Setup,
    lambda: f64,
    ckf: Option<ConsensusRun>,
    exec: Execution,
) -> Result<Improvement> {
    let model = setup.filter_model()?;
    let sched = gain_schedule(&model, setup.horizon, exec)?;
    let j_star = sched.optimal_cost();
    let j_mmse = sched.mmse_cost();
    let j_ckf = match ckf {
        Some(run) => {
            let strategy =
                ConsensusKf::new(&setup.system, &setup.cost, &setup.comm_graph()?, run.params)?;
            let cfg = McConfig {
                horizon: setup.horizon,
                paths: run.paths,
                seed: run.seed,
                exec,
            };
            let res = monte_carlo(&setup.system, &setup.cost, &[&strategy], cfg)?;
            Some((res.strategies[0].mean_total, res.strategies[0].std_error))
        }
        None => None,
    };
    Ok(Improvement {
        lambda,
        j_star,
        j_mmse,
        delta_mmse: (j_mmse - j_star) / j_star,
        j_ckf,
        delta_ckf: j_ckf.map(|(j, _)| (j - j_star) / j_star),
    })
}

/// [`improvement`] over a grid of coupling weights.
pub fn improvement_sweep(
    make: impl Fn(f64) -> Result<Setup>,
    grid: &[f64],
    ckf: Option<ConsensusRun>,
    exec: Execution,
) -> Result<Vec<Improvement>> {
    grid.iter()
        .map(|&lambda| improvement(&make(lambda)?, lambda, ckf, exec))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_values() {
        let cf = two_agent_closed_form(1.0, 4.0);
        assert_abs_diff_eq!(cf.gain, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(cf.j_star, 2.4, epsilon = 1e-14);
        assert_abs_diff_eq!(cf.j_mmse, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            two_agent_closed_form(1.0, 1e9).improvement,
            0.125,
            epsilon = 1e-6
        );
        assert_eq!(two_agent_closed_form(0.3, 0.0).improvement, 0.0);
    }

    #[test]
    fn reference_setups_validate() {
        for s in [
            uav(4, 1.0).unwrap(),
            uav(10, 10.0).unwrap(),
            platoon(5.0).unwrap(),
            two_agent(1.0, 4.0).unwrap(),
        ] {
            let report = validate(&s.system, &s.cost).unwrap();
            assert!(report.passed, "{report}");
            assert!(s.filter_model().is_ok());
        }
    }

    #[test]
    fn tau_star_of_references() {
        assert_eq!(uav(4, 1.0).unwrap().info().unwrap().tau_star(), 2);
        assert_eq!(platoon(1.0).unwrap().info().unwrap().tau_star(), 3);
        assert_eq!(
            scalar_benchmark(1.0, 1.0, 1.0, 1.0, 1.0, 5)
                .unwrap()
                .info()
                .unwrap()
                .tau_star(),
            1
        );
    }

    #[test]
    fn two_agent_analytic_improvement() {
        let imp = improvement(
            &two_agent(1.0, 4.0).unwrap(),
            4.0,
            None,
            Execution::Sequential,
        )
        .unwrap();
        assert_abs_diff_eq!(imp.delta_mmse, 0.1 / 2.4, epsilon = 1e-12);
        assert!(imp.delta_ckf.is_none());
    }
}
