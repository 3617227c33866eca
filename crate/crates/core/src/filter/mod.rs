//! Finite- and infinite-horizon team filtering over a delay graph.
//!
//! At time `t` the common information is `y(1:t−τ*)`. The common estimate is
//! `x̂^com(t) = A^m x̂(a)` with anchor `a = max(1, t−τ*+1)` and `m = t − a`,
//! where `x̂(a)` is the centralized one-step prediction. Each agent adds
//! `F_i(t)` times the innovation of its local measurements.

mod covariance;
mod kalman;
mod online;
mod schedule;
mod steady;

pub use covariance::{CovarianceSet, NoiseAggregates};
pub use kalman::{kalman_gain, kalman_step, riccati_sequence, riccati_update, KalmanState};
pub use online::{run_filter, InnovationFilter, OnlineGains};
pub use schedule::{gain_schedule, GainSchedule, GainStep};
pub use steady::{steady_state, SteadyState, STEADY_MAX_ITER, STEADY_TOL};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{InfoStructure, LocalObservationModel, LocalSlice};
use crate::linalg;
use crate::model::{CostModel, LinearSystem};

/// Which `(i, j)` cross-covariance blocks are needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    active: Vec<Vec<bool>>,
}

impl BlockMask {
    pub fn dense(n: usize) -> Self {
        Self {
            active: vec![vec![true; n]; n],
        }
    }

    /// Diagonal blocks plus every pair with `S_ij ≠ 0`.
    pub fn from_cost(cost: &CostModel) -> Self {
        let n = cost.agents();
        Self {
            active: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| i == j || !cost.is_zero_block(i, j))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[i][j]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().flatten().filter(|&&a| a).count()
    }
}

/// Everything the offline gain computation and the online filter share.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    system: LinearSystem,
    cost: CostModel,
    info: InfoStructure,
    lom: LocalObservationModel,
    mask: BlockMask,
    powers: Vec<DMatrix<f64>>,
}

impl FilterModel {
    /// Blocks with `S_ij = 0` are skipped; see [`FilterModel::with_dense_blocks`].
    pub fn new(system: LinearSystem, cost: CostModel, info: InfoStructure) -> Result<Self> {
        if cost.agents() != system.agents() || info.agents() != system.agents() {
            return Err(Error::Dimension(format!(
                "system has {} agents, cost {}, information structure {}",
                system.agents(),
                cost.agents(),
                info.agents()
            )));
        }
        if cost.state_dim() != system.state_dim() {
            return Err(Error::Dimension(format!(
                "cost selectors act on dimension {} but the state has dimension {}",
                cost.state_dim(),
                system.state_dim()
            )));
        }
        let lom = LocalObservationModel::new(&info, &system)?;
        let mask = BlockMask::from_cost(&cost);
        let powers = linalg::powers(system.a(), info.tau_star());
        Ok(Self {
            system,
            cost,
            info,
            lom,
            mask,
            powers,
        })
    }

    /// Compute every cross-covariance block regardless of sparsity in `S`.
    pub fn with_dense_blocks(mut self) -> Self {
        self.mask = BlockMask::dense(self.agents());
        self
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn info(&self) -> &InfoStructure {
        &self.info
    }

    pub fn local_model(&self) -> &LocalObservationModel {
        &self.lom
    }

    pub fn mask(&self) -> &BlockMask {
        &self.mask
    }

    pub fn agents(&self) -> usize {
        self.system.agents()
    }

    pub fn tau_star(&self) -> usize {
        self.info.tau_star()
    }

    /// `A^p` for `p ≤ τ*`.
    pub fn a_power(&self, p: usize) -> &DMatrix<f64> {
        &self.powers[p]
    }

    /// `max(1, t − τ* + 1)`: the time of the delayed state estimate used at `t`.
    pub fn anchor(&self, t: usize) -> usize {
        (t + 1).saturating_sub(self.tau_star()).max(1)
    }

    pub fn slice(&self, t: usize) -> &LocalSlice {
        self.lom.at(t)
    }

    pub fn noise_aggregates(&self, t: usize) -> NoiseAggregates {
        covariance::noise_aggregate_covariances(self, t)
    }

    /// Innovation covariances at `t` given `P(anchor(t))`.
    pub fn covariances(
        &self,
        t: usize,
        p_anchor: &DMatrix<f64>,
        noise: &NoiseAggregates,
    ) -> Result<CovarianceSet> {
        covariance::innovation_covariances(self, t, p_anchor, noise)
    }
}
