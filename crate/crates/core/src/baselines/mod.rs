//! Comparison strategies and the Monte Carlo harness.

mod consensus;
mod monte_carlo;

pub use consensus::{
    ConsensusKf, ConsensusParams, DEFAULT_CONSENSUS_ITERATIONS, DEFAULT_STEP_FRACTION,
};
pub use monte_carlo::{
    monte_carlo, sample_path, McConfig, SimulationResult, StrategyStats, Trajectory,
};

use nalgebra::DVector;

use crate::error::Result;
use crate::filter::{FilterModel, GainSchedule, InnovationFilter, OnlineGains};

/// An estimation strategy for the whole team.
///
/// A runner sees the stacked measurements `y(1), y(2), …` in order and must
/// restrict each agent to the information it is entitled to.
pub trait Strategy: Sync {
    fn name(&self) -> &str;
    fn start(&self) -> Result<Box<dyn StrategyRunner + '_>>;
}

pub trait StrategyRunner {
    /// Consume `y(t)` for the next `t` and return `ẑ_i(t)` for every agent.
    fn step(&mut self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>>;
}

impl StrategyRunner for InnovationFilter<'_> {
    fn step(&mut self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        InnovationFilter::step(self, y)
    }
}

/// Common estimate plus a linear correction on the local innovation.
#[derive(Debug, Clone)]
pub struct InnovationStrategy<'a> {
    name: String,
    model: &'a FilterModel,
    gains: OnlineGains,
}

impl<'a> InnovationStrategy<'a> {
    pub fn new(name: impl Into<String>, model: &'a FilterModel, gains: OnlineGains) -> Self {
        Self {
            name: name.into(),
            model,
            gains,
        }
    }

    pub fn gains(&self) -> &OnlineGains {
        &self.gains
    }
}

impl Strategy for InnovationStrategy<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn start(&self) -> Result<Box<dyn StrategyRunner + '_>> {
        Ok(Box::new(InnovationFilter::new(self.model, &self.gains)?))
    }
}

/// Team-optimal filter driven by the schedule's `F_i(t)`.
pub fn mtmse_strategy<'a>(
    model: &'a FilterModel,
    schedule: &GainSchedule,
) -> InnovationStrategy<'a> {
    InnovationStrategy::new("mtmse", model, schedule.team_gains())
}

/// `ẑ_i(t) = L_i E[x(t) | I_i(t)]`, ignoring the coupling in the cost.
pub fn mmse_strategy<'a>(
    model: &'a FilterModel,
    schedule: &GainSchedule,
) -> InnovationStrategy<'a> {
    InnovationStrategy::new("mmse", model, schedule.mmse_gains())
}
