//! Online estimation from precomputed gains: only matrix-vector products per step.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::FilterModel;
use crate::error::{Error, Result};

/// Centralized predictor gains `K(s)` and per-agent innovation gains `G_i(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineGains {
    pub kalman: Vec<DMatrix<f64>>,
    /// `agent[t−1][i]`.
    pub agent: Vec<Vec<DMatrix<f64>>>,
}

impl OnlineGains {
    pub fn horizon(&self) -> usize {
        self.agent.len()
    }
}

/// Produces `ẑ_i(t) = L_i x̂^com(t) + G_i(t) (I^loc_i(t) − C^loc_i x̂(anchor))` one step at a time.
#[derive(Debug, Clone)]
pub struct InnovationFilter<'a> {
    model: &'a FilterModel,
    gains: &'a OnlineGains,
    history: VecDeque<DVector<f64>>,
    t: usize,
    anchor: usize,
    x_anchor: DVector<f64>,
}

impl<'a> InnovationFilter<'a> {
    pub fn new(model: &'a FilterModel, gains: &'a OnlineGains) -> Result<Self> {
        if gains.agent.iter().any(|g| g.len() != model.agents()) {
            return Err(Error::Dimension(format!(
                "gains must list one matrix per agent ({})",
                model.agents()
            )));
        }
        Ok(Self {
            model,
            gains,
            history: VecDeque::with_capacity(model.tau_star() + 1),
            t: 0,
            anchor: 1,
            x_anchor: DVector::zeros(model.system().state_dim()),
        })
    }

    /// Last processed time step (0 before the first measurement).
    pub fn time(&self) -> usize {
        self.t
    }

    /// Feed `y(t)` for the next `t` and return every agent's estimate.
    pub fn step(&mut self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let system = self.model.system();
        if y.len() != system.total_measurement_dim() {
            return Err(Error::Dimension(format!(
                "stacked measurement has length {}, expected {}",
                y.len(),
                system.total_measurement_dim()
            )));
        }
        let t = self.t + 1;
        let gains = self.gains.agent.get(t - 1).ok_or(Error::Horizon {
            t,
            horizon: self.gains.horizon(),
        })?;
        self.history.push_back(y.clone());
        if self.history.len() > self.model.tau_star() + 1 {
            self.history.pop_front();
        }
        self.t = t;

        let target = self.model.anchor(t);
        while self.anchor < target {
            let s = self.anchor;
            let k = self.gains.kalman.get(s - 1).ok_or(Error::Horizon {
                t: s,
                horizon: self.gains.kalman.len(),
            })?;
            let ys = &self.history[self.history.len() - 1 - (t - s)];
            let corrected = &self.x_anchor + k * (ys - system.c_stacked() * &self.x_anchor);
            self.x_anchor = system.a() * corrected;
            self.anchor += 1;
        }

        let slice = self.model.slice(t);
        let x_com = self.model.a_power(t - self.anchor) * &self.x_anchor;
        let history = &self.history;
        let at = |s: usize| &history[history.len() - 1 - (t - s)];
        (0..self.model.agents())
            .map(|i| {
                let agent = &slice.agents[i];
                let g = &gains[i];
                let li = self.model.cost().l(i);
                if g.shape() != (li.nrows(), agent.dim()) {
                    return Err(Error::Dimension(format!(
                        "gain of agent {i} at time {t} is {:?}, expected {:?}",
                        g.shape(),
                        (li.nrows(), agent.dim())
                    )));
                }
                let local = slice.gather(system, i, t, at);
                let innovation = local - &agent.c_loc * &self.x_anchor;
                Ok(li * &x_com + g * innovation)
            })
            .collect()
    }
}

/// Run the filter over a measurement stream `y(1), y(2), …`; result is indexed `[t−1][i]`.
pub fn run_filter(
    model: &FilterModel,
    gains: &OnlineGains,
    measurements: &[DVector<f64>],
) -> Result<Vec<Vec<DVector<f64>>>> {
    let mut f = InnovationFilter::new(model, gains)?;
    measurements.iter().map(|y| f.step(y)).collect()
}
