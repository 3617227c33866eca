//! Local Kalman filters coupled by consensus averaging over the communication graph.
//!
//! Each agent filters its own measurement, then runs a few rounds of
//! `x_i ← x_i + ε Σ_j (x̃_j − x_i)` over its in-neighbours. A neighbour with
//! delay `τ` contributes `A^τ x̂_j(t − τ)`, the latest estimate it could have
//! delivered. With `instantaneous` set, rounds instead exchange the current
//! iterates of all neighbours, ignoring delays.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{Strategy, StrategyRunner};
use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::linalg;
use crate::model::{CostModel, LinearSystem};

pub const DEFAULT_CONSENSUS_ITERATIONS: usize = 1;
/// Default step size as a fraction of `1 / max in-degree`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusParams {
    pub iterations: usize,
    /// `None` picks `DEFAULT_STEP_FRACTION / max in-degree`.
    pub step_size: Option<f64>,
    pub instantaneous: bool,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_CONSENSUS_ITERATIONS,
            step_size: None,
            instantaneous: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusKf {
    name: String,
    system: LinearSystem,
    l: Vec<DMatrix<f64>>,
    neighbors: Vec<Vec<(usize, usize)>>,
    iterations: usize,
    epsilon: f64,
    instantaneous: bool,
    powers: Vec<DMatrix<f64>>,
}

impl ConsensusKf {
    pub fn new(
        system: &LinearSystem,
        cost: &CostModel,
        graph: &CommGraph,
        params: ConsensusParams,
    ) -> Result<Self> {
        let n = system.agents();
        if graph.nodes() != n || cost.agents() != n {
            return Err(Error::Dimension(format!(
                "system has {n} agents, graph {} nodes, cost {} agents",
                graph.nodes(),
                cost.agents()
            )));
        }
        graph.geodesics()?;
        let max_deg = graph.max_in_degree();
        let epsilon = params
            .step_size
            .unwrap_or(DEFAULT_STEP_FRACTION / max_deg.max(1) as f64);
        let bound = if max_deg == 0 {
            f64::INFINITY
        } else {
            1.0 / max_deg as f64
        };
        if !(epsilon > 0.0 && epsilon < bound) {
            return Err(Error::InvalidArgument(format!(
                "consensus step size {epsilon} must lie in (0, {bound})"
            )));
        }
        let neighbors: Vec<Vec<(usize, usize)>> = (0..n)
            .map(|i| {
                graph
                    .in_neighbors(i)
                    .into_iter()
                    .map(|(j, d)| (j, d as usize))
                    .collect()
            })
            .collect();
        let max_delay = neighbors
            .iter()
            .flatten()
            .map(|&(_, d)| d)
            .max()
            .unwrap_or(0);
        Ok(Self {
            name: "ckf".into(),
            system: system.clone(),
            l: cost.l_blocks().to_vec(),
            neighbors,
            iterations: params.iterations,
            epsilon,
            instantaneous: params.instantaneous,
            powers: linalg::powers(system.a(), max_delay),
        })
    }

    pub fn step_size(&self) -> f64 {
        self.epsilon
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn max_delay(&self) -> usize {
        self.powers.len() - 1
    }
}

impl Strategy for ConsensusKf {
    fn name(&self) -> &str {
        &self.name
    }

    fn start(&self) -> Result<Box<dyn StrategyRunner + '_>> {
        let n = self.system.agents();
        Ok(Box::new(ConsensusRunner {
            kf: self,
            t: 0,
            prior_x: vec![DVector::zeros(self.system.state_dim()); n],
            prior_p: vec![self.system.sigma_x().clone(); n],
            past: VecDeque::with_capacity(self.max_delay()),
        }))
    }
}

struct ConsensusRunner<'a> {
    kf: &'a ConsensusKf,
    t: usize,
    prior_x: Vec<DVector<f64>>,
    prior_p: Vec<DMatrix<f64>>,
    /// Final estimates, most recent time first.
    past: VecDeque<Vec<DVector<f64>>>,
}

impl StrategyRunner for ConsensusRunner<'_> {
    fn step(&mut self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let sys = &self.kf.system;
        if y.len() != sys.total_measurement_dim() {
            return Err(Error::Dimension(format!(
                "stacked measurement has length {}, expected {}",
                y.len(),
                sys.total_measurement_dim()
            )));
        }
        self.t += 1;
        let t = self.t;
        let n = sys.agents();
        let dx = sys.state_dim();

        let mut x = Vec::with_capacity(n);
        let mut post_p = Vec::with_capacity(n);
        for i in 0..n {
            let c = sys.c(i);
            let p = &self.prior_p[i];
            let s = c * p * c.transpose() + sys.r(i);
            let k = linalg::right_spd_solve(&(p * c.transpose()), &s, "C_i P C_i^T + R_i")?;
            let yi = y.rows(sys.measurement_offset(i), c.nrows());
            x.push(&self.prior_x[i] + &k * (yi - c * &self.prior_x[i]));
            let d = DMatrix::identity(dx, dx) - &k * c;
            post_p.push(linalg::symmetrize(
                &(&d * p * d.transpose() + &k * sys.r(i) * k.transpose()),
            ));
        }

        let eps = self.kf.epsilon;
        if self.kf.instantaneous {
            for _ in 0..self.kf.iterations {
                let prev = x.clone();
                for (i, xi) in x.iter_mut().enumerate() {
                    for &(j, _) in &self.kf.neighbors[i] {
                        *xi += (&prev[j] - &prev[i]) * eps;
                    }
                }
            }
        } else {
            let received: Vec<Vec<DVector<f64>>> = (0..n)
                .map(|i| {
                    self.kf.neighbors[i]
                        .iter()
                        .filter(|&&(_, d)| d < t)
                        .map(|&(j, d)| &self.kf.powers[d] * &self.past[d - 1][j])
                        .collect()
                })
                .collect();
            for _ in 0..self.kf.iterations {
                for (xi, recv) in x.iter_mut().zip(&received) {
                    let mut delta = DVector::zeros(dx);
                    for r in recv {
                        delta += r - &*xi;
                    }
                    *xi += delta * eps;
                }
            }
        }

        let out = (0..n).map(|i| &self.kf.l[i] * &x[i]).collect();
        for i in 0..n {
            self.prior_x[i] = sys.a() * &x[i];
            self.prior_p[i] =
                linalg::symmetrize(&(sys.a() * &post_p[i] * sys.a().transpose() + sys.q()));
        }
        self.past.push_front(x);
        self.past.truncate(self.kf.max_delay());
        Ok(out)
    }
}
