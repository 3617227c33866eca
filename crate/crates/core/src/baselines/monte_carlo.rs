//! Monte Carlo evaluation of strategies on common random numbers.
//!
//! Path `k` draws from a ChaCha8 stream selected by `(seed, k)`, so paths are
//! independent of each other and of the order in which they are evaluated.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Strategy;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;
use crate::model::{CostModel, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub horizon: usize,
    pub paths: usize,
    pub seed: u64,
    pub exec: Execution,
}

/// States `x(1..=T)` and stacked measurements `y(1..=T)` of one sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStats {
    pub name: String,
    /// Mean over paths of `Σ_t c(x(t), ẑ(t))`.
    pub mean_total: f64,
    /// Sample standard deviation of the path totals divided by `√paths`.
    pub std_error: f64,
    pub mean_per_step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyStats>,
}

impl SimulationResult {
    pub fn get(&self, name: &str) -> Option<&StrategyStats> {
        self.strategies.iter().find(|s| s.name == name)
    }
}

struct Sampler<'a> {
    system: &'a LinearSystem,
    sqrt_x: DMatrix<f64>,
    sqrt_q: DMatrix<f64>,
    sqrt_r: Vec<DMatrix<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(system: &'a LinearSystem) -> Self {
        Self {
            system,
            sqrt_x: linalg::psd_sqrt(system.sigma_x()),
            sqrt_q: linalg::psd_sqrt(system.q()),
            sqrt_r: system.rs().iter().map(linalg::psd_sqrt).collect(),
        }
    }

    fn gaussian(rng: &mut ChaCha8Rng, sqrt: &DMatrix<f64>) -> DVector<f64> {
        let z = DVector::from_fn(sqrt.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        sqrt * z
    }

    fn path(&self, horizon: usize, seed: u64, index: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let sys = self.system;
        let mut x = Self::gaussian(&mut rng, &self.sqrt_x);
        let mut xs = Vec::with_capacity(horizon);
        let mut ys = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut y = sys.c_stacked() * &x;
            for (i, sr) in self.sqrt_r.iter().enumerate() {
                let v = Self::gaussian(&mut rng, sr);
                let mut rows = y.rows_mut(sys.measurement_offset(i), v.len());
                rows += v;
            }
            let w = Self::gaussian(&mut rng, &self.sqrt_q);
            let next = sys.a() * &x + w;
            xs.push(x);
            ys.push(y);
            x = next;
        }
        Trajectory { x: xs, y: ys }
    }
}

/// Draw path `index` of the stream keyed by `seed`.
pub fn sample_path(system: &LinearSystem, horizon: usize, seed: u64, index: u64) -> Trajectory {
    Sampler::new(system).path(horizon, seed, index)
}

/// Simulate `paths` trajectories and evaluate every strategy on each of them.
pub fn monte_carlo(
    system: &LinearSystem,
    cost: &CostModel,
    strategies: &[&dyn Strategy],
    cfg: McConfig,
) -> Result<SimulationResult> {
    if cfg.paths == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidArgument(
            "paths and horizon must be at least 1".into(),
        ));
    }
    if cost.agents() != system.agents() || cost.state_dim() != system.state_dim() {
        return Err(Error::Dimension("cost does not match the system".into()));
    }
    let sampler = Sampler::new(system);
    let per_path: Vec<Vec<Vec<f64>>> = cfg.exec.try_map(cfg.paths, |k| {
        let traj = sampler.path(cfg.horizon, cfg.seed, k as u64);
        strategies
            .iter()
            .map(|s| {
                let mut runner = s.start()?;
                traj.x
                    .iter()
                    .zip(&traj.y)
                    .map(|(x, y)| Ok(cost.evaluate(x, &runner.step(y)?)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let n = cfg.paths as f64;
    let stats = strategies
        .iter()
        .enumerate()
        .map(|(si, s)| {
            let totals: Vec<f64> = per_path.iter().map(|p| p[si].iter().sum()).collect();
            let mean_total = totals.iter().sum::<f64>() / n;
            let std_error = if cfg.paths > 1 {
                let var = totals.iter().map(|v| (v - mean_total).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            let mut mean_per_step = vec![0.0; cfg.horizon];
            for p in &per_path {
                for (m, v) in mean_per_step.iter_mut().zip(&p[si]) {
                    *m += v;
                }
            }
            mean_per_step.iter_mut().for_each(|m| *m /= n);
            StrategyStats {
                name: s.name().to_string(),
                mean_total,
                std_error,
                mean_per_step,
            }
        })
        .collect();
    Ok(SimulationResult {
        paths: cfg.paths,
        horizon: cfg.horizon,
        seed: cfg.seed,
        strategies: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{mmse_strategy, mtmse_strategy};
    use crate::filter::{gain_schedule, FilterModel};
    use crate::graph::{CommGraph, InfoStructure};
    use crate::model::build_average_coupling_cost;

    fn intro(sigma: f64, lambda: f64) -> FilterModel {
        let m = |v| DMatrix::from_element(1, 1, v);
        let sys = LinearSystem::new(
            m(0.0),
            vec![m(1.0), m(1.0)],
            m(1.0),
            vec![m(sigma * sigma), m(sigma * sigma)],
            m(1.0),
        )
        .unwrap();
        let cost = build_average_coupling_cost(2, 1, lambda)
            .unwrap()
            .with_selector(vec![m(1.0), m(1.0)])
            .unwrap();
        let info = InfoStructure::from_graph(&CommGraph::complete(2, 1).unwrap()).unwrap();
        FilterModel::new(sys, cost, info).unwrap()
    }

    #[test]
    fn paths_are_reproducible_and_distinct() {
        let model = intro(1.0, 4.0);
        let a = sample_path(model.system(), 5, 7, 3);
        assert_eq!(a, sample_path(model.system(), 5, 7, 3));
        assert_ne!(a, sample_path(model.system(), 5, 7, 4));
        assert_ne!(a, sample_path(model.system(), 5, 8, 3));
    }

    #[test]
    fn static_intro_cost_matches_closed_form() {
        let model = intro(1.0, 4.0);
        let sched = gain_schedule(&model, 1, Execution::Sequential).unwrap();
        let (s1, s2) = (
            mtmse_strategy(&model, &sched),
            mmse_strategy(&model, &sched),
        );
        let cfg = McConfig {
            horizon: 1,
            paths: 20_000,
            seed: 11,
            exec: Execution::Parallel,
        };
        let res = monte_carlo(model.system(), model.cost(), &[&s1, &s2], cfg).unwrap();
        let mt = res.get("mtmse").unwrap();
        assert!((mt.mean_total - 2.4).abs() < 3.0 * mt.std_error, "{mt:?}");
        let mm = res.get("mmse").unwrap();
        assert!((mm.mean_total - 2.5).abs() < 3.0 * mm.std_error, "{mm:?}");
    }

    #[test]
    fn modes_are_bitwise_identical() {
        let model = intro(0.5, 10.0);
        let sched = gain_schedule(&model, 3, Execution::Sequential).unwrap();
        let s = mtmse_strategy(&model, &sched);
        let mut cfg = McConfig {
            horizon: 3,
            paths: 300,
            seed: 5,
            exec: Execution::Sequential,
        };
        let a = monte_carlo(model.system(), model.cost(), &[&s], cfg).unwrap();
        cfg.exec = Execution::Parallel;
        let b = monte_carlo(model.system(), model.cost(), &[&s], cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.strategies[0].mean_per_step.len(), 3);
    }

    #[test]
    fn rejects_empty_runs() {
        let model = intro(1.0, 1.0);
        let cfg = McConfig {
            horizon: 1,
            paths: 0,
            seed: 0,
            exec: Execution::Sequential,
        };
        assert!(monte_carlo(model.system(), model.cost(), &[], cfg).is_err());
    }
}
