//! Independent oracles and random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mtmse::estimator::GaussianJointModel;
use mtmse::filter::FilterModel;
use mtmse::graph::{CommGraph, Edge};
use mtmse::linalg;
use mtmse::model::{CostModel, LinearSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// `M Mᵀ + floor · I` for a random square `M`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let m = uniform(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

/// Random cost with a dense positive definite `S` and random selectors.
pub fn random_cost(rng: &mut ChaCha8Rng, n: usize, dx: usize) -> CostModel {
    let dz: Vec<usize> = (0..n).map(|_| rng.random_range(1..=2)).collect();
    let total: usize = dz.iter().sum();
    let s = random_spd(rng, total, 0.2);
    let mut blocks = Vec::with_capacity(n);
    let mut r = 0;
    for &di in &dz {
        let mut row = Vec::with_capacity(n);
        let mut c = 0;
        for &dj in &dz {
            row.push(s.view((r, c), (di, dj)).into_owned());
            c += dj;
        }
        blocks.push(row);
        r += di;
    }
    let l = dz.iter().map(|&d| uniform(rng, d, dx)).collect();
    CostModel::new(blocks, l).unwrap()
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, dx: usize) -> LinearSystem {
    let mut a = uniform(rng, dx, dx);
    let rho = linalg::spectral_radius(&a);
    if rho > 0.0 {
        a *= rng.random_range(0.3..1.1) / rho;
    }
    let c = (0..n)
        .map(|_| {
            let d = rng.random_range(1..=2);
            uniform(rng, d, dx)
        })
        .collect::<Vec<_>>();
    let r = c
        .iter()
        .map(|ci| random_spd(rng, ci.nrows(), 0.1))
        .collect();
    LinearSystem::new(a, c, random_spd(rng, dx, 0.05), r, random_spd(rng, dx, 0.1)).unwrap()
}

/// Random strongly connected digraph: a shuffled Hamiltonian cycle plus random extra edges.
pub fn random_strongly_connected(rng: &mut ChaCha8Rng, n: usize, max_delay: u32) -> CommGraph {
    let mut order: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        order.swap(k, rng.random_range(0..=k));
    }
    let mut edges = Vec::new();
    for k in 0..n {
        edges.push(Edge {
            from: order[k],
            to: order[(k + 1) % n],
            delay: rng.random_range(1..=max_delay),
        });
    }
    let p = rng.random_range(0.0..0.5);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                edges.push(Edge {
                    from: i,
                    to: j,
                    delay: rng.random_range(1..=max_delay),
                });
            }
        }
    }
    CommGraph::new(n, edges).unwrap()
}

/// Information sets `{(source, time)}` from the recursion
/// `I_i(t) = y_i(1:t) ∪ ⋃_{(j→i)} I_j(t − delay)`, with empty sets before time 1.
pub fn literal_information_sets(
    graph: &CommGraph,
    steps: usize,
) -> Vec<Vec<BTreeSet<(usize, usize)>>> {
    let n = graph.nodes();
    let mut sets: Vec<Vec<BTreeSet<(usize, usize)>>> = vec![vec![BTreeSet::new(); n]];
    for t in 1..=steps {
        let mut now = Vec::with_capacity(n);
        for i in 0..n {
            let mut s: BTreeSet<(usize, usize)> = (1..=t).map(|k| (i, k)).collect();
            for e in graph.edges().iter().filter(|e| e.to == i) {
                let d = e.delay as usize;
                if t > d {
                    s.extend(sets[t - d][e.from].iter().copied());
                }
            }
            now.push(s);
        }
        sets.push(now);
    }
    sets
}

/// Every variable of the system written as a linear map of independent primitives
/// `(x(1), w(1), …, w(T−1), v(1), …, v(T))`.
pub struct PrimitiveModel {
    pub x: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
    pub lambda: DMatrix<f64>,
    pub offsets_y: Vec<usize>,
}

impl PrimitiveModel {
    pub fn new(system: &LinearSystem, horizon: usize) -> Self {
        let dx = system.state_dim();
        let dy = system.total_measurement_dim();
        let total = dx + dx * (horizon - 1) + dy * horizon;
        let mut blocks = vec![system.sigma_x().clone()];
        blocks.extend((1..horizon).map(|_| system.q().clone()));
        blocks.extend((0..horizon).map(|_| system.r_stacked().clone()));
        let lambda = linalg::block_diag(&blocks);
        let mut x = Vec::with_capacity(horizon);
        let mut first = DMatrix::zeros(dx, total);
        first.view_mut((0, 0), (dx, dx)).fill_with_identity();
        x.push(first);
        for t in 1..horizon {
            let mut next = system.a() * &x[t - 1];
            let mut w = next.view_mut((0, dx * t), (dx, dx));
            w += DMatrix::<f64>::identity(dx, dx);
            x.push(next);
        }
        let v0 = dx * horizon;
        let y = (0..horizon)
            .map(|t| {
                let mut m = system.c_stacked() * &x[t];
                let mut v = m.view_mut((0, v0 + dy * t), (dy, dy));
                v += DMatrix::<f64>::identity(dy, dy);
                m
            })
            .collect();
        let offsets_y = (0..=system.agents())
            .map(|i| {
                if i < system.agents() {
                    system.measurement_offset(i)
                } else {
                    dy
                }
            })
            .collect();
        Self {
            x,
            y,
            lambda,
            offsets_y,
        }
    }

    pub fn cov(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * &self.lambda * b.transpose()
    }

    /// Rows of `y_source(time)` (1-based time).
    pub fn measurement(&self, source: usize, time: usize) -> DMatrix<f64> {
        let r0 = self.offsets_y[source];
        let r1 = self.offsets_y[source + 1];
        self.y[time - 1].rows(r0, r1 - r0).into_owned()
    }

    /// One-shot problem at time `t`: state `x(t)`, common block `y(1:t−τ*)` and local blocks in canonical order.
    pub fn joint_at(&self, model: &FilterModel, t: usize) -> GaussianJointModel {
        let tau = model.tau_star();
        let n = model.agents();
        let common_rows: Vec<DMatrix<f64>> = (1..=t.saturating_sub(tau))
            .map(|s| self.y[s - 1].clone())
            .collect();
        let ncols = self.lambda.ncols();
        let common = linalg::vstack(&common_rows, ncols);
        let locals: Vec<DMatrix<f64>> = (0..n)
            .map(|i| {
                let rows: Vec<DMatrix<f64>> = model
                    .info()
                    .local_entries_at(i, t)
                    .map(|e| self.measurement(e.source, t - e.lag))
                    .collect();
                linalg::vstack(&rows, ncols)
            })
            .collect();
        let all: Vec<&DMatrix<f64>> = std::iter::once(&common).chain(&locals).collect();
        let xt = &self.x[t - 1];
        let theta = all.iter().map(|m| self.cov(xt, m)).collect();
        let sigma = all
            .iter()
            .map(|a| all.iter().map(|b| self.cov(a, b)).collect())
            .collect();
        GaussianJointModel::new(self.cov(xt, xt), theta, sigma).unwrap()
    }
}

/// Filtered estimates `E[x(t) | y(1:t)]` from the measurement-update / time-update form.
pub fn textbook_kalman(system: &LinearSystem, ys: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let c = system.c_stacked();
    let n = system.state_dim();
    let mut x = DVector::zeros(n);
    let mut p = system.sigma_x().clone();
    let mut out = Vec::with_capacity(ys.len());
    for y in ys {
        let s = c * &p * c.transpose() + system.r_stacked();
        let k = &p * c.transpose() * s.try_inverse().expect("innovation covariance invertible");
        let xf = &x + &k * (y - c * &x);
        let pf = (DMatrix::identity(n, n) - &k * c) * &p;
        out.push(xf.clone());
        x = system.a() * xf;
        p = system.a() * pf * system.a().transpose() + system.q();
    }
    out
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
