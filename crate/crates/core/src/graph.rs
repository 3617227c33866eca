//! Delay-weighted communication graphs and the information structure they induce.
//!
//! Agent `i` knows `y_j(s)` at time `t` exactly when `s ≤ t − ℓ_ji`, where
//! `ℓ_ji` is the delay-weighted geodesic distance from `j` to `i`. With
//! `τ*` the weighted diameter, every measurement older than `t − τ*` is common
//! to all agents; the rest of agent `i`'s information is its local part,
//! listed as entries `(j, k)` meaning `y_j(t − k)` with `ℓ_ji ≤ k < τ*`.
//!
//! Local entries are ordered by descending lag (oldest first), then by
//! ascending source. All covariance block layouts follow this order.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LinearSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Communication delay in time steps (≥ 1).
    pub delay: u32,
}

/// Directed graph over agents `0..n`; an edge `(i, j)` carries `y_i`'s information to `j` after `delay` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl CommGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "graph needs at least one node".into(),
            ));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge {}->{} out of range for {n} nodes",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidArgument(format!(
                    "self-loop at node {}",
                    e.from
                )));
            }
            if e.delay == 0 {
                return Err(Error::InvalidArgument(format!(
                    "edge {}->{} has zero delay",
                    e.from, e.to
                )));
            }
        }
        Ok(Self { n, edges })
    }

    /// Every ordered pair connected with the same delay.
    pub fn complete(n: usize, delay: u32) -> Result<Self> {
        let edges = (0..n)
            .flat_map(|i| {
                (0..n).filter(move |&j| j != i).map(move |j| Edge {
                    from: i,
                    to: j,
                    delay,
                })
            })
            .collect();
        Self::new(n, edges)
    }

    /// Agents on a line, each linked both ways to its neighbours.
    pub fn bidirectional_chain(n: usize, delay: u32) -> Result<Self> {
        let edges = (0..n.saturating_sub(1))
            .flat_map(|i| {
                [
                    Edge {
                        from: i,
                        to: i + 1,
                        delay,
                    },
                    Edge {
                        from: i + 1,
                        to: i,
                        delay,
                    },
                ]
            })
            .collect();
        Self::new(n, edges)
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// In-neighbours of `i` with the delay of the (fastest) incoming edge.
    pub fn in_neighbors(&self, i: usize) -> Vec<(usize, u32)> {
        let mut out: Vec<(usize, u32)> = Vec::new();
        for e in self.edges.iter().filter(|e| e.to == i) {
            match out.iter_mut().find(|(j, _)| *j == e.from) {
                Some(slot) => slot.1 = slot.1.min(e.delay),
                None => out.push((e.from, e.delay)),
            }
        }
        out.sort_unstable();
        out
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.n)
            .map(|i| self.in_neighbors(i).len())
            .max()
            .unwrap_or(0)
    }

    /// All-pairs weighted distances; fails on the first unreachable ordered pair.
    pub fn geodesics(&self) -> Result<Geodesics> {
        const INF: u64 = u64::MAX;
        let n = self.n;
        let mut d = vec![vec![INF; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for e in &self.edges {
            d[e.from][e.to] = d[e.from][e.to].min(e.delay as u64);
        }
        for k in 0..n {
            for i in 0..n {
                if d[i][k] == INF {
                    continue;
                }
                for j in 0..n {
                    if d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let mut tau_star = 0;
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v == INF {
                    return Err(Error::NotStronglyConnected { from: i, to: j });
                }
                tau_star = tau_star.max(v);
            }
        }
        Ok(Geodesics {
            dist: d
                .into_iter()
                .map(|r| r.into_iter().map(|v| v as usize).collect())
                .collect(),
            tau_star: tau_star as usize,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geodesics {
    /// `dist[j][i]` is the shortest delay from `j` to `i`.
    pub dist: Vec<Vec<usize>>,
    /// Weighted diameter.
    pub tau_star: usize,
}

/// `y_source(t − lag)` belongs to the local information of the owning agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalEntry {
    pub source: usize,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoStructure {
    tau_star: usize,
    dist: Vec<Vec<usize>>,
    entries: Vec<Vec<LocalEntry>>,
}

impl InfoStructure {
    /// Derive the common/local split from a strongly connected graph with at least two agents.
    pub fn from_graph(graph: &CommGraph) -> Result<Self> {
        let geo = graph.geodesics()?;
        if graph.nodes() < 2 || geo.tau_star == 0 {
            return Err(Error::InvalidArgument(
                "a communication graph needs at least two agents; use InfoStructure::single_agent for centralized filtering".into(),
            ));
        }
        Ok(Self::from_distances(geo.dist, geo.tau_star))
    }

    /// One agent that sees its own measurement immediately: the centralized filtering problem.
    pub fn single_agent() -> Self {
        Self::from_distances(vec![vec![0]], 1)
    }

    fn from_distances(dist: Vec<Vec<usize>>, tau_star: usize) -> Self {
        let n = dist.len();
        let entries = (0..n)
            .map(|i| {
                (0..tau_star)
                    .rev()
                    .flat_map(|lag| (0..n).map(move |source| LocalEntry { source, lag }))
                    .filter(|e| dist[e.source][i] <= e.lag)
                    .collect()
            })
            .collect();
        Self {
            tau_star,
            dist,
            entries,
        }
    }

    pub fn agents(&self) -> usize {
        self.entries.len()
    }

    pub fn tau_star(&self) -> usize {
        self.tau_star
    }

    /// `ℓ_ji`: delay-weighted distance from `j` to `i`.
    pub fn distance(&self, j: usize, i: usize) -> usize {
        self.dist[j][i]
    }

    /// Steady-state local entries of agent `i` in canonical order.
    pub fn local_entries(&self, i: usize) -> &[LocalEntry] {
        &self.entries[i]
    }

    /// Local entries at time `t` (1-based); entries referring to times before 1 are dropped.
    pub fn local_entries_at(&self, i: usize, t: usize) -> impl Iterator<Item = LocalEntry> + '_ {
        self.entries[i].iter().copied().filter(move |e| e.lag < t)
    }

    /// Whether agent `i` knows `y_j(s)` at time `t` (all times 1-based).
    pub fn knows(&self, i: usize, j: usize, s: usize, t: usize) -> bool {
        s >= 1 && s + self.dist[j][i] <= t
    }

    /// Whether `y_j(s)` is common information at time `t`.
    pub fn is_common(&self, s: usize, t: usize) -> bool {
        s >= 1 && s + self.tau_star <= t
    }
}

/// A process-noise term `coeff · w(t − back)` inside a local measurement row block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTerm {
    pub back: usize,
    pub coeff: DMatrix<f64>,
}

/// `y_j(t−k) = state · x(anchor) + Σ coeff · w(t − back) + v_j(t − k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    pub entry: LocalEntry,
    pub state: DMatrix<f64>,
    pub process: Vec<ProcessTerm>,
}

impl RowBlock {
    pub fn rows(&self) -> usize {
        self.state.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLocalModel {
    pub blocks: Vec<RowBlock>,
    /// `rows(C^loc_i)` at this time.
    pub c_loc: DMatrix<f64>,
}

impl AgentLocalModel {
    pub fn dim(&self) -> usize {
        self.c_loc.nrows()
    }

    pub fn entries(&self) -> impl Iterator<Item = LocalEntry> + '_ {
        self.blocks.iter().map(|b| b.entry)
    }
}

/// Local observation model at one time step.
///
/// The anchor time is `a = max(1, t − τ* + 1)` and `span = t − a`; local
/// measurements are written in terms of `x(a)`, the process noise
/// `w(a..t−1)` and the measurement noise of the entries themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSlice {
    pub span: usize,
    pub agents: Vec<AgentLocalModel>,
}

impl LocalSlice {
    /// Gather `I^loc_i(t)` from a measurement history where `history(s)` is `y(s)` (1-based).
    pub fn gather<'a>(
        &self,
        system: &LinearSystem,
        i: usize,
        t: usize,
        history: impl Fn(usize) -> &'a nalgebra::DVector<f64>,
    ) -> nalgebra::DVector<f64> {
        let agent = &self.agents[i];
        let mut out = nalgebra::DVector::zeros(agent.dim());
        let mut r = 0;
        for b in &agent.blocks {
            let y = history(t - b.entry.lag);
            let off = system.measurement_offset(b.entry.source);
            let d = b.rows();
            out.rows_mut(r, d).copy_from(&y.rows(off, d));
            r += d;
        }
        out
    }
}

/// Local observation models for every time step; constant from `t = τ*` on.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservationModel {
    tau_star: usize,
    slices: Vec<LocalSlice>,
}

impl LocalObservationModel {
    pub fn new(info: &InfoStructure, system: &LinearSystem) -> Result<Self> {
        if info.agents() != system.agents() {
            return Err(Error::Dimension(format!(
                "information structure has {} agents but the system has {}",
                info.agents(),
                system.agents()
            )));
        }
        let tau = info.tau_star();
        let pw = linalg::powers(system.a(), tau);
        let slices = (1..=tau)
            .map(|t| {
                let span = t - 1;
                let agents = (0..info.agents())
                    .map(|i| {
                        let blocks: Vec<RowBlock> = info
                            .local_entries_at(i, t)
                            .map(|entry| {
                                let cj = system.c(entry.source);
                                let state = cj * &pw[span - entry.lag];
                                let process = (entry.lag + 1..=span)
                                    .map(|back| ProcessTerm {
                                        back,
                                        coeff: cj * &pw[back - entry.lag - 1],
                                    })
                                    .collect();
                                RowBlock {
                                    entry,
                                    state,
                                    process,
                                }
                            })
                            .collect();
                        let states: Vec<_> = blocks.iter().map(|b| b.state.clone()).collect();
                        let c_loc = linalg::vstack(&states, system.state_dim());
                        AgentLocalModel { blocks, c_loc }
                    })
                    .collect();
                LocalSlice { span, agents }
            })
            .collect();
        Ok(Self {
            tau_star: tau,
            slices,
        })
    }

    pub fn tau_star(&self) -> usize {
        self.tau_star
    }

    /// Model at time `t ≥ 1`.
    pub fn at(&self, t: usize) -> &LocalSlice {
        assert!(t >= 1, "time index is 1-based");
        &self.slices[t.min(self.tau_star) - 1]
    }

    /// Time-invariant model valid for `t ≥ τ*`.
    pub fn stationary(&self) -> &LocalSlice {
        &self.slices[self.tau_star - 1]
    }

    /// `rows(C^loc_i)` of the time-invariant model.
    pub fn c_loc(&self, i: usize) -> &DMatrix<f64> {
        &self.stationary().agents[i].c_loc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(source: usize, lag: usize) -> LocalEntry {
        LocalEntry { source, lag }
    }

    #[test]
    fn complete_unit_graph() {
        let g = CommGraph::complete(2, 1).unwrap();
        let geo = g.geodesics().unwrap();
        assert_eq!(geo.dist, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(geo.tau_star, 1);
    }

    #[test]
    fn chain_diameter() {
        assert_eq!(
            CommGraph::bidirectional_chain(4, 1)
                .unwrap()
                .geodesics()
                .unwrap()
                .tau_star,
            3
        );
    }

    #[test]
    fn complete_graph_delay_two() {
        let g = CommGraph::complete(4, 2).unwrap();
        assert_eq!(g.geodesics().unwrap().tau_star, 2);
        let info = InfoStructure::from_graph(&g).unwrap();
        for i in 0..4 {
            assert_eq!(info.local_entries(i), &[e(i, 1), e(i, 0)]);
        }
    }

    #[test]
    fn chain_local_sets() {
        let info =
            InfoStructure::from_graph(&CommGraph::bidirectional_chain(4, 1).unwrap()).unwrap();
        let mut first: Vec<_> = info.local_entries(0).to_vec();
        first.sort();
        assert_eq!(
            first,
            vec![e(0, 0), e(0, 1), e(0, 2), e(1, 1), e(1, 2), e(2, 2)]
        );
        // canonical order: lag-major, oldest first
        assert_eq!(
            info.local_entries(0),
            &[e(0, 2), e(1, 2), e(2, 2), e(0, 1), e(1, 1), e(0, 0)]
        );
        assert_eq!(
            info.local_entries(3),
            &[e(1, 2), e(2, 2), e(3, 2), e(2, 1), e(3, 1), e(3, 0)]
        );
    }

    #[test]
    fn single_node_graph_rejected() {
        let g = CommGraph::new(1, vec![]).unwrap();
        assert_eq!(g.geodesics().unwrap().tau_star, 0);
        assert!(InfoStructure::from_graph(&g).is_err());
        let single = InfoStructure::single_agent();
        assert_eq!(single.tau_star(), 1);
        assert_eq!(single.local_entries(0), &[e(0, 0)]);
    }

    #[test]
    fn disconnected_graph_names_pair() {
        let g = CommGraph::new(
            3,
            vec![
                Edge {
                    from: 0,
                    to: 1,
                    delay: 1,
                },
                Edge {
                    from: 1,
                    to: 0,
                    delay: 1,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            g.geodesics(),
            Err(Error::NotStronglyConnected { .. })
        ));
        let g = CommGraph::new(
            2,
            vec![Edge {
                from: 0,
                to: 1,
                delay: 1,
            }],
        )
        .unwrap();
        assert_eq!(
            g.geodesics(),
            Err(Error::NotStronglyConnected { from: 1, to: 0 })
        );
    }

    #[test]
    fn bad_edges_rejected() {
        assert!(CommGraph::new(
            2,
            vec![Edge {
                from: 0,
                to: 1,
                delay: 0
            }]
        )
        .is_err());
        assert!(CommGraph::new(
            2,
            vec![Edge {
                from: 0,
                to: 2,
                delay: 1
            }]
        )
        .is_err());
        assert!(CommGraph::new(
            2,
            vec![Edge {
                from: 1,
                to: 1,
                delay: 1
            }]
        )
        .is_err());
    }

    fn scalar_chain_system(n: usize) -> LinearSystem {
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.9
            } else if i == j + 1 {
                0.5
            } else {
                0.0
            }
        });
        let c = (0..n)
            .map(|i| DMatrix::from_fn(1, n, |_, j| if i == j { 1.0 + i as f64 } else { 0.0 }))
            .collect();
        LinearSystem::new(
            a,
            c,
            DMatrix::identity(n, n),
            vec![DMatrix::identity(1, 1) * 0.1; n],
            DMatrix::identity(n, n),
        )
        .unwrap()
    }

    #[test]
    fn delayed_sharing_local_model() {
        let sys = scalar_chain_system(4);
        let info = InfoStructure::from_graph(&CommGraph::complete(4, 2).unwrap()).unwrap();
        let lom = LocalObservationModel::new(&info, &sys).unwrap();
        for i in 0..4 {
            let ci = sys.c(i);
            let expected = linalg::vstack(&[ci.clone(), ci * sys.a()], 4);
            assert_eq!(lom.c_loc(i), &expected);
            let blocks = &lom.stationary().agents[i].blocks;
            assert!(blocks[0].process.is_empty());
            assert_eq!(blocks[1].process.len(), 1);
            assert_eq!(blocks[1].process[0].back, 1);
            assert_eq!(&blocks[1].process[0].coeff, ci);
        }
        // t = 1: only the current measurement, no propagation
        let first = lom.at(1);
        assert_eq!(first.span, 0);
        assert_eq!(first.agents[2].c_loc, sys.c(2).clone());
    }

    #[test]
    fn unit_diameter_has_no_propagation() {
        let sys = scalar_chain_system(3);
        let info = InfoStructure::from_graph(&CommGraph::complete(3, 1).unwrap()).unwrap();
        let lom = LocalObservationModel::new(&info, &sys).unwrap();
        for i in 0..3 {
            assert_eq!(lom.c_loc(i), sys.c(i));
            assert!(lom.stationary().agents[i].blocks[0].process.is_empty());
        }
    }

    #[test]
    fn chain_row_blocks_follow_power_rule() {
        let sys = scalar_chain_system(4);
        let info =
            InfoStructure::from_graph(&CommGraph::bidirectional_chain(4, 1).unwrap()).unwrap();
        let lom = LocalObservationModel::new(&info, &sys).unwrap();
        let agent = &lom.stationary().agents[0];
        let pw = linalg::powers(sys.a(), 3);
        for b in &agent.blocks {
            let cj = sys.c(b.entry.source);
            assert_eq!(b.state, cj * &pw[2 - b.entry.lag]);
            for term in &b.process {
                assert!(term.back > b.entry.lag && term.back <= 2);
                assert_eq!(term.coeff, cj * &pw[term.back - b.entry.lag - 1]);
            }
        }
        let block = agent.blocks.iter().find(|b| b.entry == e(2, 2)).unwrap();
        assert_eq!(&block.state, sys.c(2));
        assert_eq!(agent.dim(), 6);
    }

    #[test]
    fn agent_count_mismatch() {
        let sys = scalar_chain_system(3);
        let info = InfoStructure::from_graph(&CommGraph::complete(4, 1).unwrap()).unwrap();
        assert!(matches!(
            LocalObservationModel::new(&info, &sys),
            Err(Error::Dimension(_))
        ));
    }
}
