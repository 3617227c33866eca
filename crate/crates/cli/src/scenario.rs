//! Scenario documents: a system, a cost, a graph, a horizon and experiment options in one JSON file.

use std::path::Path;

use mtmse::graph::{CommGraph, Edge};
use mtmse::model::{
    build_average_coupling_cost, build_chain_coupling_cost, CostModel, LinearSystem,
};
use mtmse::scenarios::Setup;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::matrix::{from_rows, list_from_rows, list_to_rows, to_rows, Rows};

pub const SCENARIO_VERSION: u32 = 1;

pub const STRATEGY_NAMES: [&str; 3] = ["mtmse", "mmse", "ckf"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub system: SystemSpec,
    pub cost: CostSpec,
    /// `null` only for a single agent.
    pub graph: Option<GraphSpec>,
    pub horizon: usize,
    #[serde(default)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Rows,
    pub c: Vec<Rows>,
    pub q: Rows,
    pub r: Vec<Rows>,
    pub sigma_x: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    /// `S_ij = (δ_ij + λ/n²) I`.
    Average {
        lambda: f64,
        estimate_dim: usize,
        selectors: Option<Vec<Rows>>,
    },
    /// Own error plus `λ` times the squared differences of neighbours on a line.
    Chain {
        lambda: f64,
        estimate_dim: usize,
        selectors: Option<Vec<Rows>>,
    },
    Explicit {
        s: Vec<Vec<Rows>>,
        l: Vec<Rows>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub paths: usize,
    pub seed: u64,
    pub strategies: Vec<String>,
    pub lambda_grid: Vec<f64>,
    pub consensus_iterations: Option<usize>,
    pub consensus_step: Option<f64>,
    pub consensus_instantaneous: bool,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            paths: 1000,
            seed: 0,
            strategies: STRATEGY_NAMES.iter().map(|s| s.to_string()).collect(),
            lambda_grid: vec![],
            consensus_iterations: None,
            consensus_step: None,
            consensus_instantaneous: false,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::Input(format!(
                "scenario parse error at line {} column {}, field `{}`: {}",
                inner.line(),
                inner.column(),
                e.path(),
                inner
            ))
        })?;
        if scenario.version != SCENARIO_VERSION {
            return Err(CliError::Input(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                scenario.version
            )));
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Describe `setup` with every matrix spelled out.
    pub fn from_setup(name: &str, setup: &Setup) -> Self {
        let sys = &setup.system;
        let cost = &setup.cost;
        Self {
            version: SCENARIO_VERSION,
            name: name.to_string(),
            system: SystemSpec {
                a: to_rows(sys.a()),
                c: list_to_rows(sys.cs()),
                q: to_rows(sys.q()),
                r: list_to_rows(sys.rs()),
                sigma_x: to_rows(sys.sigma_x()),
            },
            cost: CostSpec::Explicit {
                s: cost
                    .s_blocks()
                    .iter()
                    .map(|row| list_to_rows(row))
                    .collect(),
                l: list_to_rows(cost.l_blocks()),
            },
            graph: setup.graph.as_ref().map(|g| GraphSpec {
                nodes: g.nodes(),
                edges: g
                    .edges()
                    .iter()
                    .map(|e| EdgeSpec {
                        from: e.from,
                        to: e.to,
                        delay: e.delay,
                    })
                    .collect(),
            }),
            horizon: setup.horizon,
            experiment: Experiment::default(),
        }
    }

    /// Build the in-memory model. Shape errors are input errors.
    pub fn to_setup(&self) -> CliResult<Setup> {
        let input = |e: String| CliError::Input(e);
        let sys = &self.system;
        let system = LinearSystem::new(
            from_rows(&sys.a, "system.a").map_err(input)?,
            list_from_rows(&sys.c, "system.c").map_err(input)?,
            from_rows(&sys.q, "system.q").map_err(input)?,
            list_from_rows(&sys.r, "system.r").map_err(input)?,
            from_rows(&sys.sigma_x, "system.sigma_x").map_err(input)?,
        )
        .map_err(|e| CliError::Input(format!("system: {e}")))?;
        let n = system.agents();
        let cost = self
            .cost_model(n)
            .map_err(|e| CliError::Input(format!("cost: {e}")))?;
        let graph = match &self.graph {
            Some(g) => {
                if g.nodes != n {
                    return Err(CliError::Input(format!(
                        "graph: {} nodes but the system has {n} agents",
                        g.nodes
                    )));
                }
                let edges = g
                    .edges
                    .iter()
                    .map(|e| Edge {
                        from: e.from,
                        to: e.to,
                        delay: e.delay,
                    })
                    .collect();
                Some(
                    CommGraph::new(g.nodes, edges)
                        .map_err(|e| CliError::Input(format!("graph: {e}")))?,
                )
            }
            None => None,
        };
        if self.horizon == 0 {
            return Err(CliError::Input("horizon must be at least 1".into()));
        }
        Ok(Setup {
            system,
            cost,
            graph,
            horizon: self.horizon,
        })
    }

    fn cost_model(&self, n: usize) -> Result<CostModel, String> {
        let built = |cost: mtmse::error::Result<CostModel>,
                     selectors: &Option<Vec<Rows>>|
         -> Result<CostModel, String> {
            let cost = cost.map_err(|e| e.to_string())?;
            match selectors {
                Some(l) => cost
                    .with_selector(list_from_rows(l, "cost.selectors")?)
                    .map_err(|e| e.to_string()),
                None => Ok(cost),
            }
        };
        match &self.cost {
            CostSpec::Average {
                lambda,
                estimate_dim,
                selectors,
            } => built(
                build_average_coupling_cost(n, *estimate_dim, *lambda),
                selectors,
            ),
            CostSpec::Chain {
                lambda,
                estimate_dim,
                selectors,
            } => built(
                build_chain_coupling_cost(n, *estimate_dim, *lambda),
                selectors,
            ),
            CostSpec::Explicit { s, l } => {
                let s = s
                    .iter()
                    .enumerate()
                    .map(|(i, row)| list_from_rows(row, &format!("cost.s[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                CostModel::new(s, list_from_rows(l, "cost.l")?).map_err(|e| e.to_string())
            }
        }
    }
}
