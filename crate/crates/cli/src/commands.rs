use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtmse::baselines::{
    mmse_strategy, monte_carlo, mtmse_strategy, ConsensusKf, ConsensusParams, McConfig, Strategy,
};
use mtmse::exec::Execution;
use mtmse::filter::{gain_schedule, steady_state};
use mtmse::model::validate;
use mtmse::scenarios::{self, ConsensusRun, Setup};

use crate::error::{CliError, CliResult};
use crate::gains::{GainFile, Header, Mode};
use crate::output::{fmt_f64, CsvOut};
use crate::scenario::{Scenario, STRATEGY_NAMES};

#[derive(Debug, Parser)]
#[command(
    name = "mtmse",
    version,
    about = "Team-optimal estimation and filtering over delayed communication graphs"
)]
pub struct Cli {
    /// Evaluate independent work items on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario against the model assumptions (exit 0 passed, 1 failed, 2 unreadable).
    Validate { scenario: PathBuf },
    /// Compute gains and analytic costs.
    Solve(SolveArgs),
    /// Monte Carlo costs of the listed strategies.
    Simulate(SimulateArgs),
    /// Relative-improvement sweeps for the reference experiments.
    Reproduce(ReproduceArgs),
    /// Write a reference scenario file.
    Example(ExampleArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub mode: SolveMode,
    /// Directory receiving gains.json and costs.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolveMode {
    Static,
    Finite,
    Steady,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Comma-separated subset of mtmse, mmse, ckf.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    TwoAgent,
    Uav,
    Platoon,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub name: Experiment,
    /// Coupling weights; for uav these are λ/n².
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Noise levels for two-agent.
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    /// Formation size for uav.
    #[arg(long, default_value_t = 4)]
    pub agents: usize,
    /// Monte Carlo paths for the consensus filter column; 0 leaves it empty.
    #[arg(long, default_value_t = 0)]
    pub ckf_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    #[arg(long, value_enum)]
    pub name: ExampleName,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 4)]
    pub agents: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExampleName {
    TwoAgent,
    Uav,
    Platoon,
    Scalar,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario, stdout),
        Command::Solve(args) => cmd_solve(&args, exec, stdout).map(|_| 0),
        Command::Simulate(args) => cmd_simulate(&args, exec, stdout).map(|_| 0),
        Command::Reproduce(args) => cmd_reproduce(&args, exec, stdout).map(|_| 0),
        Command::Example(args) => cmd_example(&args, stdout).map(|_| 0),
    }
}

/// Exit code 0 when every assumption holds and the graph is strongly connected, 1 otherwise.
pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let scenario = Scenario::load(path)?;
    let setup = scenario.to_setup()?;
    let report = validate(&setup.system, &setup.cost)?;
    writeln!(out, "scenario: {}", scenario.name)?;
    writeln!(out, "{report}")?;
    let graph_ok = match setup.info() {
        Ok(info) => {
            writeln!(out, "graph: ok, tau* = {}", info.tau_star())?;
            true
        }
        Err(e) => {
            writeln!(out, "graph: FAIL {e}")?;
            false
        }
    };
    Ok(if report.passed && graph_ok { 0 } else { 1 })
}

/// Load, then refuse scenarios that fail validation.
fn load_valid(path: &Path) -> CliResult<(Scenario, Setup)> {
    let scenario = Scenario::load(path)?;
    let setup = scenario.to_setup()?;
    let report = validate(&setup.system, &setup.cost)?;
    if !report.passed {
        let failed: Vec<String> = report
            .failed()
            .map(|c| format!("{} ({})", c.assumption, c.detail))
            .collect();
        return Err(CliError::Invalid(format!(
            "scenario fails validation: {}",
            failed.join(", ")
        )));
    }
    setup.info().map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok((scenario, setup))
}

pub fn cmd_solve(args: &SolveArgs, exec: Execution, out: &mut dyn Write) -> CliResult<()> {
    let (scenario, setup) = load_valid(&args.scenario)?;
    let model = setup.filter_model()?;
    let cost = &setup.cost;
    let header = Header {
        scenario: &scenario.name,
        agents: model.agents(),
        state_dim: setup.system.state_dim(),
        tau_star: model.tau_star(),
        estimate_dims: (0..cost.agents()).map(|i| cost.estimate_dim(i)).collect(),
    };
    fs::create_dir_all(&args.out_dir)?;
    let gains_path = args.out_dir.join("gains.json");
    let costs_path = args.out_dir.join("costs.csv");
    let mut csv = CsvOut::file(&costs_path)?;
    let file = match args.mode {
        SolveMode::Static | SolveMode::Finite => {
            let (mode, horizon) = match args.mode {
                SolveMode::Static => (Mode::Static, 1),
                _ => (Mode::Finite, setup.horizon),
            };
            let sched = gain_schedule(&model, horizon, exec)?;
            csv.header(&[
                "t",
                "J_step",
                "J_cumulative",
                "J_mmse_step",
                "J_mmse_cumulative",
            ])?;
            let (mut cum, mut cum_mmse) = (0.0, 0.0);
            for st in &sched.steps {
                cum += st.j_step;
                cum_mmse += st.j_mmse_step;
                csv.row(&[
                    st.t.to_string(),
                    fmt_f64(st.j_step),
                    fmt_f64(cum),
                    fmt_f64(st.j_mmse_step),
                    fmt_f64(cum_mmse),
                ])?;
            }
            writeln!(
                out,
                "J* = {}  J_mmse = {}  over {horizon} step(s)",
                fmt_f64(cum),
                fmt_f64(cum_mmse)
            )?;
            GainFile::from_schedule(mode, header, &sched)
        }
        SolveMode::Steady => {
            let ss = steady_state(&model)?;
            csv.header(&[
                "J_star",
                "J_mmse",
                "spectral_radius",
                "closed_loop_radius",
                "iterations",
                "residual",
            ])?;
            csv.row(&[
                fmt_f64(ss.j_star),
                fmt_f64(ss.j_mmse),
                fmt_f64(ss.spectral_radius),
                fmt_f64(ss.closed_loop_radius),
                ss.iterations.to_string(),
                fmt_f64(ss.residual),
            ])?;
            writeln!(
                out,
                "J* = {} per step  J_mmse = {} per step",
                fmt_f64(ss.j_star),
                fmt_f64(ss.j_mmse)
            )?;
            GainFile::from_steady(header, &ss)
        }
    };
    csv.finish()?;
    fs::write(&gains_path, file.to_json())?;
    writeln!(
        out,
        "wrote {} and {}",
        gains_path.display(),
        costs_path.display()
    )?;
    Ok(())
}

fn consensus_params(scenario: &Scenario) -> ConsensusParams {
    let e = &scenario.experiment;
    let d = ConsensusParams::default();
    ConsensusParams {
        iterations: e.consensus_iterations.unwrap_or(d.iterations),
        step_size: e.consensus_step.or(d.step_size),
        instantaneous: e.consensus_instantaneous,
    }
}

pub fn cmd_simulate(args: &SimulateArgs, exec: Execution, out: &mut dyn Write) -> CliResult<()> {
    let scenario = Scenario::load(&args.scenario)?;
    let names = args
        .strategies
        .clone()
        .unwrap_or_else(|| scenario.experiment.strategies.clone());
    if names.is_empty() {
        return Err(CliError::Input("no strategies requested".into()));
    }
    if let Some(bad) = names.iter().find(|n| !STRATEGY_NAMES.contains(&n.as_str())) {
        return Err(CliError::Input(format!(
            "unknown strategy `{bad}` (expected one of {})",
            STRATEGY_NAMES.join(", ")
        )));
    }
    let (scenario, setup) = load_valid(&args.scenario)?;
    let paths = args.paths.unwrap_or(scenario.experiment.paths);
    let seed = args.seed.unwrap_or(scenario.experiment.seed);
    let model = setup.filter_model()?;
    let sched = gain_schedule(&model, setup.horizon, exec)?;
    let team = mtmse_strategy(&model, &sched);
    let mmse = mmse_strategy(&model, &sched);
    let ckf = if names.iter().any(|n| n == "ckf") {
        Some(ConsensusKf::new(
            &setup.system,
            &setup.cost,
            &setup.comm_graph()?,
            consensus_params(&scenario),
        )?)
    } else {
        None
    };
    let strategies: Vec<&dyn Strategy> = names
        .iter()
        .map(|n| match n.as_str() {
            "mtmse" => &team as &dyn Strategy,
            "mmse" => &mmse,
            _ => ckf.as_ref().expect("built above"),
        })
        .collect();
    let cfg = McConfig {
        horizon: setup.horizon,
        paths,
        seed,
        exec,
    };
    let res = monte_carlo(&setup.system, &setup.cost, &strategies, cfg)?;
    let mut csv = CsvOut::new(args.output.as_deref(), out)?;
    csv.header(&[
        "name",
        "empirical_mean",
        "std_error",
        "analytic",
        "paths",
        "seed",
    ])?;
    for (name, stats) in names.iter().zip(&res.strategies) {
        let analytic = match name.as_str() {
            "mtmse" => fmt_f64(sched.optimal_cost()),
            "mmse" => fmt_f64(sched.mmse_cost()),
            _ => String::new(),
        };
        csv.row(&[
            name.clone(),
            fmt_f64(stats.mean_total),
            fmt_f64(stats.std_error),
            analytic,
            paths.to_string(),
            seed.to_string(),
        ])?;
    }
    csv.finish()
}

pub fn cmd_reproduce(args: &ReproduceArgs, exec: Execution, out: &mut dyn Write) -> CliResult<()> {
    let mut csv = CsvOut::new(args.output.as_deref(), out)?;
    if args.name == Experiment::TwoAgent {
        let lambdas = args
            .lambda_grid
            .clone()
            .unwrap_or_else(|| vec![0.0, 1.0, 4.0, 100.0, 1e6]);
        let sigmas = args
            .sigma_grid
            .clone()
            .unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0]);
        csv.header(&["sigma", "lambda", "j_star", "j_mmse", "delta"])?;
        for &sigma in &sigmas {
            for &lambda in &lambdas {
                let imp = scenarios::improvement(
                    &scenarios::two_agent(sigma, lambda)?,
                    lambda,
                    None,
                    exec,
                )?;
                csv.row(&[
                    fmt_f64(sigma),
                    fmt_f64(lambda),
                    fmt_f64(imp.j_star),
                    fmt_f64(imp.j_mmse),
                    fmt_f64(imp.delta_mmse),
                ])?;
            }
        }
        return csv.finish();
    }
    let ckf = (args.ckf_paths > 0).then_some(ConsensusRun {
        params: ConsensusParams::default(),
        paths: args.ckf_paths,
        seed: args.seed,
    });
    let rows = match args.name {
        Experiment::Uav => {
            let grid = args
                .lambda_grid
                .clone()
                .unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
            scenarios::improvement_sweep(|c| scenarios::uav(args.agents, c), &grid, ckf, exec)?
        }
        _ => {
            let grid = args
                .lambda_grid
                .clone()
                .unwrap_or_else(|| vec![0.1, 1.0, 10.0, 100.0]);
            scenarios::improvement_sweep(scenarios::platoon, &grid, ckf, exec)?
        }
    };
    csv.header(&[
        "lambda",
        "j_star",
        "j_mmse",
        "delta_mmse",
        "j_ckf",
        "j_ckf_se",
        "delta_ckf",
    ])?;
    for r in rows {
        let (j_ckf, se) = r.j_ckf.map_or((String::new(), String::new()), |(j, se)| {
            (fmt_f64(j), fmt_f64(se))
        });
        csv.row(&[
            fmt_f64(r.lambda),
            fmt_f64(r.j_star),
            fmt_f64(r.j_mmse),
            fmt_f64(r.delta_mmse),
            j_ckf,
            se,
            r.delta_ckf.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    csv.finish()
}

pub fn cmd_example(args: &ExampleArgs, out: &mut dyn Write) -> CliResult<()> {
    let (name, setup) = match args.name {
        ExampleName::TwoAgent => ("two-agent", scenarios::two_agent(args.sigma, args.lambda)?),
        ExampleName::Uav => ("uav", scenarios::uav(args.agents, args.lambda)?),
        ExampleName::Platoon => ("platoon", scenarios::platoon(args.lambda)?),
        ExampleName::Scalar => (
            "scalar",
            scenarios::scalar_benchmark(1.0, 1.0, 1.0, 1.0, 1.0, 100)?,
        ),
    };
    let json = Scenario::from_setup(name, &setup).to_json();
    match &args.output {
        Some(p) => fs::write(p, json + "\n")?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}
