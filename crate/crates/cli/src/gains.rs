//! Versioned gain files with a SHA-256 checksum over the payload.

use std::path::Path;

use mtmse::filter::{GainSchedule, OnlineGains, SteadyState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::matrix::{list_from_rows, list_to_rows, to_rows, Rows};

pub const GAIN_FORMAT: &str = "mtmse-gains";
pub const GAIN_VERSION: u32 = 1;

pub const ORDERING: &str = "matrices are row-major nested arrays; times are 1-based; predictor_gains[s-1] is the \
centralized predictor gain K(s) over the stacked measurement y = (y_1, ..., y_n); team[t-1][i] and mmse[t-1][i] \
multiply agent i's local innovation, whose entries are ordered by descending lag (oldest first), then ascending \
source agent, each source contributing the rows C_j, C_j A, ... of its local observation model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Finite,
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainPayload {
    pub format: String,
    pub version: u32,
    pub mode: Mode,
    pub scenario: String,
    pub agents: usize,
    pub state_dim: usize,
    pub tau_star: usize,
    pub horizon: usize,
    pub estimate_dims: Vec<usize>,
    pub ordering: String,
    pub predictor_gains: Vec<Rows>,
    pub team: Vec<Vec<Rows>>,
    pub mmse: Vec<Vec<Rows>>,
    pub steady: Option<SteadyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyRecord {
    pub p_bar: Rows,
    pub k_bar: Rows,
    pub f_bar: Vec<Rows>,
    pub j_star: f64,
    pub j_mmse: f64,
    pub spectral_radius: f64,
    pub closed_loop_radius: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFile {
    pub sha256: String,
    pub payload: GainPayload,
}

fn digest(payload: &GainPayload) -> String {
    let bytes = serde_json::to_vec(payload).expect("payload serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub struct Header<'a> {
    pub scenario: &'a str,
    pub agents: usize,
    pub state_dim: usize,
    pub tau_star: usize,
    pub estimate_dims: Vec<usize>,
}

impl GainFile {
    fn seal(payload: GainPayload) -> Self {
        Self {
            sha256: digest(&payload),
            payload,
        }
    }

    fn empty(mode: Mode, header: Header<'_>, horizon: usize) -> GainPayload {
        GainPayload {
            format: GAIN_FORMAT.into(),
            version: GAIN_VERSION,
            mode,
            scenario: header.scenario.into(),
            agents: header.agents,
            state_dim: header.state_dim,
            tau_star: header.tau_star,
            horizon,
            estimate_dims: header.estimate_dims,
            ordering: ORDERING.into(),
            predictor_gains: vec![],
            team: vec![],
            mmse: vec![],
            steady: None,
        }
    }

    pub fn from_schedule(mode: Mode, header: Header<'_>, sched: &GainSchedule) -> Self {
        let mut p = Self::empty(mode, header, sched.horizon);
        p.predictor_gains = list_to_rows(&sched.kalman_gains);
        p.team = sched.steps.iter().map(|s| list_to_rows(&s.f)).collect();
        p.mmse = sched.steps.iter().map(|s| list_to_rows(&s.mmse)).collect();
        Self::seal(p)
    }

    pub fn from_steady(header: Header<'_>, ss: &SteadyState) -> Self {
        let mut p = Self::empty(Mode::Steady, header, 0);
        p.steady = Some(SteadyRecord {
            p_bar: to_rows(&ss.p_bar),
            k_bar: to_rows(&ss.k_bar),
            f_bar: list_to_rows(&ss.f_bar),
            j_star: ss.j_star,
            j_mmse: ss.j_mmse,
            spectral_radius: ss.spectral_radius,
            closed_loop_radius: ss.closed_loop_radius,
            iterations: ss.iterations,
        });
        Self::seal(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gain file serializes")
    }

    /// Parse and verify format, version and checksum.
    pub fn parse(text: &str) -> CliResult<Self> {
        let file: GainFile =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("gain file: {e}")))?;
        let p = &file.payload;
        if p.format != GAIN_FORMAT || p.version != GAIN_VERSION {
            return Err(CliError::Input(format!(
                "gain file: unsupported format {} v{}",
                p.format, p.version
            )));
        }
        let expected = digest(p);
        if expected != file.sha256 {
            return Err(CliError::Input(format!(
                "gain file: checksum mismatch (stored {}, computed {expected})",
                file.sha256
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn online(&self, agent: &[Vec<Rows>], which: &str) -> CliResult<OnlineGains> {
        let input = |e: String| CliError::Input(format!("gain file: {e}"));
        let kalman =
            list_from_rows(&self.payload.predictor_gains, "predictor_gains").map_err(input)?;
        let agent = agent
            .iter()
            .enumerate()
            .map(|(t, g)| list_from_rows(g, &format!("{which}[{t}]")).map_err(input))
            .collect::<CliResult<_>>()?;
        Ok(OnlineGains { kalman, agent })
    }

    pub fn team_gains(&self) -> CliResult<OnlineGains> {
        self.online(&self.payload.team, "team")
    }

    pub fn mmse_gains(&self) -> CliResult<OnlineGains> {
        self.online(&self.payload.mmse, "mmse")
    }
}
