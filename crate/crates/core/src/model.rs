//! System, cost, and assumption checks shared by every solver.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Strict positive-definiteness threshold on the minimum eigenvalue.
pub const TOL_PD: f64 = 1e-10;
/// Slack allowed below zero for positive semi-definite matrices.
pub const TOL_PSD: f64 = 1e-9;
/// Relative singular-value threshold for PBH rank decisions.
pub const TOL_RANK: f64 = 1e-8;

/// `x(t+1) = A x(t) + w(t)`, `y_i(t) = C_i x(t) + v_i(t)` with
/// `w ~ N(0, Q)`, `v_i ~ N(0, R_i)` and `x(1) ~ N(0, Σ_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    c: Vec<DMatrix<f64>>,
    q: DMatrix<f64>,
    r: Vec<DMatrix<f64>>,
    sigma_x: DMatrix<f64>,
    c_stacked: DMatrix<f64>,
    r_blocks: DMatrix<f64>,
    y_offsets: Vec<usize>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        c: Vec<DMatrix<f64>>,
        q: DMatrix<f64>,
        r: Vec<DMatrix<f64>>,
        sigma_x: DMatrix<f64>,
    ) -> Result<Self> {
        let dx = a.nrows();
        if dx == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {:?}",
                a.shape()
            )));
        }
        if c.is_empty() {
            return Err(Error::Dimension("at least one agent is required".into()));
        }
        if c.len() != r.len() {
            return Err(Error::Dimension(format!(
                "{} observation matrices but {} noise covariances",
                c.len(),
                r.len()
            )));
        }
        for (i, (ci, ri)) in c.iter().zip(&r).enumerate() {
            if ci.ncols() != dx || ci.nrows() == 0 {
                return Err(Error::Dimension(format!(
                    "C_{i} must be d_y x {dx} with d_y >= 1, got {:?}",
                    ci.shape()
                )));
            }
            if ri.shape() != (ci.nrows(), ci.nrows()) {
                return Err(Error::Dimension(format!(
                    "R_{i} must be {0}x{0}, got {1:?}",
                    ci.nrows(),
                    ri.shape()
                )));
            }
        }
        if q.shape() != (dx, dx) {
            return Err(Error::Dimension(format!(
                "Q must be {dx}x{dx}, got {:?}",
                q.shape()
            )));
        }
        if sigma_x.shape() != (dx, dx) {
            return Err(Error::Dimension(format!(
                "Sigma_x must be {dx}x{dx}, got {:?}",
                sigma_x.shape()
            )));
        }
        let all = std::iter::once(&a)
            .chain(&c)
            .chain(std::iter::once(&q))
            .chain(&r)
            .chain(std::iter::once(&sigma_x));
        if all.flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "system matrices must be finite".into(),
            ));
        }
        let c_stacked = linalg::vstack(&c, dx);
        let r_blocks = linalg::block_diag(&r);
        let mut y_offsets = Vec::with_capacity(c.len() + 1);
        let mut off = 0;
        for ci in &c {
            y_offsets.push(off);
            off += ci.nrows();
        }
        y_offsets.push(off);
        Ok(Self {
            a,
            c,
            q,
            r,
            sigma_x,
            c_stacked,
            r_blocks,
            y_offsets,
        })
    }

    pub fn agents(&self) -> usize {
        self.c.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self, i: usize) -> &DMatrix<f64> {
        &self.c[i]
    }

    pub fn cs(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self, i: usize) -> &DMatrix<f64> {
        &self.r[i]
    }

    pub fn rs(&self) -> &[DMatrix<f64>] {
        &self.r
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    /// `C = rows(C_1, …, C_n)`.
    pub fn c_stacked(&self) -> &DMatrix<f64> {
        &self.c_stacked
    }

    /// `R = diag(R_1, …, R_n)`.
    pub fn r_stacked(&self) -> &DMatrix<f64> {
        &self.r_blocks
    }

    pub fn measurement_dim(&self, i: usize) -> usize {
        self.c[i].nrows()
    }

    pub fn total_measurement_dim(&self) -> usize {
        self.y_offsets[self.agents()]
    }

    /// Offset of agent `i`'s block inside the stacked measurement `y(t)`.
    pub fn measurement_offset(&self, i: usize) -> usize {
        self.y_offsets[i]
    }

    /// Copy of the system with a different initial covariance.
    pub fn with_sigma_x(&self, sigma_x: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.c.clone(),
            self.q.clone(),
            self.r.clone(),
            sigma_x,
        )
    }
}

/// Quadratic team cost `(Lx − ẑ)ᵀ S (Lx − ẑ)` given blockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    s: Vec<Vec<DMatrix<f64>>>,
    l: Vec<DMatrix<f64>>,
}

impl CostModel {
    /// `s[i][j]` is `S_ij` (`d_z^i × d_z^j`) and `l[i]` is `L_i` (`d_z^i × d_x`).
    pub fn new(s: Vec<Vec<DMatrix<f64>>>, l: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = l.len();
        if n == 0 {
            return Err(Error::Dimension("cost needs at least one agent".into()));
        }
        let dx = l[0].ncols();
        if l.iter().any(|li| li.ncols() != dx || li.nrows() == 0) {
            return Err(Error::Dimension(
                "all L_i must have the same column count and at least one row".into(),
            ));
        }
        if s.len() != n || s.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!(
                "S must be an {n}x{n} grid of blocks"
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if s[i][j].shape() != (l[i].nrows(), l[j].nrows()) {
                    return Err(Error::Dimension(format!(
                        "S_{i}{j} must be {}x{}, got {:?}",
                        l[i].nrows(),
                        l[j].nrows(),
                        s[i][j].shape()
                    )));
                }
            }
        }
        if s.iter()
            .flatten()
            .chain(&l)
            .flat_map(|m| m.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "cost matrices must be finite".into(),
            ));
        }
        Ok(Self { s, l })
    }

    /// Replace the selector blocks `L_i`, keeping `S`.
    pub fn with_selector(&self, l: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(self.s.clone(), l)
    }

    pub fn agents(&self) -> usize {
        self.l.len()
    }

    pub fn state_dim(&self) -> usize {
        self.l[0].ncols()
    }

    pub fn estimate_dim(&self, i: usize) -> usize {
        self.l[i].nrows()
    }

    pub fn s(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.s[i][j]
    }

    pub fn s_blocks(&self) -> &[Vec<DMatrix<f64>>] {
        &self.s
    }

    pub fn l(&self, i: usize) -> &DMatrix<f64> {
        &self.l[i]
    }

    pub fn l_blocks(&self) -> &[DMatrix<f64>] {
        &self.l
    }

    pub fn s_assembled(&self) -> DMatrix<f64> {
        linalg::assemble(&self.s)
    }

    pub fn l_stacked(&self) -> DMatrix<f64> {
        linalg::vstack(&self.l, self.state_dim())
    }

    /// `S_{i•} L = Σ_j S_ij L_j`.
    pub fn s_row_l(&self, i: usize) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.estimate_dim(i), self.state_dim());
        for j in 0..self.agents() {
            if !self.is_zero_block(i, j) {
                acc += &self.s[i][j] * &self.l[j];
            }
        }
        acc
    }

    /// `Lᵀ S L`.
    pub fn lsl(&self) -> DMatrix<f64> {
        let l = self.l_stacked();
        l.transpose() * self.s_assembled() * l
    }

    pub fn is_zero_block(&self, i: usize, j: usize) -> bool {
        self.s[i][j].iter().all(|&v| v == 0.0)
    }

    pub fn is_block_diagonal(&self) -> bool {
        (0..self.agents()).all(|i| (0..self.agents()).all(|j| i == j || self.is_zero_block(i, j)))
    }

    /// Team cost `(Lx − ẑ)ᵀ S (Lx − ẑ)` for stacked per-agent estimates.
    pub fn evaluate(&self, x: &nalgebra::DVector<f64>, z: &[nalgebra::DVector<f64>]) -> f64 {
        let err: Vec<_> = (0..self.agents()).map(|i| &self.l[i] * x - &z[i]).collect();
        let mut total = 0.0;
        for i in 0..self.agents() {
            for j in 0..self.agents() {
                if !self.is_zero_block(i, j) {
                    total += err[i].dot(&(&self.s[i][j] * &err[j]));
                }
            }
        }
        total
    }
}

/// `S_ij = (δ_ij + λ/n²) I_d`, `L = I`: own-state error plus error of the average.
pub fn build_average_coupling_cost(n: usize, d: usize, lambda: f64) -> Result<CostModel> {
    check_builder_args(n, d, lambda)?;
    let coupling = lambda / (n * n) as f64;
    let s = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| DMatrix::identity(d, d) * (if i == j { 1.0 } else { 0.0 } + coupling))
                .collect()
        })
        .collect();
    CostModel::new(s, identity_selector(n, d))
}

/// Tridiagonal coupling for agents on a line: own-state error plus errors of adjacent differences.
pub fn build_chain_coupling_cost(n: usize, d: usize, lambda: f64) -> Result<CostModel> {
    check_builder_args(n, d, lambda)?;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "chain coupling needs at least two agents".into(),
        ));
    }
    let s = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let w = if i == j {
                        if i == 0 || i == n - 1 {
                            1.0 + lambda
                        } else {
                            1.0 + 2.0 * lambda
                        }
                    } else if i.abs_diff(j) == 1 {
                        -lambda
                    } else {
                        0.0
                    };
                    DMatrix::identity(d, d) * w
                })
                .collect()
        })
        .collect();
    CostModel::new(s, identity_selector(n, d))
}

fn check_builder_args(n: usize, d: usize, lambda: f64) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "agent count and per-agent dimension must be positive".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

fn identity_selector(n: usize, d: usize) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|i| {
            let mut li = DMatrix::zeros(d, n * d);
            li.view_mut((0, i * d), (d, d)).fill_with_identity();
            li
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Cost matrix S positive definite.
    A1,
    /// R_i positive definite, Q and Σ_x positive semi-definite.
    A2,
    /// Independent primitive random variables.
    A3,
    /// (A, √Q) stabilizable.
    A4,
    /// (A, C) detectable.
    A5,
}

impl Assumption {
    pub fn describe(self) -> &'static str {
        match self {
            Assumption::A1 => "cost matrix S is positive definite",
            Assumption::A2 => "R_i positive definite; Q and Sigma_x positive semi-definite",
            Assumption::A3 => "primitive random variables are independent",
            Assumption::A4 => "(A, sqrt(Q)) is stabilizable",
            Assumption::A5 => "(A, C) is detectable",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// Diagnostic scalar: a minimum eigenvalue for A1/A2, a PBH singular-value margin for A4/A5.
    pub metric: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn check(&self, a: Assumption) -> &AssumptionCheck {
        self.checks
            .iter()
            .find(|c| c.assumption == a)
            .expect("all assumptions are checked")
    }

    pub fn failed(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<4} metric={:<12.6e} {} ({})",
                c.assumption,
                if c.passed { "ok" } else { "FAIL" },
                c.metric,
                c.assumption.describe(),
                c.detail
            )?;
        }
        write!(
            f,
            "overall: {}",
            if self.passed { "passed" } else { "failed" }
        )
    }
}

/// Check (A1)–(A5). Inconsistent dimensions between system and cost are an error, not a failed report.
pub fn validate(system: &LinearSystem, cost: &CostModel) -> Result<ValidationReport> {
    if system.agents() != cost.agents() {
        return Err(Error::Dimension(format!(
            "system has {} agents but cost has {}",
            system.agents(),
            cost.agents()
        )));
    }
    if system.state_dim() != cost.state_dim() {
        return Err(Error::Dimension(format!(
            "system state dimension {} but L has {} columns",
            system.state_dim(),
            cost.state_dim()
        )));
    }
    let checks = vec![
        check_cost(cost),
        check_noise(system),
        AssumptionCheck {
            assumption: Assumption::A3,
            passed: true,
            metric: 0.0,
            detail: "noise sources are drawn independently by construction".into(),
        },
        check_stabilizable(system),
        check_detectable(system),
    ];
    Ok(ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn check_cost(cost: &CostModel) -> AssumptionCheck {
    let s = cost.s_assembled();
    let asym = linalg::asymmetry(&s);
    let scale = s.amax().max(1.0);
    let min = linalg::min_eigenvalue(&s);
    let symmetric = asym <= TOL_PSD * scale;
    AssumptionCheck {
        assumption: Assumption::A1,
        passed: symmetric && min > TOL_PD,
        metric: min,
        detail: if symmetric {
            format!("min eigenvalue of S = {min:.6e}")
        } else {
            format!("S not symmetric (deviation {asym:.3e})")
        },
    }
}

fn check_noise(system: &LinearSystem) -> AssumptionCheck {
    let mut worst = f64::INFINITY;
    let mut problems = Vec::new();
    for (i, r) in system.rs().iter().enumerate() {
        let min = linalg::min_eigenvalue(r);
        worst = worst.min(min);
        if min <= TOL_PD || linalg::asymmetry(r) > TOL_PSD * r.amax().max(1.0) {
            problems.push(format!(
                "R_{i} not positive definite (min eigenvalue {min:.3e})"
            ));
        }
    }
    for (name, m) in [("Q", system.q()), ("Sigma_x", system.sigma_x())] {
        let min = linalg::min_eigenvalue(m);
        worst = worst.min(min);
        if min < -TOL_PSD || linalg::asymmetry(m) > TOL_PSD * m.amax().max(1.0) {
            problems.push(format!(
                "{name} not positive semi-definite (min eigenvalue {min:.3e})"
            ));
        }
    }
    AssumptionCheck {
        assumption: Assumption::A2,
        passed: problems.is_empty(),
        metric: worst,
        detail: if problems.is_empty() {
            "noise covariances admissible".into()
        } else {
            problems.join("; ")
        },
    }
}

/// Eigenvalues of `A` on or outside the unit circle.
fn unstable_modes(a: &DMatrix<f64>) -> Vec<Complex64> {
    linalg::eigenvalues(a)
        .into_iter()
        .filter(|z| z.norm() >= 1.0 - 1e-12)
        .collect()
}

fn pbh(system: &LinearSystem, assumption: Assumption) -> AssumptionCheck {
    let a = system.a();
    let dx = system.state_dim();
    let modes = unstable_modes(a);
    let mut margin = f64::INFINITY;
    let mut failing = Vec::new();
    let other = match assumption {
        Assumption::A4 => linalg::psd_sqrt(system.q()),
        _ => system.c_stacked().clone(),
    };
    for lambda in &modes {
        let shifted = linalg::to_complex(a) - DMatrix::<Complex64>::identity(dx, dx) * *lambda;
        let other = linalg::to_complex(&other);
        let pencil = if assumption == Assumption::A4 {
            let mut m = DMatrix::zeros(dx, dx + other.ncols());
            m.view_mut((0, 0), (dx, dx)).copy_from(&shifted);
            m.view_mut((0, dx), (dx, other.ncols())).copy_from(&other);
            m
        } else {
            let mut m = DMatrix::zeros(dx + other.nrows(), dx);
            m.view_mut((0, 0), (dx, dx)).copy_from(&shifted);
            m.view_mut((dx, 0), (other.nrows(), dx)).copy_from(&other);
            m
        };
        let (rank, rel) = linalg::complex_rank(&pencil, TOL_RANK);
        margin = margin.min(rel);
        if rank < dx {
            failing.push(format!("{:.4}{:+.4}i", lambda.re, lambda.im));
        }
    }
    let what = if assumption == Assumption::A4 {
        "uncontrollable"
    } else {
        "unobservable"
    };
    AssumptionCheck {
        assumption,
        passed: failing.is_empty(),
        metric: margin,
        detail: if modes.is_empty() {
            "A is Schur stable".into()
        } else if failing.is_empty() {
            format!("{} unstable mode(s) pass the PBH test", modes.len())
        } else {
            format!("{what} unstable mode(s) at {}", failing.join(", "))
        },
    }
}

fn check_stabilizable(system: &LinearSystem) -> AssumptionCheck {
    pbh(system, Assumption::A4)
}

fn check_detectable(system: &LinearSystem) -> AssumptionCheck {
    pbh(system, Assumption::A5)
}
