//! Running configurations and serializing their results.
//!
//! Numbers in CSV and matrix files are written with `{:.16e}` (17 significant
//! digits), which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use worldline::diagnostics::{convergence_study, ConvergenceStudy, DiagnosticsReport};
use worldline::{solve_physical, PhysicalSolution, Problem, SolveStatus, UnknownVector};

use crate::config::{ConfigError, RunConfig};

pub const TRAJECTORY_COLUMNS: [&str; 11] =
    ["k", "gamma", "t", "x", "dt_spacing", "Q", "delta_E", "dG_t", "dG_x", "dG_t_naive", "dG_x_naive"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Result of `worldline run` before anything is written.
pub struct RunOutcome {
    pub config: RunConfig,
    pub problem: Problem,
    pub solution: Option<PhysicalSolution>,
    pub report: Option<DiagnosticsReport>,
    /// Solver or diagnostics failure that left no usable critical point.
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.solution.as_ref().is_some_and(|s| s.ok()) && self.error.is_none()
    }
}

/// Builds the problem (configuration errors are returned) and solves it
/// (solver failures are recorded in the outcome).
pub fn execute_run(config: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let problem = Problem::new(config.problem.clone())?;
    let mut outcome =
        RunOutcome { config: config.clone(), problem, solution: None, report: None, error: None };
    match solve_physical(&outcome.problem, &config.solver) {
        Ok(sol) => {
            match DiagnosticsReport::compute(&sol.result.z_star, &outcome.problem, sol.result.epsilon_used) {
                Ok(r) => outcome.report = Some(r),
                Err(e) => outcome.error = Some(e.to_string()),
            }
            outcome.solution = Some(sol);
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    Ok(outcome)
}

pub fn trajectory_csv(problem: &Problem, z: &UnknownVector, report: &DiagnosticsReport) -> String {
    let n = problem.n();
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for k in 0..n {
        let dt = if k + 1 < n { report.amr.dt[k] } else { f64::NAN };
        let row = [
            problem.grid.nodes[k],
            z.t1[k],
            z.x1[k],
            dt,
            report.q[k],
            report.delta_e[k],
            report.dg_t[k],
            report.dg_x[k],
            report.dg_t_naive[k],
            report.dg_x_naive[k],
        ];
        let _ = write!(out, "{}", k + 1);
        for v in row {
            let _ = write!(out, ",{}", num(v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub residual_norm: f64,
    pub iterations: usize,
    pub epsilon_used: f64,
    pub condition_estimate: f64,
    pub retried: bool,
    pub multiple_saddles: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeSummary {
    pub continuum: f64,
    pub first: f64,
    /// `max_k |Q_k − Q_1|`
    pub spread: f64,
    pub max_abs_delta_e: f64,
    /// `max_k |Q_k − Q_k(backward branch)|`
    pub max_branch_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_dg_t: f64,
    pub max_dg_x_except_last: f64,
    pub dg_x_last: f64,
    /// 1-based nodes where the naive residuals exceed 1e-9.
    pub naive_nonzero_nodes_t: Vec<usize>,
    pub naive_nonzero_nodes_x: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub t_final: f64,
    pub x_final: f64,
    pub branch_gap_t: f64,
    pub branch_gap_x: f64,
    pub dt_ratio: f64,
    /// 1-based interval `[k, k+1]` with the smallest time step.
    pub dt_min_interval: usize,
    /// 1-based node with the largest `|DDx|`.
    pub max_curvature_node: usize,
    pub monotonic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub converged: bool,
    pub physical: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub operator: String,
    pub n_gamma: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    /// `lambda_1` … `lambda_8`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<std::collections::BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<ChargeSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
}

fn nonzero_nodes(v: &DVector<f64>) -> Vec<usize> {
    (0..v.len()).filter(|k| v[*k].abs() > 1e-9).map(|k| k + 1).collect()
}

pub fn summary(outcome: &RunOutcome) -> Summary {
    let n = outcome.problem.n();
    let mut s = Summary {
        converged: outcome.converged(),
        physical: outcome.solution.as_ref().is_some_and(|s| s.physical),
        error: outcome.error.clone(),
        operator: outcome.problem.ops.order.to_string(),
        n_gamma: n,
        solver: None,
        multipliers: None,
        charge: None,
        residuals: None,
        trajectory: None,
    };
    if let Some(sol) = &outcome.solution {
        let r = &sol.result;
        s.solver = Some(SolverSummary {
            status: match r.status {
                SolveStatus::Converged => "converged",
                SolveStatus::MaxIterations => "max-iterations",
                SolveStatus::LineSearchStalled => "line-search-stalled",
            }
            .into(),
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            epsilon_used: r.epsilon_used,
            condition_estimate: r.condition_estimate,
            retried: sol.retried,
            multiple_saddles: sol.multiple_saddles,
        });
        s.multipliers =
            Some(r.z_star.lambda.iter().enumerate().map(|(i, l)| (format!("lambda_{}", i + 1), *l)).collect());
    }
    if let (Some(sol), Some(rep)) = (&outcome.solution, &outcome.report) {
        s.charge = Some(ChargeSummary {
            continuum: rep.q_continuum,
            first: rep.q[0],
            spread: rep.charge_spread(),
            max_abs_delta_e: rep.max_delta_e(),
            max_branch_difference: (&rep.q - &rep.q_backward).amax(),
        });
        s.residuals = Some(ResidualSummary {
            max_dg_t: rep.dg_t.amax(),
            max_dg_x_except_last: rep.dg_x.rows(0, n - 1).amax(),
            dg_x_last: rep.dg_x[n - 1],
            naive_nonzero_nodes_t: nonzero_nodes(&rep.dg_t_naive),
            naive_nonzero_nodes_x: nonzero_nodes(&rep.dg_x_naive),
        });
        s.trajectory = Some(TrajectorySummary {
            t_final: sol.t[n - 1],
            x_final: sol.x[n - 1],
            branch_gap_t: sol.branch_gap_t,
            branch_gap_x: sol.branch_gap_x,
            dt_ratio: rep.amr.ratio,
            dt_min_interval: rep.amr.min_index + 1,
            max_curvature_node: rep.amr.max_curvature_index + 1,
            monotonic: rep.amr.monotonic,
        });
    }
    s
}

/// Writes `trajectory.csv` (when a critical point exists), `summary.toml` and
/// `config.toml` into `dir`.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let (Some(sol), Some(rep)) = (&outcome.solution, &outcome.report) {
        let path = dir.join("trajectory.csv");
        fs::write(&path, trajectory_csv(&outcome.problem, &sol.result.z_star, rep))?;
        written.push(path);
    }
    let path = dir.join("summary.toml");
    let text = toml::to_string(&summary(outcome)).map_err(io::Error::other)?;
    fs::write(&path, text)?;
    written.push(path);
    let path = dir.join("config.toml");
    fs::write(&path, outcome.config.echo())?;
    written.push(path);
    Ok(written)
}

/// Runs one convergence study per operator over `n_list`.
pub fn sweep(config: &RunConfig, operators: &[String], n_list: &[usize]) -> Result<Vec<ConvergenceStudy>, ConfigError> {
    operators
        .iter()
        .map(|op| {
            let spec = config.problem.clone().with_operator(op);
            Ok(convergence_study(&spec, n_list, &config.solver)?)
        })
        .collect()
}

pub fn sweep_csv(studies: &[ConvergenceStudy]) -> String {
    let mut out =
        String::from("operator,n_gamma,error_t,error_x,error,iterations,converged,local_order,fitted_order\n");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "NaN".into());
    for study in studies {
        for row in &study.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                study.operator,
                row.n_gamma,
                num(row.error_t),
                num(row.error_x),
                num(row.error),
                row.iterations,
                row.converged,
                opt(row.local_order),
                opt(study.fitted_order),
            );
        }
    }
    out
}

/// One matrix row per line, entries separated by single spaces.
pub fn matrix_text(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&num(m[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Writes `D.txt`, `H.txt` and `D_reg.txt` for the configured grid.
pub fn dump_operators(dir: &Path, problem: &Problem, epsilon: f64) -> Result<Vec<PathBuf>, ConfigError> {
    let reg = worldline::build_regularized(&problem.ops, epsilon)?;
    let io_err = |path: &Path, e: io::Error| ConfigError::Io { path: path.into(), source: e };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for (name, m) in [("D.txt", &problem.ops.d), ("H.txt", &problem.ops.h()), ("D_reg.txt", reg.d_reg())] {
        let path = dir.join(name);
        fs::write(&path, matrix_text(m)).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
