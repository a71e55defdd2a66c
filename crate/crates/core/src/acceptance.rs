//! End-to-end acceptance checks.
//!
//! Each criterion bundles a few [`Check`]s and a runtime budget. The
//! thresholds are fixed here; callers only choose which criteria to run.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::action::{Action, UnknownVector};
use crate::diagnostics::{convergence_study, DiagnosticsReport};
use crate::error::Result;
use crate::potential::PotentialSpec;
use crate::problem::{Problem, ProblemSpec};
use crate::sbp::{build_grid, build_sbp, OperatorOrder};
use crate::solver::{solve_physical, SolverSettings};

const OPERATORS: [&str; 2] = ["sbp21", "sbp42"];

#[derive(Debug, Clone)]
pub struct Check {
    /// Short label such as `3(a) SBP21`.
    pub label: String,
    pub description: String,
    pub passed: bool,
    /// Measured value against its threshold.
    pub detail: String,
}

impl Check {
    fn new(label: impl Into<String>, description: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { label: label.into(), description: description.into(), passed, detail: detail.into() }
    }

    fn at_most(label: impl Into<String>, description: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(label, description, value <= limit, format!("{value:.3e} <= {limit:.0e}"))
    }

    fn at_least(label: impl Into<String>, description: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(label, description, value >= limit, format!("{value:.4} >= {limit}"))
    }

    fn failed(label: impl Into<String>, description: impl Into<String>, err: impl fmt::Display) -> Self {
        Self::new(label, description, false, format!("error: {err}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<14} {}: {}", self.label, self.description, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionReport {
    pub fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && self.checks.iter().all(|c| c.passed)
    }

    /// Every check followed by the runtime line.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().map(|c| c.to_string()).collect();
        out.push(self.runtime_check().to_string());
        out
    }

    pub fn runtime_check(&self) -> Check {
        Check::new(
            format!("{} runtime", self.id),
            self.title,
            self.within_budget(),
            format!("{:.2} s < {} s", self.elapsed.as_secs_f64(), self.budget.as_secs()),
        )
    }
}

pub const CRITERIA: [u8; 7] = [1, 2, 3, 4, 5, 6, 7];

pub fn run_criterion(id: u8) -> Option<CriterionReport> {
    let (title, budget, f): (&'static str, u64, fn() -> Vec<Check>) = match id {
        1 => ("operator suite", 1, operator_suite),
        2 => ("derivative consistency", 10, derivative_consistency),
        3 => ("quartic run", 30, quartic_run),
        4 => ("linear-potential run", 30, linear_run),
        5 => ("emergent time spacing", 30, amr_property),
        6 => ("convergence against the oracle", 120, convergence),
        7 => ("free-particle equivalence", 5, free_particle),
        _ => return None,
    };
    let start = Instant::now();
    let checks = f();
    Some(CriterionReport { id, title, checks, elapsed: start.elapsed(), budget: Duration::from_secs(budget) })
}

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().filter_map(|id| run_criterion(*id)).collect()
}

fn label(id: &str, op: &str) -> String {
    format!("{id} {}", op.to_uppercase())
}

#[derive(Default)]
struct OperatorDefects {
    sbp: f64,
    consistency: f64,
    accuracy: f64,
    errors: Vec<String>,
}

fn operator_defects(order: OperatorOrder, n: usize) -> OperatorDefects {
    match build_grid(0.0, 1.0, n).and_then(|g| build_sbp(order, &g)) {
        Ok(ops) => {
            let defects = ops.accuracy_defects(ops.interior_accuracy);
            OperatorDefects {
                sbp: ops.sbp_defect(),
                consistency: (&ops.d * DVector::from_element(n, 1.0)).amax(),
                accuracy: defects.iter().copied().fold(0.0, f64::max),
                errors: Vec::new(),
            }
        }
        Err(e) => OperatorDefects { errors: vec![format!("n={n}: {e}")], ..Default::default() },
    }
}

fn operator_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    for order in [OperatorOrder::Sbp21, OperatorOrder::Sbp42] {
        let worst = (8..=512usize).into_par_iter().map(|n| operator_defects(order, n)).reduce(
            OperatorDefects::default,
            |mut a, b| {
                a.sbp = a.sbp.max(b.sbp);
                a.consistency = a.consistency.max(b.consistency);
                a.accuracy = a.accuracy.max(b.accuracy);
                a.errors.extend(b.errors);
                a
            },
        );
        let op = order.name();
        if !worst.errors.is_empty() {
            checks.push(Check::new(label("1", op), "operator construction", false, worst.errors.join("; ")));
        }
        checks.push(Check::at_most(label("1", op), "SBP identity, n = 8..512", worst.sbp, 1e-13));
        checks.push(Check::at_most(label("1", op), "D applied to constants", worst.consistency, 1e-13));
        checks.push(Check::at_most(label("1", op), "polynomial exactness per row", worst.accuracy, 1e-12));
    }
    checks
}

fn random_point(problem: &Problem, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let n = problem.n();
    let mut z = UnknownVector::zeros(n);
    let nodes = &problem.grid.nodes;
    for k in 0..n {
        z.t1[k] = nodes[k] + 0.1 * rng.random_range(-1.0..1.0);
        z.t2[k] = nodes[k] + 0.1 * rng.random_range(-1.0..1.0);
        z.x1[k] = 1.0 + 0.2 * rng.random_range(-1.0..1.0);
        z.x2[k] = 1.0 + 0.2 * rng.random_range(-1.0..1.0);
    }
    for l in z.lambda.iter_mut() {
        *l = rng.random_range(-1.0..1.0);
    }
    z.pack()
}

fn relative(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

fn fd_errors(action: &Action<'_>, z: &DVector<f64>) -> Result<(f64, f64)> {
    let step = 1e-6;
    let grad = action.gradient(z)?;
    let hess = action.hessian(z)?;
    let mut fd_grad = DVector::zeros(z.len());
    let mut hess_err = 0.0f64;
    for i in 0..z.len() {
        let mut plus = z.clone();
        let mut minus = z.clone();
        plus[i] += step;
        minus[i] -= step;
        fd_grad[i] = (action.value(&plus)? - action.value(&minus)?) / (2.0 * step);
        let column = (action.gradient(&plus)? - action.gradient(&minus)?) / (2.0 * step);
        hess_err = hess_err.max(relative(&hess.column(i).into_owned(), &column));
    }
    Ok((relative(&grad, &fd_grad), hess_err))
}

fn derivative_consistency() -> Vec<Check> {
    let potentials = [
        PotentialSpec::free(),
        PotentialSpec::linear(0.25),
        PotentialSpec::quartic(0.25),
        PotentialSpec::polynomial(vec![0.1, -0.2, 0.3, 0.05, 0.02]),
    ];
    let mut checks = Vec::new();
    for op in OPERATORS {
        for potential in &potentials {
            let spec = ProblemSpec { potential: potential.clone(), ..ProblemSpec::paper_quartic().with_operator(op).with_n(16) };
            let name = format!("{op} {}", potential.kind);
            let outcome = (|| -> Result<(f64, f64)> {
                let problem = Problem::new(spec)?;
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                let (mut g, mut h) = (0.0f64, 0.0f64);
                for i in 0..20 {
                    let epsilon = if i % 2 == 0 { 0.0 } else { problem.grid.d_gamma.powi(2) };
                    let action = Action::new(&problem, epsilon)?;
                    let (ge, he) = fd_errors(&action, &random_point(&problem, &mut rng))?;
                    g = g.max(ge);
                    h = h.max(he);
                }
                Ok((g, h))
            })();
            match outcome {
                Ok((g, h)) => {
                    checks.push(Check::at_most(label("2", op), format!("gradient vs FD, {}", potential.kind), g, 1e-6));
                    checks.push(Check::at_most(label("2", op), format!("Hessian vs FD, {}", potential.kind), h, 1e-5));
                }
                Err(e) => checks.push(Check::failed(label("2", op), name, e)),
            }
        }
    }
    checks
}

fn solved(spec: ProblemSpec) -> Result<(Problem, crate::solver::PhysicalSolution, DiagnosticsReport)> {
    let problem = Problem::new(spec)?;
    let sol = solve_physical(&problem, &SolverSettings::default())?;
    let report = DiagnosticsReport::compute(&sol.result.z_star, &problem, sol.result.epsilon_used)?;
    Ok((problem, sol, report))
}

fn charge_checks(id: &str, op: &str, report: &DiagnosticsReport, q_expected: f64) -> Vec<Check> {
    vec![
        Check::at_most(format!("{id}(a) {}", op.to_uppercase()), "charge constancy max|Q_k - Q_1|", report.charge_spread(), 1e-9),
        Check::at_most(
            format!("{id}(b) {}", op.to_uppercase()),
            format!("|Q_1 - {q_expected}|"),
            (report.q[0] - q_expected).abs(),
            1e-10,
        ),
        Check::at_most(format!("{id}(c) {}", op.to_uppercase()), "|lambda_2|", report.lambda[1].abs(), 1e-10),
    ]
}

/// Nonzero (above `tol`) exactly on the last two entries.
fn last_two_only(v: &DVector<f64>, tol: f64) -> (bool, String) {
    let n = v.len();
    let nonzero: Vec<usize> = (0..n).filter(|k| v[*k].abs() > tol).map(|k| k + 1).collect();
    (nonzero == [n - 1, n], format!("nonzero at nodes {nonzero:?} of {n}"))
}

fn quartic_run() -> Vec<Check> {
    let mut checks = Vec::new();
    for op in OPERATORS {
        let l = |s: &str| format!("3{s} {}", op.to_uppercase());
        let (_, sol, r) = match solved(ProblemSpec::paper_quartic().with_operator(op)) {
            Ok(v) => v,
            Err(e) => {
                checks.push(Check::failed(l(""), "solve", e));
                continue;
            }
        };
        checks.push(Check::new(
            l(""),
            "Newton convergence",
            sol.result.converged && sol.result.residual_norm <= 1e-12,
            format!(
                "residual {:.3e} <= 1e-12 after {} iterations, eps = {:.1e}",
                sol.result.residual_norm, sol.result.iterations, sol.result.epsilon_used
            ),
        ));
        checks.extend(charge_checks("3", op, &r, 1.5));
        checks.push(Check::at_most(l("(d)"), "max|dG_t| over all nodes", r.dg_t.amax(), 1e-9));
        let n = r.dg_x.len();
        let last = r.dg_x[n - 1].abs();
        checks.push(Check::new(
            l("(e)"),
            "max|dG_x| except last node",
            r.dg_x.rows(0, n - 1).amax() <= 1e-9 && last > 1e-9,
            format!("{:.3e} <= 1e-9, last node {last:.3e}", r.dg_x.rows(0, n - 1).amax()),
        ));
        let (t_ok, t_detail) = last_two_only(&r.dg_t_naive, 1e-9);
        let (x_ok, x_detail) = last_two_only(&r.dg_x_naive, 1e-9);
        checks.push(Check::new(
            l("(f)"),
            "naive residuals only at last two nodes",
            t_ok && x_ok,
            format!("t: {t_detail}; x: {x_detail}"),
        ));
        checks.push(Check::at_most(l("(g)"), "branch gap max|x_1 - x_2|", r.branch_gap_x, 1e-9));
    }
    checks
}

fn linear_run() -> Vec<Check> {
    let mut checks = Vec::new();
    for op in OPERATORS {
        match solved(ProblemSpec::paper_linear().with_operator(op)) {
            Ok((problem, sol, r)) => {
                checks.push(Check::new(
                    label("4", op),
                    "Newton convergence",
                    sol.ok(),
                    format!("residual {:.3e}", sol.result.residual_norm),
                ));
                checks.extend(charge_checks("4", op, &r, problem.continuum_charge()));
            }
            Err(e) => checks.push(Check::failed(label("4", op), "solve", e)),
        }
    }
    checks
}

fn amr_property() -> Vec<Check> {
    let mut checks = Vec::new();
    for op in OPERATORS {
        match solved(ProblemSpec::paper_quartic().with_operator(op)) {
            Ok((_, _, r)) => {
                let amr = &r.amr;
                checks.push(Check::new(
                    label("5", op),
                    "spacing ratio max(dt)/min(dt)",
                    amr.ratio > 1.01,
                    format!("{:.4} > 1.01", amr.ratio),
                ));
                let distance = amr.min_index.abs_diff(amr.max_curvature_index);
                checks.push(Check::new(
                    label("5", op),
                    "min dt near max |DDx|",
                    distance <= 2,
                    format!(
                        "min dt at interval {}, max |DDx| at node {}, distance {distance} <= 2",
                        amr.min_index + 1,
                        amr.max_curvature_index + 1
                    ),
                ));
            }
            Err(e) => checks.push(Check::failed(label("5", op), "solve", e)),
        }
    }
    checks
}

fn convergence() -> Vec<Check> {
    let mut checks = Vec::new();
    for (op, target) in [("sbp21", 1.8), ("sbp42", 2.5)] {
        let spec = ProblemSpec::paper_quartic().with_operator(op);
        match convergence_study(&spec, &[16, 32, 64, 128], &SolverSettings::default()) {
            Ok(study) => {
                checks.push(Check::at_most(label("6", op), "oracle first-integral drift", study.oracle_drift, 1e-10));
                checks.push(Check::at_most(label("6", op), "oracle error bound", study.oracle_error_bound, 1e-10));
                let all = study.rows.iter().all(|r| r.converged);
                match study.fitted_order {
                    Some(p) if all => checks.push(Check::at_least(label("6", op), "fitted order, n = 16..128", p, target)),
                    p => checks.push(Check::new(
                        label("6", op),
                        "fitted order, n = 16..128",
                        false,
                        format!("order {p:?}, all members converged: {all}"),
                    )),
                }
            }
            Err(e) => checks.push(Check::failed(label("6", op), "convergence study", e)),
        }
    }
    checks
}

fn free_particle() -> Vec<Check> {
    let mut checks = Vec::new();
    for op in OPERATORS {
        let (mut traj, mut charge) = (0.0f64, 0.0f64);
        let mut failures = Vec::new();
        let sizes: &[usize] = if op == "sbp21" { &[4, 8, 16, 32, 64, 128] } else { &[8, 16, 32, 64, 128] };
        for &n in sizes {
            let spec = ProblemSpec::free_particle().with_operator(op).with_n(n);
            match solved(spec) {
                Ok((problem, sol, r)) => {
                    if !sol.ok() {
                        failures.push(n);
                    }
                    let init = &problem.spec.initial;
                    let g0 = problem.grid.gamma_i;
                    let t = problem.grid.nodes.map(|g| init.t_i + init.tdot_i * (g - g0));
                    let x = problem.grid.nodes.map(|g| init.x_i + init.xdot_i * (g - g0));
                    traj = traj.max((&sol.t - t).amax()).max((&sol.x - x).amax());
                    charge = charge.max(r.q.add_scalar(-problem.continuum_charge()).amax());
                }
                Err(_) => failures.push(n),
            }
        }
        if !failures.is_empty() {
            checks.push(Check::new(label("7", op), "solves", false, format!("failed for n = {failures:?}")));
        }
        checks.push(Check::at_most(label("7", op), format!("trajectory vs ramp, n in {sizes:?}"), traj, 1e-12));
        checks.push(Check::at_most(label("7", op), "charge vs c^2 tdot_i", charge, 1e-12));
    }
    checks
}
