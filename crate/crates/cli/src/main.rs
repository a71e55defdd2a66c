//! `worldline`: solve, sweep, dump and verify discrete world-line problems.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 the solver did not
//! reach a physical critical point (or a `verify` check failed).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use worldline::acceptance::{run_criterion, CRITERIA};
use worldline::sbp::operators;
use worldline::{EpsilonPolicy, PotentialSpec};
use worldline_cli::config::{load_config, ConfigError, RunConfig, PRESETS};
use worldline_cli::report;

#[derive(Parser)]
#[command(name = "worldline", version, about = "Space-time symmetric variational integrator for a point particle")]
struct Cli {
    /// Log progress (ε selection, Newton iterations) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write trajectory.csv, summary.toml and config.toml.
    Run {
        #[command(flatten)]
        source: Source,
        /// Number of grid nodes.
        #[arg(long = "n")]
        n_gamma: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Grid refinement study against the ODE reference solution.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Operator orders to compare, e.g. `21,42`.
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<String>>,
        /// Grid sizes, strictly increasing.
        #[arg(long = "n", value_delimiter = ',', default_value = "16,32,64,128")]
        n_list: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write D, H and D_reg of the configured grid as text matrices.
    DumpOperators {
        #[command(flatten)]
        source: Source,
        #[arg(long = "n")]
        n_gamma: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the acceptance checks and print one line per check.
    Verify {
        /// Subset of criteria, e.g. `1,3,7`.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
    },
    /// List presets, operators, regularizers and potentials.
    List,
}

#[derive(Args)]
struct Source {
    /// Configuration file or preset name.
    #[arg(default_value = "paper-quartic")]
    config: String,
    /// Output directory (default: a subdirectory of the output root).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output root used when neither --out nor `output` in the config is set.
    #[arg(long, env = "WORLDLINE_OUT", default_value = "worldline-out")]
    out_root: PathBuf,
}

#[derive(Args, Default)]
struct Overrides {
    /// Operator: 21, 42, sbp21 or sbp42.
    #[arg(long)]
    order: Option<String>,
    /// Kinetic operator: sat-lift or dissipation.
    #[arg(long)]
    regularizer: Option<String>,
    /// Potential kind: free, linear, quartic or polynomial.
    #[arg(long)]
    potential: Option<String>,
    /// Potential strength (linear slope or quartic coefficient).
    #[arg(long)]
    strength: Option<f64>,
    /// Polynomial coefficients c0,c1,... of sum c_p x^p.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_f: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tdot_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xdot_i: Option<f64>,
    /// Regularization: `auto`, a fixed value, or a comma-separated ladder.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<String>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

fn parse_epsilon(text: &str) -> Result<EpsilonPolicy, ConfigError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(EpsilonPolicy::Auto);
    }
    let values: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == 1 => Ok(EpsilonPolicy::Fixed { value: v[0] }),
        Ok(v) => Ok(EpsilonPolicy::Ladder { values: v }),
        Err(_) => Err(ConfigError::Parse(format!("--epsilon: expected `auto`, a number or a list, got `{text}`"))),
    }
}

fn canonical_operator(name: &str) -> Result<String, ConfigError> {
    Ok(operators().canonical(name)?.to_string())
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig, n_gamma: Option<usize>) -> Result<(), ConfigError> {
        let p = &mut config.problem;
        if let Some(op) = &self.order {
            p.operator = canonical_operator(op)?;
        }
        if let Some(r) = &self.regularizer {
            p.regularizer = r.clone();
        }
        if let Some(n) = n_gamma {
            p.n_gamma = n;
        }
        if let Some(kind) = &self.potential {
            p.potential = PotentialSpec { kind: kind.clone(), strength: None, coefficients: None };
        }
        if let Some(s) = self.strength {
            p.potential.strength = Some(s);
        }
        if let Some(c) = &self.coefficients {
            p.potential.coefficients = Some(c.clone());
        }
        let set = |target: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *target = v;
            }
        };
        set(&mut p.gamma_i, self.gamma_i);
        set(&mut p.gamma_f, self.gamma_f);
        set(&mut p.physics.c, self.c);
        set(&mut p.physics.m, self.m);
        set(&mut p.initial.t_i, self.t_i);
        set(&mut p.initial.x_i, self.x_i);
        set(&mut p.initial.tdot_i, self.tdot_i);
        set(&mut p.initial.xdot_i, self.xdot_i);
        if let Some(e) = &self.epsilon {
            config.solver.epsilon = parse_epsilon(e)?;
        }
        set(&mut config.solver.residual_tol, self.residual_tol);
        if let Some(m) = self.max_iters {
            config.solver.max_iters = m;
        }
        config.validate()?;
        Ok(())
    }
}

fn prepare(source: &Source, overrides: &Overrides, n_gamma: Option<usize>) -> Result<RunConfig, ConfigError> {
    let mut config = load_config(&source.config)?;
    overrides.apply(&mut config, n_gamma)?;
    Ok(config)
}

fn output_dir(source: &Source, config: &RunConfig, default_name: String) -> PathBuf {
    source.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| source.out_root.join(default_name))
}

fn run_name(prefix: &str, config: &RunConfig) -> String {
    let p = &config.problem;
    format!("{prefix}-{}-n{}-{}", p.operator, p.n_gamma, p.potential.kind)
}

fn io_error(path: &Path, e: std::io::Error) -> ConfigError {
    ConfigError::Io { path: path.into(), source: e }
}

fn cmd_run(source: &Source, n_gamma: Option<usize>, overrides: &Overrides) -> Result<ExitCode, ConfigError> {
    let config = prepare(source, overrides, n_gamma)?;
    let dir = output_dir(source, &config, run_name("run", &config));
    let outcome = report::execute_run(&config)?;
    report::write_run(&dir, &outcome).map_err(|e| io_error(&dir, e))?;
    let summary = report::summary(&outcome);
    if let Some(s) = &summary.solver {
        println!(
            "{} n={}: {} after {} iterations, |grad| = {:.3e}, eps = {:.3e}",
            summary.operator, summary.n_gamma, s.status, s.iterations, s.residual_norm, s.epsilon_used
        );
    }
    if let Some(c) = &summary.charge {
        println!("charge Q_1 = {:.15}, max|Q_k - Q_1| = {:.3e}, max|dE| = {:.3e}", c.first, c.spread, c.max_abs_delta_e);
    }
    if let Some(l) = &summary.multipliers {
        println!("lambda_2 = {:.3e}, lambda_6 = {:.6e}, lambda_8 = {:.6e}", l["lambda_2"], l["lambda_6"], l["lambda_8"]);
    }
    if let Some(e) = &summary.error {
        error!("{e}");
    }
    println!("wrote {}", dir.display());
    Ok(if outcome.converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_sweep(
    source: &Source,
    orders: &Option<Vec<String>>,
    n_list: &[usize],
    overrides: &Overrides,
) -> Result<ExitCode, ConfigError> {
    let config = prepare(source, overrides, None)?;
    let ops: Vec<String> = match orders {
        Some(list) => list.iter().map(|o| canonical_operator(o)).collect::<Result<_, _>>()?,
        None => vec![config.problem.operator.clone()],
    };
    let studies = report::sweep(&config, &ops, n_list)?;
    let name = format!("sweep-{}-{}", ops.join("-"), config.problem.potential.kind);
    let dir = output_dir(source, &config, name);
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let path = dir.join("sweep.csv");
    std::fs::write(&path, report::sweep_csv(&studies)).map_err(|e| io_error(&path, e))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, config.echo()).map_err(|e| io_error(&path, e))?;
    let mut all_converged = true;
    for s in &studies {
        println!("{}: oracle drift {:.2e}, oracle error bound {:.2e}", s.operator, s.oracle_drift, s.oracle_error_bound);
        for r in &s.rows {
            println!("  n = {:>4}  error = {:.3e}  converged = {}", r.n_gamma, r.error, r.converged);
            if let Some(f) = &r.failure {
                error!("{} n = {}: {f}", s.operator, r.n_gamma);
            }
            all_converged &= r.converged;
        }
        match s.fitted_order {
            Some(p) => println!("  fitted order {p:.3}"),
            None => println!("  fitted order: not available"),
        }
    }
    println!("wrote {}", dir.display());
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_dump(source: &Source, n_gamma: Option<usize>, overrides: &Overrides) -> Result<ExitCode, ConfigError> {
    let config = prepare(source, overrides, n_gamma)?;
    let problem = worldline::Problem::new(config.problem.clone())?;
    let epsilon = match &config.solver.epsilon {
        EpsilonPolicy::Fixed { value } => *value,
        EpsilonPolicy::Ladder { values } => *values.last().unwrap_or(&0.0),
        EpsilonPolicy::Auto => 0.0,
    };
    let dir = output_dir(source, &config, format!("operators-{}-n{}", config.problem.operator, config.problem.n_gamma));
    for path in report::dump_operators(&dir, &problem, epsilon)? {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(criteria: &Option<Vec<u8>>) -> Result<ExitCode, ConfigError> {
    let ids = criteria.clone().unwrap_or_else(|| CRITERIA.to_vec());
    let mut all = true;
    for id in ids {
        let Some(report) = run_criterion(id) else {
            return Err(ConfigError::Parse(format!("unknown criterion {id} (known: 1-7)")));
        };
        println!("criterion {}: {}", report.id, report.title);
        for line in report.lines() {
            println!("  {line}");
        }
        all &= report.passed();
    }
    println!("{}", if all { "all checks passed" } else { "some checks FAILED" });
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_list() -> ExitCode {
    println!("presets:");
    for (name, summary) in PRESETS {
        println!("  {name:<16} {summary}");
    }
    let print = |title: &str, entries: Vec<(&str, &str, &[&str])>| {
        println!("{title}:");
        for (name, summary, aliases) in entries {
            let aliases = if aliases.is_empty() { String::new() } else { format!(" (aliases: {})", aliases.join(", ")) };
            println!("  {name:<16} {summary}{aliases}");
        }
    };
    print("operators", operators().entries().map(|e| (e.name, e.summary, e.aliases)).collect());
    print(
        "regularizers",
        worldline::regularizer::regularizers().entries().map(|e| (e.name, e.summary, e.aliases)).collect(),
    );
    print("potentials", worldline::potential::potentials().entries().map(|e| (e.name, e.summary, e.aliases)).collect());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Run { source, n_gamma, overrides } => cmd_run(source, *n_gamma, overrides),
        Command::Sweep { source, orders, n_list, overrides } => cmd_sweep(source, orders, n_list, overrides),
        Command::DumpOperators { source, n_gamma, overrides } => cmd_dump(source, *n_gamma, overrides),
        Command::Verify { criteria } => cmd_verify(criteria),
        Command::List => Ok(cmd_list()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            info!("exiting with status 1");
            ExitCode::from(1)
        }
    }
}
