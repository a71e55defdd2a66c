use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn worldline(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_worldline"))
        .args(args)
        .current_dir(dir)
        .env("WORLDLINE_OUT", dir.join("out"))
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn worldline")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Self { header, rows }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let j = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[j].parse().unwrap()).collect()
    }
}

fn summary(dir: &Path) -> toml::Table {
    toml::from_str(&std::fs::read_to_string(dir.join("summary.toml")).unwrap()).unwrap()
}

fn get(t: &toml::Table, section: &str, key: &str) -> f64 {
    let v = &t[section][key];
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).unwrap()
}

#[test]
fn quartic_run_writes_conserving_solution() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("q");
    let o = worldline(tmp.path(), &["run", "paper-quartic", "--order", "21", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["converged"].as_bool(), Some(true));
    assert!(get(&s, "charge", "max_abs_delta_e") <= 1e-9);
    assert!(get(&s, "multipliers", "lambda_2").abs() <= 1e-10);

    let csv = Csv::read(&out.join("trajectory.csv"));
    assert_eq!(csv.rows.len(), 32);
    assert_eq!(csv.column("k"), (1..=32).map(f64::from).collect::<Vec<_>>());
    let q = csv.column("Q");
    let spread = q.iter().map(|v| (v - q[0]).abs()).fold(0.0, f64::max);
    assert_eq!(spread, get(&s, "charge", "spread"));
    assert_eq!(q[0], get(&s, "charge", "first"));
    let de = csv.column("delta_E").iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert_eq!(de, get(&s, "charge", "max_abs_delta_e"));
    assert!(csv.column("dt_spacing").last().unwrap().is_nan());
}

#[test]
fn free_particle_time_is_gamma() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("free");
    let o = worldline(tmp.path(), &["run", "--potential", "free", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::read(&out.join("trajectory.csv"));
    for (t, g) in csv.column("t").iter().zip(csv.column("gamma")) {
        assert!((t - g).abs() <= 1e-12, "t = {t}, gamma = {g}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for name in ["a", "b"] {
        let o = worldline(tmp.path(), &["run", "paper-linear", "--order", "42", "--out", name]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["trajectory.csv", "summary.toml", "config.toml"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between reruns");
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["run", "paper-quartic", "--n", "24", "--c", "1.3", "--out", "first"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = tmp.path().join("first").join("config.toml");
    let o = worldline(tmp.path(), &["run", echoed.to_str().unwrap(), "--out", "second"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["trajectory.csv", "summary.toml"] {
        let a = std::fs::read(tmp.path().join("first").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("second").join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }
}

#[test]
fn default_output_goes_under_the_output_root() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["run", "free"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("out/run-sbp21-n32-free/trajectory.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let missing_kind = tmp.path().join("missing.toml");
    std::fs::write(
        &missing_kind,
        "[problem]\nn_gamma = 16\n[problem.potential]\nstrength = 1.0\n\
         [problem.initial]\nt_i = 0.0\nx_i = 1.0\ntdot_i = 1.0\nxdot_i = 0.0\n",
    )
    .unwrap();
    let o = worldline(tmp.path(), &["run", missing_kind.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind"), "{}", stderr(&o));

    let o = worldline(tmp.path(), &["run", "--order", "42", "--n", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid too small for operator order"), "{}", stderr(&o));

    let o = worldline(tmp.path(), &["run", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(1));

    let o = worldline(tmp.path(), &["run", "absent.toml"]);
    assert_eq!(o.status.code(), Some(1));

    let o = worldline(tmp.path(), &["run", "--physics-m", "1"]);
    assert_eq!(o.status.code(), Some(2), "clap usage errors use status 2");
}

#[test]
fn non_convergence_exits_with_two_and_keeps_artifacts() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["run", "--max-iters", "1", "--out", "nc"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let s = summary(&tmp.path().join("nc"));
    assert_eq!(s["converged"].as_bool(), Some(false));
    assert!(tmp.path().join("nc/trajectory.csv").exists());
}

#[test]
fn sweep_reports_expected_orders() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["sweep", "--orders", "21,42", "--n", "16,32,64,128", "--out", "sw"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = Csv::read(&tmp.path().join("sw/sweep.csv"));
    assert_eq!(csv.rows.len(), 8);
    let ops: Vec<&str> = csv.rows.iter().map(|r| r[0].as_str()).collect();
    let fitted = csv.column("fitted_order");
    let order = |name: &str| fitted[ops.iter().position(|o| *o == name).unwrap()];
    assert!(order("sbp21") >= 1.8, "{}", order("sbp21"));
    assert!(order("sbp42") >= 2.5, "{}", order("sbp42"));
}

#[test]
fn dump_operators_writes_square_matrices() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["dump-operators", "--order", "42", "--n", "12", "--out", "ops"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["D.txt", "H.txt", "D_reg.txt"] {
        let text = std::fs::read_to_string(tmp.path().join("ops").join(file)).unwrap();
        let rows: Vec<Vec<f64>> =
            text.lines().map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 12, "{file}");
        assert!(rows.iter().all(|r| r.len() == 12), "{file}");
    }
    let h = std::fs::read_to_string(tmp.path().join("ops/H.txt")).unwrap();
    let total: f64 = h
        .lines()
        .enumerate()
        .map(|(i, l)| l.split_whitespace().nth(i).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-14);
}

#[test]
fn verify_prints_one_line_per_check() {
    let tmp = TempDir::new().unwrap();
    let o = worldline(tmp.path(), &["verify", "--criteria", "7"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.lines().any(|l| l.trim_start().starts_with("[PASS] 7")), "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
}
