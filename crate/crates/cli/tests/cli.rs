use std::path::Path;
use std::process::{Command, Output};

use xlmd::harness::{order_estimate, summary_columns};
use xlmd::io::{read_sweep_csv, read_trajectory_csv};

fn xlmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlmd"))
        .args(args)
        .env("XLMD_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = xlmd(args);
    assert!(
        out.status.success(),
        "xlmd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn kv(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT_A: &[&str] = &[
    "--model", "a", "--method", "sxlmd", "--eps", "1e-4", "--temp", "1e-4", "--gamma", "0.1", "--dt", "5e-6",
];

#[test]
fn run_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nested/traj.csv");
    let mut args = vec!["run"];
    args.extend_from_slice(SHORT_A);
    args.extend_from_slice(&["--tf", "0.01", "--stride", "200", "-o", path(&csv)]);
    let stdout = ok(&args);
    assert_eq!(kv(&stdout, "steps"), 2000.0);
    let traj = read_trajectory_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(traj.len(), 11);
    assert!((traj.times.last().unwrap() - 0.01).abs() < 1e-12);
}

#[test]
fn runs_are_byte_identical() {
    let mut args = vec!["run"];
    args.extend_from_slice(SHORT_A);
    args.extend_from_slice(&["--tf", "0.005", "--stride", "50", "--seed", "7"]);
    let a = ok(&args);
    let b = ok(&args);
    assert_eq!(a, b);
    args.extend_from_slice(&["--set", "stream=1"]);
    assert_ne!(ok(&args), a);
}

#[test]
fn exact_md_counts_three_derivative_products_per_force() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let stdout = ok(&[
        "run", "--model", "b", "--method", "exact", "--dt", "4e-4", "--tf", "0.02", "--stride", "10", "-o",
        path(&csv),
    ]);
    let steps = kv(&stdout, "steps");
    assert_eq!(steps, 50.0);
    assert_eq!(kv(&stdout, "matvec_dax"), 3.0 * (steps + 1.0));
}

#[test]
fn sweep_then_order_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let cache = dir.path().join("cache");
    let mut args = vec!["sweep"];
    args.extend_from_slice(SHORT_A);
    args.extend_from_slice(&[
        "--x-init",
        "offset:0.5,-0.5",
        "--tf",
        "0.02",
        "--param",
        "eps",
        "--grid",
        "1e-3,1e-4",
        "--seeds",
        "1",
        "--sample-interval",
        "1e-3",
        "--cache-dir",
        path(&cache),
        "-o",
        path(&csv),
    ]);
    ok(&args);
    let rows = read_sweep_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
    let first = std::fs::read(&csv).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&csv).unwrap(), first);

    let (values, er, ep) = summary_columns(&rows);
    let printed = ok(&["order", path(&csv)]);
    assert!((kv(&printed, "order_r") - order_estimate(&values, &er, f64::INFINITY).unwrap()).abs() < 1e-6);
    assert!((kv(&printed, "order_p") - order_estimate(&values, &ep, f64::INFINITY).unwrap()).abs() < 1e-6);
}

#[test]
fn order_of_a_half_order_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("half.csv");
    let rows: String = [1e-1f64, 1e-2, 1e-3, 1e-4]
        .iter()
        .map(|v| format!("{v:e},{:e}\n", 3.0 * v.sqrt()))
        .collect();
    std::fs::write(&csv, format!("value,error\n{rows}")).unwrap();
    assert_eq!(ok(&["order", path(&csv)]).trim(), "0.500000");
    assert_eq!(ok(&["order", path(&csv), "--threshold", "1e-2"]).trim(), "0.500000");
}

#[test]
fn compare_reports_reductions() {
    let out = ok(&["compare", "--model", "b", "--preset", "standard", "--tf", "0.1"]);
    let ax = kv(&out, "ax_reduction_percent");
    assert!(ax > 50.0 && ax < 100.0, "{out}");
    assert!(kv(&out, "sxlmd_matvec_ax") < kv(&out, "md_matvec_ax"));
    assert!(out.contains("total_reduction_percent="));
}

#[test]
fn langevin_report_is_consistent() {
    let out = ok(&["langevin", "--model", "a", "--gamma", "0.1", "--temp", "1e-3", "--set", "t_points=11"]);
    let field = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.starts_with(name)).unwrap();
        line[name.len()..].split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!(field("lyapunov residual") < 1e-12);
    assert!((field("spectral gap") - 0.025).abs() < 1e-12);
    assert_eq!(field("decay violations"), 0.0);
    let table = out.lines().skip_while(|l| !l.trim_start().starts_with("t ")).skip(1);
    assert_eq!(table.count(), 11);
}

#[test]
fn dump_config_round_trips_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# base\neps = 1e-3\ntemp = 0.5\ngamma = 2\n").unwrap();
    let dumped = ok(&[
        "run", "--config", path(&file), "--set", "temp=0.25", "--set", "gamma=3", "--gamma", "4", "--dump-config",
    ]);
    assert!(dumped.contains("eps = 0.001\n"));
    assert!(dumped.contains("temp = 0.25\n"));
    assert!(dumped.contains("gamma = 4\n"));
    let again_file = dir.path().join("again.cfg");
    std::fs::write(&again_file, &dumped).unwrap();
    assert_eq!(ok(&["run", "--config", path(&again_file), "--dump-config"]), dumped);
}

#[test]
fn unknown_key_fails_naming_it() {
    let out = xlmd(&["run", "--set", "epsilon=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    let out = xlmd(&["run", "--dt", "fast"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
}
