use std::fs;
use std::process::{Command, Output};

use greedy_ldp::io::Table;
use greedy_ldp_cli::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greedy-ldp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn csv_body(text: &str) -> Table {
    let first = text.lines().next().unwrap_or("");
    assert!(first.starts_with("# greedy-ldp "), "missing metadata line: {first:?}");
    assert!(first.contains("config=") && first.contains("seed="));
    Table::parse_csv(text).unwrap()
}

#[test]
fn fluid_regular_three_hits_the_jamming_constant() {
    let out = run(&["fluid", "--regular", "3", "--step", "1e-4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = csv_body(&String::from_utf8(out.stdout).unwrap());
    let t = table.column("t").unwrap();
    let s = table.column("s").unwrap();
    let last = *t.last().unwrap();
    assert!((last - 0.375).abs() < 1e-6, "T* = {last}");
    assert!((s.last().unwrap() - 0.375).abs() < 1e-6);
    assert_eq!(table.header[..3], ["t", "s", "u"]);
}

#[test]
fn rate_curve_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let out = run(&[
        "rate-curve", "--regular", "2", "--range", "-1,0.3", "--points", "14", "--step", "1e-3",
        "--out", csv.to_str().unwrap(), "--gnuplot",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = csv_body(&fs::read_to_string(&csv).unwrap());
    assert_eq!(table.header, ["alpha0", "T_alpha0", "F"]);
    let (a, t, f) = (table.column("alpha0").unwrap(), table.column("T_alpha0").unwrap(), table.column("F").unwrap());
    assert_eq!(a.len(), 14);
    assert!(t.windows(2).all(|w| w[0] < w[1]), "T_alpha0 not increasing: {t:?}");
    // F vanishes only at the fluid path and grows on both sides
    let i0 = f.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
    assert!(a[i0].abs() < 0.1);
    assert!(f[0] > f[i0] && f[13] > f[i0]);
    let gp = fs::read_to_string(csv.with_extension("gp")).unwrap();
    assert!(gp.contains("'curve.csv' using 1:3"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["fluid"]).status.code(), Some(2));
    assert_eq!(run(&["fluid", "--regular", "3", "--probs", "0,1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn exit_codes_follow_the_error_class() {
    // probabilities that do not sum to one
    assert_eq!(run(&["fluid", "--probs", "0.5,0.2"]).status.code(), Some(2));
    assert_eq!(run(&["fluid", "--regular", "3", "--gnuplot"]).status.code(), Some(2));
    // T* + 0.06 for d = 2 sits above every reachable T_alpha0
    let out = run(&["deviation", "--regular", "2", "--eps", "0.0721", "--step", "1e-3"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    // a large tilt blows up before extinction
    let out = run(&["hamilton", "--regular", "2", "--alpha0", "2", "--step", "1e-3"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    let saved = dir.path().join("saved.cfg");
    let csv = dir.path().join("fluid.csv");
    fs::write(&cfg_path, format!("command = fluid\nregular = 3\nstep = 0.001\nout = {}\n", csv.display())).unwrap();

    let out = run(&["--config", cfg_path.to_str().unwrap(), "--save-config", saved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let original = RunConfig::parse(&fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let written = RunConfig::parse(&fs::read_to_string(&saved).unwrap()).unwrap();
    assert_eq!(original, written);
    let first = fs::read_to_string(&csv).unwrap();
    assert!(first.lines().next().unwrap().contains(&format!("config={}", original.hash())));

    // flags on the command line override the file
    let out = run(&["fluid", "--config", cfg_path.to_str().unwrap(), "--step", "0.002"]);
    assert_eq!(out.status.code(), Some(0));
    let second = fs::read_to_string(&csv).unwrap();
    assert_ne!(first.lines().next(), second.lines().next());
    assert!(second.lines().count() < first.lines().count());
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (path, threads) in [(&a, "1"), (&b, "3")] {
        let out = run(&["--threads", threads, "simulate", "--regular", "3", "--n", "200", "--seed", "7", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(summary["t_star_steps"].as_u64().unwrap() > 0);
    }
    // the metadata lines differ only through the output path in the config
    let body = |p: &std::path::Path| fs::read_to_string(p).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
    assert!(fs::read_to_string(&a).unwrap().lines().next().unwrap().ends_with("seed=7"));
}

#[test]
fn montecarlo_summary_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hist.csv");
    let out = run(&[
        "montecarlo", "--regular", "3", "--n", "100", "--replicas", "200", "--seed", "1",
        "--threshold", "0.4", "--side", "upper", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = summary["fractions"]["mean"].as_f64().unwrap();
    assert!((mean - 0.375).abs() < 0.03, "mean {mean}");
    assert_eq!(summary["tail_estimates"][0]["replicas"], 200);
    let table = csv_body(&fs::read_to_string(&csv).unwrap());
    let total: f64 = table.column("count").unwrap().iter().sum();
    assert_eq!(total, 200.0);
}

#[test]
fn scalar_subcommands_print_json() {
    let out = run(&["cost", "--regular", "3", "--x", "0.1,0.8,0.2", "--beta", "1,-6,-2"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "finite");
    assert!(v["value"].as_f64().unwrap() >= 0.0);

    let out = run(&["cost", "--regular", "3", "--x", "0.1,0.8,0.2", "--beta", "1,-6,-9"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"], "inf");

    let out = run(&["hamiltonian", "--eval", "0.1,0.5,0,0,0,0.1;0,0,0,0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap().abs() < 1e-12);
}
