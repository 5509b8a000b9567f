use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rydberg-sim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Small, fast configuration: few velocity classes, few layers, few points.
const SMALL: &str = r#"
[cell]
n_layers = 4
number_density = 2e15

[ensemble]
n_points = 21

[sweep]
delta_p_min_hz = -4e6
delta_p_max_hz = 4e6
delta_p_points = 5
e_rf_points = 9
delta_rf_family_hz = [0.0, 10e6]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_csv_json_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["simulate", "fig3-rma", "--config", &cfg, "--out", out.to_str().unwrap(), "--svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("fig3-rma.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,value,protocol,delta_p_hz,delta_rf_hz,e_rf_v_per_m,omega_mod_hz");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("-4000000,"));
    assert!(rows[0].contains(",modulation-transfer,-4000000,0,0.5014,3000000"));
    let json = std::fs::read_to_string(out.join("fig3-rma.json")).unwrap();
    for key in ["\"config\"", "\"wall_time_s\"", "\"e_rf_applied\"", "\"e_rf_internal\""] {
        assert!(json.contains(key), "{key} missing");
    }
    let svg = std::fs::read_to_string(out.join("fig3-rma.svg")).unwrap();
    assert!(svg.contains(r#"viewBox="0 0 800 500""#));
}

#[test]
fn fig4_family_and_determinism_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&["simulate", "fig4", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ca = std::fs::read(a.join("fig4.csv")).unwrap();
    let cb = std::fs::read(b.join("fig4.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    // 2 protocols x 2 detunings x 9 fields
    assert_eq!(text.lines().count(), 1 + 36);
    assert!(text.contains(",conventional,2000000,10000000,"));
    assert!(text.contains(",modulation-transfer,0,10000000,"));
}

#[test]
fn slope_subcommand_reads_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let mut text = String::from("x,value,protocol,delta_p_hz,delta_rf_hz,e_rf_v_per_m,omega_mod_hz\n");
    for i in 0..11 {
        let x = i as f64 * 0.05;
        text.push_str(&format!("{x},{},conventional,0,0,{x},0\n", 3.0 * x + 1.0));
    }
    std::fs::write(&p, text).unwrap();
    let o = run(&["slope", "--in", p.to_str().unwrap(), "--degree", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for r in rows {
        let s: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert!((s - 3.0).abs() < 1e-9);
    }
}

#[test]
fn sensitivity_subcommand() {
    let o = run(&["sensitivity", "--slope", "1", "--power", "1", "--eta", "1"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let v: f64 = out.split_whitespace().next().unwrap().parse().unwrap();
    assert!((v - 5.66e-10).abs() < 0.01e-10);
    let o = run(&["sensitivity", "--slope", "-1", "--power", "1", "--eta", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_density_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cell.n_layers = 10\nensemble.n_points = 41\n");
    let o = run(&["calibrate-density", "--target", "0.37", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let t: f64 = out.lines().find(|l| l.starts_with("transmission")).unwrap().split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((t - 0.37).abs() < 1e-4, "{t}");
}

#[test]
fn exit_codes_per_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    // usage
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "fig9", "--out", out]).status.code(), Some(2));
    // config: validation and parse
    let bad = write_config(dir.path(), "cell.perturbation_factor = 1.5\n");
    let o = run(&["simulate", "fig3-rma", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cell.perturbation_factor"));
    let bad = write_config(dir.path(), "[cell]\nnope = 1\n");
    let o = run(&["simulate", "fig3-rma", "--config", &bad, "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    // solver: unreachable calibration target
    let cfg = write_config(dir.path(), "cell.n_layers = 2\nensemble.n_points = 5\n");
    assert_eq!(run(&["calibrate-density", "--target", "1e-300", "--config", &cfg]).status.code(), Some(4));
    // i/o
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["simulate", "fig3-rma", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(5));
}
