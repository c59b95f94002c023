use std::path::Path;
use std::process::Command;

use nsfp::harness::output::read_field;
use nsfp::harness::{parse_config, run_continuation, parse_config_str};

const TINY: &str = r#"
[model]
epsilon = 0.2

[grid]
cells = 8
radial = 8
angular = 8

[time]
final_time = 0.02
sample_interval = 0.01
dt_max = 0.005
"#;

fn nsfp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nsfp")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn verify_subcommand_passes_on_baseline() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/baseline.toml");
    let out = nsfp(&["verify", cfg.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("maxwellian normalisation") && text.contains("helmholtz idempotence"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn simulate_writes_ledger_trace_fields_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[output]\nstride = 1\n");
    let cfg = write(dir.path(), "run.toml", &text);
    let out_dir = dir.path().join("out");
    let out = nsfp(&["simulate", &cfg, "--output-dir", out_dir.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["effective_config.toml", "ledger_0.2.csv", "acoustic_0.2.csv", "field_rho_0.2_000000.dat", "field_tau_xy_0.2_000002.dat"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let echo = parse_config(&out_dir.join("effective_config.toml")).unwrap();
    assert_eq!(echo.cells, 8);
    assert_eq!(echo.params.gamma, 2.0);
    let (nx, ny, rho) = read_field(&out_dir.join("field_rho_0.2_000000.dat")).unwrap();
    assert_eq!((nx, ny), (8, 8));
    assert!(rho.iter().all(|&r| r > 0.0));
    let ledger = std::fs::read_to_string(out_dir.join("ledger_0.2.csv")).unwrap();
    assert!(ledger.starts_with("time,kinetic,"));
    assert!(ledger.lines().skip(1).all(|l| l.ends_with("true,true")), "{ledger}");
}

#[test]
fn malformed_configs_fail_with_named_keys() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model]\nepsilon = 0.1\nepsilon = 0.2\n[time]\nfinal_time = 1.0\n");
    let out = nsfp(&["simulate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    let unknown = write(dir.path(), "unknown.toml", &format!("{TINY}\n[output]\nformat = \"hdf5\"\n"));
    let out = nsfp(&["continuation", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output.format"));
}

#[test]
fn single_epsilon_report_has_metrics_but_no_orders() {
    let cfg = parse_config_str(TINY).unwrap();
    let report = run_continuation(&cfg, false).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].metrics.is_some());
    assert!(report.rows[0].orders.is_none());
}

#[test]
fn identical_configs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[continuation]\nepsilon_list = [0.2, 0.1]\nrecipe = \"random\"\nseed = 5\n");
    let cfg = write(dir.path(), "c.toml", &text);
    let mut reports = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "2")] {
        let out_dir = dir.path().join(name);
        let out = nsfp(&["continuation", &cfg, "--output-dir", out_dir.to_str().unwrap(), "--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(out_dir.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports.pop().unwrap()).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[1], "ok");
    // printed order reproduces the metric ratio
    let (m0, m1): (f64, f64) = (text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap(), row[2].parse().unwrap());
    let order: f64 = row[3].parse().unwrap();
    assert!(((m1 / m0).ln() / 0.5f64.ln() - order).abs() < 1e-3);
}
