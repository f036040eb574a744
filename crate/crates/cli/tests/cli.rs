use std::path::Path;
use std::process::{Command, Output};

fn fdjs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdjs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn roc_header_and_comment() {
    let out = fdjs(&["roc", "--set", "gamma_points=5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# fdjs roc seed=1 config={"), "{first}");
    assert!(text.contains("# c=-"));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "gamma,p_fa,p_md");
    assert_eq!(rows.len(), 6);
    // c and k are echoed on stderr when stdout carries the CSV
    assert!(String::from_utf8_lossy(&out.stderr).contains("c=-"));
}

#[test]
fn optimize_reports_status_and_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("opt.csv");
    let out = fdjs(&[
        "optimize",
        "--verify",
        "--svg",
        "--out",
        csv.to_str().unwrap(),
        "--set",
        "curve_points=9",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("eta* = "));
    assert!(report.contains("status = Converged"), "{report}");
    assert!(report.contains("(ok)"));
    let text = read(&csv);
    let rows = data_lines(&text);
    assert_eq!(rows[0], "eta,m_t,m_r,f_t,f_r,p_fa");
    assert_eq!(rows.len(), 10);
    assert!(read(&dir.path().join("opt.svg")).starts_with("<svg"));
}

#[test]
fn optimize_flags_single_radio_limit() {
    // A receiver far outside the keep-out radius is useless, so SU-Tx
    // carries the whole budget.
    let out = fdjs(&[
        "optimize",
        "--set",
        "d_tx_m=120000",
        "--set",
        "d_rx_m=240000",
        "--set",
        "curve_points=2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("status = BoundarySolution"), "{report}");
    assert!(report.contains("eta* = 1.0"), "{report}");
}

#[test]
fn heatmap_default_grid_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("map.csv");
    let out = fdjs(&["heatmap", "--verify", "--svg", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = read(&csv);
    let rows = data_lines(&text);
    assert_eq!(
        rows[0],
        "d_tx_m,d_rx_m,pfa_single,pfa_css,pfa_fdjs,ratio_css,ratio_fdjs"
    );
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[1].split(',').count(), 7);
    assert!(rows[1].starts_with("100000.0,100000.0,"));
    assert!(rows[400].starts_with("290000.0,290000.0,"));
    assert!(read(&dir.path().join("map.svg")).contains("<rect"));
}

#[test]
fn heatmap_verify_failure_exits_2() {
    // One diagonal cell: CSS can never lose to the single detector there.
    let out = fdjs(&[
        "heatmap",
        "--verify",
        "--set",
        "grid_min_m=150000",
        "--set",
        "grid_max_m=150000",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn throughput_writes_one_file_per_separation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tp.csv");
    let out = fdjs(&[
        "throughput",
        "--svg",
        "--out",
        csv.to_str().unwrap(),
        "--set",
        "trials=2",
        "--set",
        "duration_s=5",
        "--set",
        "switch_cycles_s=[0.5,2]",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for sep in ["30000", "10000"] {
        let text = read(&dir.path().join(format!("tp_sep{sep}m.csv")));
        let rows = data_lines(&text);
        assert_eq!(rows[0], "switch_cycle_s,strategy,throughput_bps,disruption_rate,stderr");
        assert_eq!(rows.len(), 1 + 2 * 4);
        assert!(rows[1].starts_with("0.5,FDJS,"));
        assert!(dir.path().join(format!("tp_sep{sep}m.svg")).exists());
    }
    assert!(!csv.exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 5, "gamma_points": 3, "n_samples": 200}"#).unwrap();
    let out = fdjs(&[
        "roc",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--set",
        "gamma_points=4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# fdjs roc seed=11 "));
    assert!(text.contains("\"n_samples\":200"));
    assert_eq!(data_lines(&text).len(), 5);
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(fdjs(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fdjs(&["roc", "--set", "unknown_key=3"]).status.code(), Some(1));
    assert_eq!(fdjs(&["roc", "--set", "md_bound=2"]).status.code(), Some(1));
    assert_eq!(fdjs(&["roc", "--svg"]).status.code(), Some(1));
    assert_eq!(
        fdjs(&["roc", "--config", "/nonexistent/cfg.json"]).status.code(),
        Some(1)
    );
    assert_eq!(
        fdjs(&["throughput", "--set", "strategies=[\"LBT\"]"]).status.code(),
        Some(1)
    );
    assert_eq!(fdjs(&["--help"]).status.code(), Some(0));
}

#[test]
fn identical_reruns_are_byte_identical() {
    let args = [
        "throughput",
        "--seed",
        "3",
        "--set",
        "trials=3",
        "--set",
        "duration_s=10",
        "--set",
        "separations_m=[10000]",
    ];
    let a = fdjs(&args);
    let b = fdjs(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = fdjs(&[
        "throughput",
        "--seed",
        "4",
        "--set",
        "trials=3",
        "--set",
        "duration_s=10",
        "--set",
        "separations_m=[10000]",
    ]);
    assert_ne!(a.stdout, c.stdout);
}
