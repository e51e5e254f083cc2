use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coexsched"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("coexsched-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let output = bin().output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let help = String::from_utf8_lossy(&output.stderr);
    assert!(help.contains("Usage"), "expected usage text, got: {help}");
}

#[test]
fn malformed_sweep_is_a_runtime_error() {
    let dir = scratch("badsweep");
    let output = bin()
        .args(["--seeds", "1", "--sweep", "arrival_std", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("key=v1,v2"), "unexpected stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_scheduler_is_a_usage_error() {
    let output = bin().args(["--scheduler", "psum"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn plain_run_writes_summary_and_one_ecdf_per_scheduler() {
    let dir = scratch("plain");
    let cfg = dir.join("cell.cfg");
    std::fs::write(
        &cfg,
        "n_embb = 2\nn_rb = 4\nn_slots = 4\narrival_mean = 1\narrival_std = 1\npayload_bytes = 16\ncell_radius_m = 100\n",
    )
    .unwrap();
    let out = dir.join("out");
    let status = bin()
        .args(["--config"])
        .arg(&cfg)
        .args(["--scheduler", "heuristic,mbs", "--seeds", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "scheduler,sweep_key,sweep_value,seeds,mean_mear_bits,mean_fairness,violation_rate"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("heuristic,none,base,2,"));
    assert!(lines[2].starts_with("mbs,none,base,2,"));

    for name in ["ecdf_heuristic_base.csv", "ecdf_mbs_base.csv"] {
        let body = std::fs::read_to_string(out.join(name)).unwrap();
        let rows: Vec<&str> = body.lines().collect();
        assert_eq!(rows[0], "mear_bits,cum_prob");
        assert_eq!(rows.len(), 3, "{name}: expected one row per seed");
        let probs: Vec<f64> = rows[1..]
            .iter()
            .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(probs, vec![0.5, 1.0]);
    }
    std::fs::remove_dir_all(&dir).ok();
}
