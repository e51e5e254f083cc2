//! Command-line front end: loads a cell description, sweeps one
//! parameter, fans schedulers × seeds out through the simulator, and
//! writes a summary CSV plus per-cell ECDF files with byte-stable
//! content.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Parser;
use thiserror::Error;

use crate::model::{apply_override, ConfigError, SystemConfig};
use crate::sim::{run_experiment, ExperimentReport, SchedulerId, SimOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("--sweep expects key=v1,v2,...; got `{0}`")]
    MalformedSweep(String),
    #[error("{failed} of {total} simulation cells failed (details on stderr)")]
    FailedCells { failed: usize, total: usize },
}

#[derive(Debug, Parser)]
#[command(
    name = "coexsched",
    version,
    about = "Co-scheduling simulator: slot-level broadband against mini-slot low-latency puncturing",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Cell description file (key = value lines). Omit for the
    /// built-in reference cell.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated schedulers: proposed, heuristic, ps, mups, rs,
    /// eds, mbs.
    #[arg(long, value_delimiter = ',', default_value = "proposed")]
    pub scheduler: Vec<SchedulerId>,
    /// Number of independent replicates per scheduler.
    #[arg(long, default_value_t = 200)]
    pub seeds: u64,
    /// Seed of the first replicate; replicate i runs with base_seed+i.
    #[arg(long, default_value_t = 1)]
    pub base_seed: u64,
    /// One-parameter sweep, e.g. arrival_std=1,5,10 or payload=32,200.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Output directory for summary.csv and the ECDF files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Audit mode: account each punctured cell at the full slot rate
    /// instead of one mini-slot's worth.
    #[arg(long)]
    pub literal_eq10: bool,
}

/// Parses the command line and executes it; returns the process exit
/// code (0 success, 1 runtime failure, 2 usage error).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

struct Sweep {
    /// Config key being swept; None for a plain run.
    key: Option<String>,
    /// Values exactly as typed, reused in filenames and CSV cells.
    raw_values: Vec<String>,
}

impl Sweep {
    fn key_label(&self) -> &str {
        self.key.as_deref().unwrap_or("none")
    }
}

fn parse_sweep(arg: Option<&str>) -> Result<Sweep, CliError> {
    let Some(arg) = arg else {
        return Ok(Sweep {
            key: None,
            raw_values: vec!["base".to_string()],
        });
    };
    let Some((key, values)) = arg.split_once('=') else {
        return Err(CliError::MalformedSweep(arg.to_string()));
    };
    let key = key.trim();
    let raw_values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .collect();
    if key.is_empty() || raw_values.iter().any(String::is_empty) {
        return Err(CliError::MalformedSweep(arg.to_string()));
    }
    Ok(Sweep {
        key: Some(key.to_string()),
        raw_values,
    })
}

/// The sweep flag accepts the short name `payload` for the config key
/// `payload_bytes`; everything else passes through.
fn sweep_config_key(key: &str) -> &str {
    match key {
        "payload" => "payload_bytes",
        other => other,
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let base = match &cli.config {
        Some(path) => SystemConfig::from_file(path)?,
        None => SystemConfig::default().validate()?,
    };
    // First occurrence wins; duplicates would only duplicate rows.
    let mut schedulers: Vec<SchedulerId> = Vec::new();
    for &s in &cli.scheduler {
        if !schedulers.contains(&s) {
            schedulers.push(s);
        }
    }
    let sweep = parse_sweep(cli.sweep.as_deref())?;
    let seeds: Vec<u64> = (0..cli.seeds).map(|i| cli.base_seed + i).collect();
    let options = SimOptions {
        literal_eq10: cli.literal_eq10,
        ..SimOptions::default()
    };

    let mut reports: Vec<(String, ExperimentReport)> = Vec::new();
    for raw in &sweep.raw_values {
        let cfg = match &sweep.key {
            Some(key) => apply_override(&base, sweep_config_key(key), raw)?,
            None => base.clone(),
        };
        reports.push((
            raw.clone(),
            run_experiment(&cfg, &schedulers, &seeds, &options),
        ));
    }

    let mut failed = 0usize;
    let mut total = 0usize;
    for (raw, report) in &reports {
        for cell in &report.cells {
            total += 1;
            if let Err(err) = &cell.result {
                failed += 1;
                eprintln!(
                    "cell scheduler={} seed={} sweep={}={}: {err}",
                    cell.scheduler,
                    cell.seed,
                    sweep.key_label(),
                    raw
                );
            }
        }
    }

    fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let summary = render_summary(&schedulers, sweep.key_label(), &reports, cli.seeds);
    let summary_path = cli.out.join("summary.csv");
    fs::write(&summary_path, summary).map_err(|source| CliError::Io {
        path: summary_path.clone(),
        source,
    })?;
    for &scheduler in &schedulers {
        for (raw, report) in &reports {
            let path = cli.out.join(format!("ecdf_{scheduler}_{raw}.csv"));
            fs::write(&path, render_ecdf(report, scheduler)).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
        }
    }

    if failed > 0 {
        return Err(CliError::FailedCells { failed, total });
    }
    Ok(())
}

fn fmt_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "nan".to_string(),
    }
}

fn render_summary(
    schedulers: &[SchedulerId],
    key_label: &str,
    reports: &[(String, ExperimentReport)],
    seeds: u64,
) -> String {
    let mut out =
        String::from("scheduler,sweep_key,sweep_value,seeds,mean_mear_bits,mean_fairness,violation_rate\n");
    for &scheduler in schedulers {
        for (raw, report) in reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                scheduler,
                key_label,
                raw,
                seeds,
                fmt_metric(report.mean_mear(scheduler)),
                fmt_metric(report.mean_fairness(scheduler)),
                fmt_metric(report.violation_rate(scheduler)),
            );
        }
    }
    out
}

fn render_ecdf(report: &ExperimentReport, scheduler: SchedulerId) -> String {
    let mut out = String::from("mear_bits,cum_prob\n");
    for (value, prob) in report.ecdf(scheduler) {
        let _ = writeln!(out, "{value},{prob}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grammar_is_strict() {
        let plain = parse_sweep(None).unwrap();
        assert_eq!(plain.key, None);
        assert_eq!(plain.raw_values, vec!["base"]);
        assert_eq!(plain.key_label(), "none");

        let s = parse_sweep(Some("arrival_std=1,5,10")).unwrap();
        assert_eq!(s.key.as_deref(), Some("arrival_std"));
        assert_eq!(s.raw_values, vec!["1", "5", "10"]);

        for bad in ["arrival_std", "=1,2", "a=", "a=1,,2"] {
            assert!(parse_sweep(Some(bad)).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn payload_alias_maps_to_bytes() {
        assert_eq!(sweep_config_key("payload"), "payload_bytes");
        assert_eq!(sweep_config_key("arrival_std"), "arrival_std");
    }

    #[test]
    fn summary_rows_follow_scheduler_then_sweep_order() {
        let cfg = SystemConfig {
            n_embb: 2,
            n_rb: 4,
            n_slots: 3,
            arrival_mean: 1.0,
            arrival_std: 1.0,
            payload_bytes: 16,
            cell_radius_m: 100.0,
            ..SystemConfig::default()
        }
        .validate()
        .unwrap();
        let seeds = [1, 2];
        let schedulers = [SchedulerId::Eds, SchedulerId::Ps];
        let options = SimOptions::default();
        let reports = vec![
            (
                "1".to_string(),
                run_experiment(&cfg, &schedulers, &seeds, &options),
            ),
            (
                "5".to_string(),
                run_experiment(&cfg, &schedulers, &seeds, &options),
            ),
        ];
        let summary = render_summary(&schedulers, "arrival_std", &reports, 2);
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(
            lines[0],
            "scheduler,sweep_key,sweep_value,seeds,mean_mear_bits,mean_fairness,violation_rate"
        );
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("eds,arrival_std,1,2,"));
        assert!(lines[2].starts_with("eds,arrival_std,5,2,"));
        assert!(lines[3].starts_with("ps,arrival_std,1,2,"));
        assert!(lines[4].starts_with("ps,arrival_std,5,2,"));

        let ecdf = render_ecdf(&reports[0].1, SchedulerId::Eds);
        let rows: Vec<&str> = ecdf.lines().collect();
        assert_eq!(rows[0], "mear_bits,cum_prob");
        assert_eq!(rows.len(), 3);
        assert!(rows[2].ends_with(",1"));
    }
}
