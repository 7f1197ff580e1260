//! CSV and metadata writers. Floats use Rust's shortest round-trip formatting,
//! so identical results always give identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use fusion_track_core::fogsim::{PositioningEvent, SessionResult};
use fusion_track_core::runner::{RequirementCheck, RunResult, SweepKey};
use fusion_track_core::scenario::ScenarioConfig;
use fusion_track_core::stats::ErrorReport;
use serde::Serialize;

use crate::AppError;

/// Percentiles reported in every summary, with their column names.
pub const SUMMARY_PERCENTILES: [(f64, &str); 4] = [
    (50.0, "p50"),
    (68.3, "p68.3"),
    (90.0, "p90"),
    (99.7, "p99.7"),
];

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, AppError> {
    let file = fs::File::create(path).map_err(|e| AppError::Output {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn format_path(path: &[fusion_track_core::fogsim::Node]) -> String {
    path.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(">")
}

/// One row per epoch per run.
pub fn write_epochs(path: &Path, runs: &[RunResult]) -> Result<(), AppError> {
    let mut w = writer(path)?;
    w.write_record([
        "isd_m", "n_bs", "mode", "seed", "epoch", "t_s", "truth_x", "truth_y", "est_x", "est_y",
        "error_m",
    ])?;
    for run in runs {
        let c = &run.config;
        for r in &run.per_epoch {
            w.write_record([
                c.isd_m.to_string(),
                c.n_fused_bs.to_string(),
                c.mode.as_str().to_string(),
                run.seed.to_string(),
                r.epoch.to_string(),
                r.t_s.to_string(),
                r.truth.x.to_string(),
                r.truth.y.to_string(),
                r.estimate.x.to_string(),
                r.estimate.y.to_string(),
                r.error_m.to_string(),
            ])?;
        }
    }
    flush(w, path)
}

fn summary_fields(report: &ErrorReport) -> Vec<String> {
    let mut out: Vec<String> = SUMMARY_PERCENTILES
        .iter()
        .map(|&(p, _)| report.percentile(p).to_string())
        .collect();
    out.push(report.mean().to_string());
    out.push(report.max().to_string());
    out.push(report.len().to_string());
    out
}

/// One row per sweep cell.
pub fn write_summary(path: &Path, cells: &[(SweepKey, ErrorReport)]) -> Result<(), AppError> {
    let mut w = writer(path)?;
    let mut header = vec!["isd_m", "n_bs", "mode"];
    header.extend(SUMMARY_PERCENTILES.iter().map(|&(_, name)| name));
    header.extend(["mean", "max", "n_samples"]);
    w.write_record(&header)?;
    for (key, report) in cells {
        let mut row = vec![
            key.isd_m.to_string(),
            key.n_bs.to_string(),
            key.mode.as_str().to_string(),
        ];
        row.extend(summary_fields(report));
        w.write_record(&row)?;
    }
    flush(w, path)
}

/// Requirement checks. With `key` columns when `cells` holds more than the
/// single configuration of a `run`.
pub fn write_requirements(
    path: &Path,
    checks: &[(SweepKey, Vec<RequirementCheck>)],
    with_key: bool,
) -> Result<(), AppError> {
    let mut w = writer(path)?;
    let mut header = Vec::new();
    if with_key {
        header.extend(["isd_m", "n_bs", "mode"]);
    }
    header.extend([
        "profile",
        "accuracy_m",
        "sigma_level",
        "achieved_m",
        "pass",
        "margin_m",
    ]);
    w.write_record(&header)?;
    for (key, list) in checks {
        for c in list {
            let mut row = Vec::new();
            if with_key {
                row.extend([
                    key.isd_m.to_string(),
                    key.n_bs.to_string(),
                    key.mode.as_str().to_string(),
                ]);
            }
            row.extend([
                c.profile.to_string(),
                c.accuracy_m.to_string(),
                c.sigma_level.label().to_string(),
                c.achieved_m.to_string(),
                c.pass.to_string(),
                c.margin_m.to_string(),
            ]);
            w.write_record(&row)?;
        }
    }
    flush(w, path)
}

pub fn write_events(path: &Path, events: &[PositioningEvent]) -> Result<(), AppError> {
    let mut w = writer(path)?;
    w.write_record([
        "t_ms",
        "kind",
        "path",
        "latency_ms",
        "fog_owner",
        "context_version",
    ])?;
    for e in events {
        w.write_record([
            e.t_ms.to_string(),
            e.kind.as_str().to_string(),
            format_path(&e.path),
            e.latency_ms.to_string(),
            e.fog_owner.map(|f| f.to_string()).unwrap_or_default(),
            e.context_version.to_string(),
        ])?;
    }
    flush(w, path)
}

/// Report latency per architecture.
pub fn write_latency_summary(path: &Path, sessions: &[SessionResult]) -> Result<(), AppError> {
    let mut w = writer(path)?;
    let mut header = vec!["architecture"];
    header.extend(SUMMARY_PERCENTILES.iter().map(|&(_, name)| name));
    header.extend(["mean", "max", "n_reports", "context_transfers"]);
    w.write_record(&header)?;
    for s in sessions {
        let mut row = vec![s.architecture.as_str().to_string()];
        let mut fields = summary_fields(&s.latency);
        fields.pop();
        row.extend(fields);
        row.push(s.reports.to_string());
        row.push(s.transfers.to_string());
        w.write_record(&row)?;
    }
    flush(w, path)
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), AppError> {
    w.flush().map_err(|e| AppError::Output {
        path: path.display().to_string(),
        source: e,
    })
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub command: &'a str,
    /// Leading epochs excluded from every percentile and summary figure.
    pub warmup_epochs_excluded: usize,
    pub seeds_per_cell: u64,
    pub seed_rule: &'static str,
    pub percentile_rule: &'static str,
    pub units: &'static str,
    pub radio: RadioMeta,
    pub scenario: crate::config::ScenarioFile,
}

#[derive(Debug, Serialize)]
pub struct RadioMeta {
    pub carrier_ghz: f64,
    pub tx_power_dbm: f64,
    pub bs_antennas: u32,
    pub ue_antennas: u32,
    pub note: &'static str,
}

impl<'a> Metadata<'a> {
    pub fn new(command: &'a str, config: &ScenarioConfig, seeds_per_cell: u64) -> Self {
        let r = config.radio;
        Self {
            command,
            warmup_epochs_excluded: config.warmup_epochs,
            seeds_per_cell,
            seed_rule: "run i of a cell uses seed base_seed XOR i",
            percentile_rule: "linear interpolation between order statistics, rank (n-1)p/100",
            units: "positions and errors in m, times in s, latencies in ms",
            radio: RadioMeta {
                carrier_ghz: r.carrier_ghz,
                tx_power_dbm: r.tx_power_dbm,
                bs_antennas: r.bs_antennas,
                ue_antennas: r.ue_antennas,
                note: "recorded only; noise magnitudes stand in for the link budget",
            },
            scenario: crate::config::to_file(config),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| AppError::Parse(e.to_string()))?;
        text.push('\n');
        fs::File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| AppError::Output {
                path: path.display().to_string(),
                source: e,
            })
    }
}
