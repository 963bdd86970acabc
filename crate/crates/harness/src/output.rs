//! CSV result files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::ScenarioConfig;
use crate::runner::Experiment;

pub const SUMMARY_HEADER: [&str; 7] = [
    "filter",
    "scenario",
    "avg_total",
    "avg_loc",
    "avg_missed",
    "avg_false",
    "avg_step_seconds",
];
pub const PER_STEP_HEADER: [&str; 5] = ["step", "rms_total", "rms_loc", "rms_missed", "rms_false"];
pub const TRACKS_HEADER: [&str; 5] = ["step", "track_id", "px", "py", "existence"];

/// Write `summary.csv` with one row per experiment plus per-step and
/// per-run track files. With several experiments each gets its own
/// subdirectory named after the filter.
pub fn emit_outputs(cfg: &ScenarioConfig, experiments: &[Experiment], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut summary = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    summary.write_record(SUMMARY_HEADER)?;
    for e in experiments {
        let a = e.summary.average;
        summary.write_record([
            e.filter.name().to_string(),
            cfg.scenario.name().to_string(),
            a.total.to_string(),
            a.localisation.to_string(),
            a.missed.to_string(),
            a.false_targets.to_string(),
            e.mean_step_seconds.to_string(),
        ])?;
    }
    summary.flush()?;

    for e in experiments {
        let dir: PathBuf = if experiments.len() == 1 {
            out_dir.to_path_buf()
        } else {
            out_dir.join(e.filter.name())
        };
        fs::create_dir_all(&dir)?;
        let mut w = csv::Writer::from_path(dir.join("gospa_per_step.csv"))?;
        w.write_record(PER_STEP_HEADER)?;
        for (k, d) in e.summary.per_step.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                d.total.to_string(),
                d.localisation.to_string(),
                d.missed.to_string(),
                d.false_targets.to_string(),
            ])?;
        }
        w.flush()?;

        for run in &e.runs {
            let mut w = csv::Writer::from_path(dir.join(format!("tracks_run{}.csv", run.run)))?;
            w.write_record(TRACKS_HEADER)?;
            for (k, tracks) in run.tracks.iter().enumerate() {
                for t in tracks {
                    w.write_record([
                        (k + 1).to_string(),
                        t.id.to_string(),
                        t.position[0].to_string(),
                        t.position[1].to_string(),
                        t.existence.to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// One parsed row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub filter: String,
    pub scenario: String,
    pub values: [f64; 5],
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut values = [0.0; 5];
        for (v, field) in values.iter_mut().zip(rec.iter().skip(2)) {
            *v = field.parse()?;
        }
        rows.push(SummaryRow {
            filter: rec[0].to_string(),
            scenario: rec[1].to_string(),
            values,
        });
    }
    Ok(rows)
}

/// Per-step rows of `gospa_per_step.csv` as `[total, loc, missed, false]`.
pub fn read_per_step(path: &Path) -> Result<Vec<[f64; 4]>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(rec.iter().skip(1)) {
            *slot = field.parse()?;
        }
        rows.push(v);
    }
    Ok(rows)
}
