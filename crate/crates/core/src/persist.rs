//! On-disk formats: trajectory directories, result tables (CSV and JSON),
//! and plot-data exports.
//!
//! Determinism contract: results.csv holds only run-deterministic columns,
//! so two runs with the same config and seed produce byte-identical files;
//! wall-clock runtime lives in results.json alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{ConservedSample, SimConfig, Trajectory};

/// Sidecar written next to the per-time snapshot files.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryMeta {
    config: SimConfig,
    times: Vec<f64>,
    conserved_log: Vec<ConservedSample>,
    warnings: Vec<String>,
}

fn snapshot_file_name(index: usize) -> String {
    format!("snap_{index:06}.imlb")
}

/// Write a trajectory as a directory: meta.json plus one binary snapshot per
/// saved time, named by snapshot index.
pub fn save_trajectory(traj: &Trajectory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = TrajectoryMeta {
        config: traj.config.clone(),
        times: traj.times.clone(),
        conserved_log: traj.conserved_log.clone(),
        warnings: traj.warnings.clone(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)?;
    fs::write(dir.join("meta.json"), meta_json)?;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        snap.write_snapshot(&dir.join(snapshot_file_name(i)))?;
    }
    Ok(())
}

/// Read back a trajectory directory written by `save_trajectory`.
pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let meta_path = dir.join("meta.json");
    let meta: TrajectoryMeta = serde_json::from_str(&fs::read_to_string(&meta_path).map_err(
        |e| Error::Config(format!("cannot read {}: {e}", meta_path.display())),
    )?)?;
    let mut snapshots = Vec::with_capacity(meta.times.len());
    for i in 0..meta.times.len() {
        snapshots.push(crate::field::SpectralField::read_snapshot(
            &dir.join(snapshot_file_name(i)),
        )?);
    }
    let mut traj = Trajectory::from_parts(meta.config, meta.times, snapshots)?;
    traj.conserved_log = meta.conserved_log;
    traj.warnings = meta.warnings;
    Ok(traj)
}

/// One emitted measurement. Rows are flat so a single CSV schema covers
/// every experiment; sweep rows carry their abscissa in `x` and an optional
/// series label for plot export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// "ok" or "failed"; failed rows carry the abort reason in `parameters`.
    pub status: String,
    /// Flattened key=value parameter pairs, sorted by key.
    pub parameters: std::collections::BTreeMap<String, String>,
    pub code_version: String,
    pub config_hash: String,
    /// Seconds since experiment start when the row was produced. Excluded
    /// from results.csv so that file stays byte-identical across reruns.
    pub runtime_s: f64,
}

impl ResultRow {
    pub fn is_failed(&self) -> bool {
        self.status == "failed"
    }
}

/// Total order used before writing tables: config hash first (aggregation
/// across parallel sub-runs is order-independent), then stable tiebreakers.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.config_hash, &a.experiment, &a.metric, &a.series)
            .cmp(&(&b.config_hash, &b.experiment, &b.metric, &b.series))
            .then(
                a.x.unwrap_or(f64::NEG_INFINITY)
                    .total_cmp(&b.x.unwrap_or(f64::NEG_INFINITY)),
            )
    });
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn flatten_params(row: &ResultRow) -> String {
    let mut out = String::new();
    for (i, (k, v)) in row.parameters.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        let _ = write!(out, "{k}={v}");
    }
    out
}

pub const RESULTS_CSV_HEADER: &str =
    "experiment,metric,x,value,slope,intercept,residual,series,status,parameters,code_version,config_hash";

/// Deterministic columns only; rows are sorted before writing.
pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for row in &sorted {
        let fields = [
            csv_escape(&row.experiment),
            csv_escape(&row.metric),
            fmt_opt(row.x),
            row.value.to_string(),
            fmt_opt(row.slope),
            fmt_opt(row.intercept),
            fmt_opt(row.residual),
            csv_escape(row.series.as_deref().unwrap_or("")),
            csv_escape(&row.status),
            csv_escape(&flatten_params(row)),
            csv_escape(&row.code_version),
            csv_escape(&row.config_hash),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Full rows including runtime_s.
pub fn write_results_json(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(&sorted)?)?;
    Ok(())
}

/// Plot intent for `emit_plotdata`: the file name records which kind of
/// figure the columns are meant for; the data is raw either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Loglog,
    Series,
}

impl PlotKind {
    fn suffix(self) -> &'static str {
        match self {
            PlotKind::Loglog => "loglog",
            PlotKind::Series => "series",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlotEmission {
    pub path: PathBuf,
    pub warnings: Vec<String>,
}

/// Write `<experiment>_<kind>.csv` with header `x,y,series_label` from the
/// rows that carry an abscissa. All rows must belong to one experiment; an
/// empty selection still writes the header and returns a warning.
pub fn emit_plotdata(rows: &[ResultRow], kind: PlotKind, out_dir: &Path) -> Result<PlotEmission> {
    let mut experiments: Vec<&str> = rows.iter().map(|r| r.experiment.as_str()).collect();
    experiments.sort_unstable();
    experiments.dedup();
    if experiments.len() > 1 {
        return Err(Error::param(
            "rows",
            format!("mismatched axes: rows mix experiments {}", experiments.join(", ")),
        ));
    }
    let name = experiments.first().copied().unwrap_or("plotdata");
    let mut warnings = Vec::new();
    let mut plot_rows: Vec<&ResultRow> = rows.iter().filter(|r| r.x.is_some()).collect();
    plot_rows.sort_by(|a, b| {
        (a.series.as_deref().unwrap_or(""), a.metric.as_str())
            .cmp(&(b.series.as_deref().unwrap_or(""), b.metric.as_str()))
            .then(a.x.unwrap().total_cmp(&b.x.unwrap()))
    });
    if plot_rows.is_empty() {
        warnings.push(format!(
            "empty selection for {name}_{}: wrote header only",
            kind.suffix()
        ));
    }
    let mut out = String::from("x,y,series_label\n");
    for row in &plot_rows {
        let label = row.series.clone().unwrap_or_else(|| row.metric.clone());
        let _ = writeln!(out, "{},{},{}", row.x.unwrap(), row.value, csv_escape(&label));
    }
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{name}_{}.csv", kind.suffix()));
    fs::write(&path, out)?;
    Ok(PlotEmission { path, warnings })
}

/// Parse a plot-data file back into (x, y, series_label) triples.
pub fn parse_plotdata(path: &Path) -> Result<Vec<(f64, f64, String)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("x,y,series_label") => {}
        other => {
            return Err(Error::SnapshotFormat(format!(
                "plot data header mismatch: {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let bad = || Error::SnapshotFormat(format!("plot data line {} malformed: {line}", i + 2));
        let x: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let y: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let label = parts.next().ok_or_else(bad)?;
        let label = label.strip_prefix('"').and_then(|s| s.strip_suffix('"'))
            .map(|s| s.replace("\"\"", "\""))
            .unwrap_or_else(|| label.to_string());
        out.push((x, y, label));
    }
    Ok(out)
}
