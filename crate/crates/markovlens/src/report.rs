//! Result serialization: per-run CSVs (learning curves, link tables,
//! panels), run manifests for resumability, and per-environment summaries.
//! Everything here is byte-deterministic; wall-clock timestamps are
//! confined to the sweep metadata file.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvs::MvsReport;
use crate::pcmci::{AggregatedResult, TimeSeriesPanel};
use crate::ppo::CurvePoint;

/// State of one (environment, condition, seed) run, persisted as
/// manifest.json in the run directory. `complete` marks a finished run,
/// successful or not; incomplete manifests belong to interrupted runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub env: String,
    pub condition_id: String,
    pub seed: u64,
    pub complete: bool,
    pub error: Option<String>,
    /// Mean return over the last 10 completed training episodes.
    pub final_return: Option<f64>,
    pub mvs: Option<f64>,
    pub n_contributing_links: Option<usize>,
    pub episodes: usize,
    /// Per analysis panel: row indices at which an episode ended.
    pub panel_episode_ends: Vec<Vec<usize>>,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("manifest {}: {e}", path.display())))
}

pub fn write_curves_csv(
    path: &Path,
    curve: &[CurvePoint],
    seed: u64,
    condition_id: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestep", "episode_return", "seed", "condition_id"])?;
    for point in curve {
        w.write_record([
            point.timestep.to_string(),
            fmt(point.episode_return),
            seed.to_string(),
            condition_id.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a curves CSV back into points (seed and condition columns are
/// checked for consistency but not returned).
pub fn read_curves_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let timestep: usize = parse_field(&record, 0, path)?;
        let episode_return: f64 = parse_field(&record, 1, path)?;
        out.push(CurvePoint {
            timestep,
            episode_return,
        });
    }
    Ok(out)
}

/// One significant link, with the lag as a non-positive offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub child: String,
    pub parent: String,
    pub lag: i64,
    pub p_value: f64,
    pub partial_corr: f64,
}

/// Significant links of an aggregated result: one row per link with
/// p ≤ alpha, ordered by child then |partial_corr| descending.
pub fn significant_links(
    result: &AggregatedResult,
    var_names: &[String],
) -> Result<Vec<LinkRow>> {
    let (n_i, n_j, n_k) = result.val.dim();
    if var_names.len() != n_i || n_i != n_j {
        return Err(Error::Contract(format!(
            "links: {} names for a {n_i}×{n_j} link field",
            var_names.len()
        )));
    }
    struct Row {
        child: usize,
        parent: usize,
        lag: usize,
        p: f64,
        val: f64,
    }
    let mut rows = Vec::new();
    for j in 0..n_j {
        for i in 0..n_i {
            for k in 0..n_k {
                let p = result.p[[i, j, k]];
                if p <= result.alpha && !(i == j && k == 0) {
                    rows.push(Row {
                        child: j,
                        parent: i,
                        lag: k,
                        p,
                        val: result.val[[i, j, k]],
                    });
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        a.child
            .cmp(&b.child)
            .then(b.val.abs().partial_cmp(&a.val.abs()).unwrap())
            .then(a.parent.cmp(&b.parent))
            .then(a.lag.cmp(&b.lag))
    });
    Ok(rows
        .into_iter()
        .map(|row| LinkRow {
            child: var_names[row.child].clone(),
            parent: var_names[row.parent].clone(),
            lag: -(row.lag as i64),
            p_value: row.p,
            partial_corr: row.val,
        })
        .collect())
}

/// Writes the significant links with columns
/// (child, parent, lag, p_value, partial_corr).
pub fn write_links_csv(
    path: &Path,
    result: &AggregatedResult,
    var_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["child", "parent", "lag", "p_value", "partial_corr"])?;
    for row in significant_links(result, var_names)? {
        w.write_record([
            row.child,
            row.parent,
            row.lag.to_string(),
            fmt(row.p_value),
            fmt(row.partial_corr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Panel CSV: header of variable names, one row of reals per time step.
pub fn write_panel_csv(path: &Path, panel: &TimeSeriesPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&panel.var_names)?;
    for row in panel.data.rows() {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_csv(path: &Path) -> Result<TimeSeriesPanel> {
    let mut r = csv::Reader::from_path(path)?;
    let var_names: Vec<String> = r
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let n = var_names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for record in r.records() {
        let record = record?;
        if record.len() != n {
            return Err(Error::Config(format!(
                "panel {}: row {} has {} fields, header has {n}",
                path.display(),
                rows + 1,
                record.len()
            )));
        }
        for idx in 0..n {
            values.push(parse_field(&record, idx, path)?);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, n), values)
        .expect("row-major panel buffer matches its dimensions");
    TimeSeriesPanel::new(data, var_names)
}

/// One summary row per condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub condition_id: String,
    pub mean_return: f64,
    pub return_ci95: f64,
    pub mvs: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition_id", "mean_return", "return_ci95", "mvs"])?;
    for row in rows {
        w.write_record([
            row.condition_id.clone(),
            fmt(row.mean_return),
            fmt(row.return_ci95),
            fmt(row.mvs),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (condition, seed) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MvsRow {
    pub condition_id: String,
    pub seed_group: u64,
    pub mvs: f64,
    pub n_contributing_links: usize,
}

pub fn write_mvs_csv(path: &Path, rows: &[MvsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition_id", "seed_group", "mvs", "n_contributing_links"])?;
    for row in rows {
        w.write_record([
            row.condition_id.clone(),
            row.seed_group.to_string(),
            fmt(row.mvs),
            row.n_contributing_links.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mvs_row(condition_id: &str, seed: u64, report: &MvsReport) -> MvsRow {
    MvsRow {
        condition_id: condition_id.to_string(),
        seed_group: seed,
        mvs: report.score,
        n_contributing_links: report.contributions.len(),
    }
}

/// The only artifact allowed to carry wall-clock times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub started_unix: u64,
    pub finished_unix: u64,
    pub environments: Vec<String>,
    pub seed_count: usize,
    pub parallelism: usize,
    pub failed_runs: usize,
}

pub fn write_sweep_meta(path: &Path, meta: &SweepMeta) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    path: &Path,
) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| {
        Error::Config(format!("{}: missing field {idx}", path.display()))
    })?;
    raw.parse().map_err(|_| {
        Error::Config(format!(
            "{}: field {idx} ({raw:?}) failed to parse",
            path.display()
        ))
    })
}
