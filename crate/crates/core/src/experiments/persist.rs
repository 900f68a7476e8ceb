//! Result files.
//!
//! A run directory holds `config.json` (the resolved configuration),
//! `report.json`, `cost_history.csv`, `control.csv`, `field.csv` and
//! `switching.csv`. Output depends only on the inputs, so identical
//! configurations produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{format_vec, ExperimentConfig};
use super::studies::{GammaSweep, RunRecord, UniquenessReport, YieldLossTable};
use crate::dynamics::{StateEnsemble, TimeGrid};
use crate::error::{Error, Result};

/// Short content hash of a resolved configuration.
pub fn run_id(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("configuration serializes");
    Sha256::digest(&bytes)
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes a header and rows of already formatted cells.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn vec_row(t: f64, v: &[f64; 3]) -> Vec<String> {
    vec![num(t), num(v[0]), num(v[1]), num(v[2])]
}

/// Writes the full layout of one run into `dir`.
pub fn write_run(dir: &Path, run: &RunRecord) -> Result<()> {
    create_dir(dir)?;
    let report = &run.report;
    let grid = report.final_control.grid;
    write_json(&dir.join("config.json"), &run.config)?;
    write_json(&dir.join("report.json"), report)?;
    write_csv(
        &dir.join("cost_history.csv"),
        &["iteration", "cost", "control_change"],
        report
            .history
            .iter()
            .map(|r| vec![r.iteration.to_string(), num(r.cost), num(r.control_change)]),
    )?;
    write_csv(
        &dir.join("control.csv"),
        &["t", "u_x", "u_y", "u_z"],
        report
            .final_control
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| vec_row(grid.node(k), v)),
    )?;
    write_csv(
        &dir.join("field.csv"),
        &["t", "v_x", "v_y", "v_z"],
        report
            .final_field
            .nodes
            .iter()
            .enumerate()
            .map(|(k, v)| vec_row(grid.node(k), v)),
    )?;
    write_csv(
        &dir.join("switching.csv"),
        &["t", "phi_x", "phi_y", "phi_z"],
        report
            .final_switching
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| vec_row(grid.node(k), v)),
    )
}

/// `<root>/<run-id>/` for a run's configuration.
pub fn run_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(run_id(cfg))
}

/// Writes `sweep.csv`, `sweep.json` and every run under `dir`.
pub fn write_sweep(dir: &Path, base: &ExperimentConfig, sweep: &GammaSweep) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("config.json"), base)?;
    write_json(&dir.join("sweep.json"), sweep)?;
    write_csv(
        &dir.join("sweep.csv"),
        &["gamma", "J", "status", "iterations"],
        sweep.rows.iter().map(|r| {
            vec![
                r.gamma.map_or_else(|| "none".into(), num),
                num(r.cost),
                format!("{:?}", r.status),
                r.iterations.to_string(),
            ]
        }),
    )?;
    for run in &sweep.runs {
        write_run(&run_dir(dir, &run.config), run)?;
    }
    Ok(())
}

/// Writes `yield_loss.csv`, `yield_loss_summary.csv`, `yield_loss.json` and
/// every run under `dir`.
pub fn write_yield_loss(dir: &Path, base: &ExperimentConfig, table: &YieldLossTable) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("config.json"), base)?;
    write_json(&dir.join("yield_loss.json"), table)?;
    write_csv(
        &dir.join("yield_loss.csv"),
        &["p", "u0", "v0", "gamma", "J_filtered", "J_nofilter", "loss_percent", "status"],
        table.rows.iter().map(|r| {
            vec![
                r.p.to_string(),
                r.u0_label.clone(),
                format_vec(&r.v0),
                num(r.gamma),
                num(r.j_filtered),
                num(r.j_nofilter),
                num(r.loss_percent),
                format!("{:?}", r.status),
            ]
        }),
    )?;
    write_csv(
        &dir.join("yield_loss_summary.csv"),
        &["p", "u0", "min_loss_percent", "max_loss_percent"],
        table.summary.iter().map(|s| {
            vec![
                s.p.to_string(),
                s.u0_label.clone(),
                num(s.min_loss_percent),
                num(s.max_loss_percent),
            ]
        }),
    )?;
    for run in &table.runs {
        write_run(&run_dir(&dir.join("runs"), &run.config), run)?;
    }
    Ok(())
}

/// Writes `grid_study.json`, `grid_runs.csv` and each distinct final
/// control as `controls/<class>.csv`.
pub fn write_grid_study(dir: &Path, base: &ExperimentConfig, study: &UniquenessReport) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("config.json"), base)?;
    write_json(&dir.join("grid_study.json"), study)?;
    write_csv(
        &dir.join("grid_runs.csv"),
        &["family", "i", "j", "k", "u0", "status", "iterations", "J", "cycle_period", "cycle_gap", "control_class"],
        study.runs.iter().map(|r| {
            vec![
                r.family.to_string(),
                r.index[0].to_string(),
                r.index[1].to_string(),
                r.index[2].to_string(),
                format_vec(&r.u0),
                format!("{:?}", r.status),
                r.iterations.to_string(),
                num(r.cost),
                r.cycle_period.map_or_else(String::new, |p| p.to_string()),
                opt_num(r.cycle_gap),
                r.control_class.to_string(),
            ]
        }),
    )?;
    let controls = dir.join("controls");
    create_dir(&controls)?;
    for (c, u) in study.controls.iter().enumerate() {
        write_csv(
            &controls.join(format!("{c}.csv")),
            &["t", "u_x", "u_y", "u_z"],
            u.values.iter().enumerate().map(|(k, v)| vec_row(u.grid.node(k), v)),
        )?;
    }
    Ok(())
}

/// Squared norm of every state at every node: columns `t`, then one per
/// state.
pub fn write_norms(path: &Path, ensemble: &StateEnsemble, grid: &TimeGrid) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..ensemble.count()).map(|l| format!("norm_sq_{l}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        (0..ensemble.nodes()).map(|k| {
            std::iter::once(num(grid.node(k)))
                .chain(ensemble.trajectories.iter().map(|t| num(t[k].norm_sqr())))
                .collect::<Vec<_>>()
        }),
    )
}

/// Full state dump: one row per (node, state) with real and imaginary parts
/// of every component.
pub fn write_states(path: &Path, ensemble: &StateEnsemble, grid: &TimeGrid) -> Result<()> {
    let dim = ensemble
        .trajectories
        .first()
        .and_then(|t| t.first())
        .map_or(0, |s| s.as_slice().len());
    let mut header = vec!["t".to_string(), "l".to_string()];
    for j in 0..dim {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..ensemble.nodes()).flat_map(|k| {
        ensemble.trajectories.iter().enumerate().map(move |(l, t)| {
            let mut row = vec![num(grid.node(k)), l.to_string()];
            for z in t[k].as_slice() {
                row.push(num(z.re));
                row.push(num(z.im));
            }
            row
        })
    });
    write_csv(path, &header, rows)
}
