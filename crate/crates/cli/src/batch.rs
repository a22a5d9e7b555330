//! Runs every (sweep cell, run index) mission and writes the CSV outputs.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use star_core::engine::metric_curves;
use star_core::{run_mission, RunRecord, World};

use crate::config::{ExperimentSpec, SweepCell};
use crate::error::{CliError, Result};

/// File name of the aggregate CSV inside the output directory.
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Column order of the aggregate CSV.
pub const AGGREGATE_COLUMNS: [&str; 8] =
    ["policy", "agents", "comms", "placement", "step", "mean_recovery", "mean_penalty", "runs"];

/// One line of the aggregate CSV: the mean curves of one sweep cell at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub agents: usize,
    pub comms: String,
    pub placement: String,
    pub step: usize,
    pub mean_recovery: f64,
    pub mean_penalty: f64,
    pub runs: usize,
}

/// What a batch wrote.
#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub run_files: Vec<PathBuf>,
    pub aggregate: PathBuf,
}

/// Name of the per-run CSV of `cell` and run index `run`.
pub fn run_file_name(cell: &SweepCell, run: usize) -> String {
    format!("{}_r{run:03}.csv", cell.label())
}

/// Mean recovery and penalty curves over `records`. Shorter runs (those that
/// found every target early) hold their final values.
pub fn aggregate_cell(cell: &SweepCell, records: &[RunRecord]) -> Vec<AggregateRow> {
    let len = records.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    let n = records.len() as f64;
    let mut recovery = vec![0.0; len];
    let mut penalty = vec![0.0; len];
    for rec in records {
        let curves = metric_curves(rec, rec.k()).padded(len);
        for s in 0..len {
            recovery[s] += curves.recovery[s];
            penalty[s] += curves.penalty[s];
        }
    }
    (0..len)
        .map(|s| AggregateRow {
            policy: cell.policy.to_string(),
            agents: cell.agents,
            comms: cell.comms.to_string(),
            placement: cell.placement.to_string(),
            step: s + 1,
            mean_recovery: recovery[s] / n,
            mean_penalty: penalty[s] / n,
            runs: records.len(),
        })
        .collect()
}

/// Executes the whole experiment. Missions run in parallel; files are written
/// once all of them have finished, so the output does not depend on scheduling.
pub fn run_batch(spec: &ExperimentSpec) -> Result<BatchOutput> {
    spec.validate()?;
    let grid = spec.terrain.load()?;
    let start = match spec.start {
        Some((r, c)) => {
            if r >= grid.rows() || c >= grid.cols() {
                return Err(CliError::Config(format!(
                    "agents.start_row/start_col ({r}, {c}) is outside the {}x{} terrain",
                    grid.rows(),
                    grid.cols()
                )));
            }
            Some(grid.index(r, c))
        }
        None => None,
    };
    let world = World::new(grid)?;

    let cells = spec.sweep.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.runs).map(move |r| (c, r))).collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cfg = star_core::MissionConfig { start, ..spec.mission(&cells[c], r) };
            run_mission(world.clone(), cfg)
        })
        .collect::<std::result::Result<_, _>>()?;

    fs::create_dir_all(&spec.out_dir)?;
    let mut run_files = Vec::with_capacity(jobs.len());
    for (&(c, r), rec) in jobs.iter().zip(&records) {
        let path = spec.out_dir.join(run_file_name(&cells[c], r));
        rec.write_csv(fs::File::create(&path)?)?;
        run_files.push(path);
    }

    let aggregate = spec.out_dir.join(AGGREGATE_FILE);
    let mut w = csv::Writer::from_path(&aggregate)?;
    for (c, cell) in cells.iter().enumerate() {
        let recs = &records[c * spec.runs..(c + 1) * spec.runs];
        for row in aggregate_cell(cell, recs) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(BatchOutput { run_files, aggregate })
}

/// Reads an aggregate CSV, insisting on the exact column layout.
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    if headers.iter().ne(AGGREGATE_COLUMNS) {
        return Err(CliError::Runtime(format!(
            "{}: schema mismatch: expected columns {}, found {}",
            path.display(),
            AGGREGATE_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<AggregateRow>, _>>()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
