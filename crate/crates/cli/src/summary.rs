//! Text report over one or more aggregate CSVs.

use std::fmt::Write as _;
use std::path::Path;

use crate::batch::{read_aggregate, AggregateRow};
use crate::error::{CliError, Result};

/// Headline numbers of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub policy: String,
    pub agents: usize,
    pub comms: String,
    pub placement: String,
    pub runs: usize,
    pub final_recovery: f64,
    pub final_penalty: f64,
    /// First step at which mean recovery reaches one half.
    pub decisions_to_half: Option<usize>,
}

impl CellSummary {
    fn setting(&self) -> (usize, &str, &str) {
        (self.agents, &self.comms, &self.placement)
    }
}

/// Difference between two policies on the same setting (`first − second`).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDelta {
    pub first: String,
    pub second: String,
    pub agents: usize,
    pub comms: String,
    pub placement: String,
    pub recovery: f64,
    pub penalty: f64,
}

/// Groups rows into cells (in order of first appearance) and summarizes each.
/// Steps within a cell must run 1, 2, 3, ... without gaps or repeats.
pub fn summarize_rows(rows: &[AggregateRow]) -> Result<Vec<CellSummary>> {
    let mut cells: Vec<(CellSummary, usize)> = Vec::new();
    for row in rows {
        let pos = cells.iter().position(|(c, _)| {
            c.policy == row.policy && c.agents == row.agents && c.comms == row.comms && c.placement == row.placement
        });
        let (cell, last_step) = match pos {
            Some(i) => &mut cells[i],
            None => {
                cells.push((
                    CellSummary {
                        policy: row.policy.clone(),
                        agents: row.agents,
                        comms: row.comms.clone(),
                        placement: row.placement.clone(),
                        runs: row.runs,
                        final_recovery: 0.0,
                        final_penalty: 0.0,
                        decisions_to_half: None,
                    },
                    0,
                ));
                cells.last_mut().expect("just pushed")
            }
        };
        if row.step != *last_step + 1 {
            return Err(CliError::Runtime(format!(
                "cell {}/j{}/{}/{}: step {} follows step {}",
                row.policy, row.agents, row.comms, row.placement, row.step, last_step
            )));
        }
        *last_step = row.step;
        cell.final_recovery = row.mean_recovery;
        cell.final_penalty = row.mean_penalty;
        if cell.decisions_to_half.is_none() && row.mean_recovery >= 0.5 {
            cell.decisions_to_half = Some(row.step);
        }
    }
    Ok(cells.into_iter().map(|(c, _)| c).collect())
}

/// Every pair of policies evaluated on the same (agents, comms, placement).
pub fn policy_deltas(cells: &[CellSummary]) -> Vec<PolicyDelta> {
    let mut out = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if a.setting() == b.setting() && a.policy != b.policy {
                out.push(PolicyDelta {
                    first: a.policy.clone(),
                    second: b.policy.clone(),
                    agents: a.agents,
                    comms: a.comms.clone(),
                    placement: a.placement.clone(),
                    recovery: a.final_recovery - b.final_recovery,
                    penalty: a.final_penalty - b.final_penalty,
                });
            }
        }
    }
    out
}

pub fn render_report(cells: &[CellSummary], deltas: &[PolicyDelta]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:<12} {:<12} {:>5} {:>10} {:>12} {:>10}",
        "policy", "agents", "comms", "placement", "runs", "recovery", "penalty", "to_50%"
    );
    for c in cells {
        let half = c.decisions_to_half.map_or_else(|| "-".to_owned(), |d| d.to_string());
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:<12} {:<12} {:>5} {:>10.4} {:>12.3} {:>10}",
            c.policy, c.agents, c.comms, c.placement, c.runs, c.final_recovery, c.final_penalty, half
        );
    }
    if !deltas.is_empty() {
        let _ = writeln!(s, "\npairwise differences (first - second):");
        for d in deltas {
            let _ = writeln!(
                s,
                "  {} vs {} [j{} {} {}]: recovery {:+.4}, penalty {:+.3}",
                d.first, d.second, d.agents, d.comms, d.placement, d.recovery, d.penalty
            );
        }
    }
    s
}

/// Reads the aggregates and renders the report.
pub fn summarize<P: AsRef<Path>>(paths: &[P]) -> Result<String> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_aggregate(p.as_ref())?);
    }
    let cells = summarize_rows(&rows)?;
    Ok(render_report(&cells, &policy_deltas(&cells)))
}
