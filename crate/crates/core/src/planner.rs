//! Risk-aware grid path planning and path-based penalty accounting.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sensing::GroundTruth;
use crate::terrain::{CellIndex, ScalarField, TerrainGrid};

/// Risk multiplier used when none is configured.
pub const DEFAULT_RISK_WEIGHT: f64 = 5.0;

/// A 4-connected route from `cells[0]` (start) to the last cell (goal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    /// Sum of edge costs `1 + risk_weight * risk(destination)`.
    pub cost: f64,
}

impl Path {
    /// Number of moves (one less than the number of cells).
    pub fn moves(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn start(&self) -> CellIndex {
        self.cells[0]
    }

    pub fn goal(&self) -> CellIndex {
        *self.cells.last().expect("paths are never empty")
    }
}

/// Heap key: smallest `f`, then smallest `h` (deeper first), then lowest cell.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    h: f64,
    cell: CellIndex,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.h.total_cmp(&other.h))
            .then(self.cell.cmp(&other.cell))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn manhattan(grid: &TerrainGrid, a: CellIndex, b: CellIndex) -> f64 {
    let (ar, ac) = grid.coords(a);
    let (br, bc) = grid.coords(b);
    (ar.abs_diff(br) + ac.abs_diff(bc)) as f64
}

/// A* over traversable cells with edge cost `1 + risk_weight * risk(dest)`.
///
/// Pass `None` for `risk` to plan plain shortest paths.
pub fn plan_path(
    grid: &TerrainGrid,
    risk: Option<&ScalarField>,
    start: CellIndex,
    goal: CellIndex,
    risk_weight: f64,
) -> Result<Path> {
    grid.check_cell(start)?;
    grid.check_cell(goal)?;
    if !(risk_weight >= 0.0) || !risk_weight.is_finite() {
        return Err(domain(format!("risk weight must be finite and >= 0, got {risk_weight}")));
    }
    if let Some(r) = risk {
        if r.len() != grid.len() {
            return Err(domain("risk field does not match the grid"));
        }
        if r.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(domain("risk values must be finite and >= 0"));
        }
    }
    if !grid.is_traversable(start) || !grid.is_traversable(goal) {
        return Err(Error::Unreachable { start, goal });
    }
    let step_cost = |cell: CellIndex| 1.0 + risk.map_or(0.0, |r| risk_weight * r.values[cell]);

    let n = grid.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[start] = 0.0;
    let h0 = manhattan(grid, start, goal);
    open.push(Reverse(Frontier { f: h0, h: h0, cell: start }));

    while let Some(Reverse(Frontier { cell, .. })) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = parent[cur];
                cells.push(cur);
            }
            cells.reverse();
            return Ok(Path { cells, cost: g[goal] });
        }
        for next in grid.neighbors4(cell) {
            if closed[next] || !grid.is_traversable(next) {
                continue;
            }
            let cand = g[cell] + step_cost(next);
            if cand < g[next] {
                g[next] = cand;
                parent[next] = cell;
                let h = manhattan(grid, next, goal);
                open.push(Reverse(Frontier { f: cand + h, h, cell: next }));
            }
        }
    }
    Err(Error::Unreachable { start, goal })
}

/// Cells reachable from `start` through traversable cells.
pub fn reachable_from(grid: &TerrainGrid, start: CellIndex) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    if !grid.contains(start) || !grid.is_traversable(start) {
        return seen;
    }
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        for next in grid.neighbors4(cell) {
            if !seen[next] && grid.is_traversable(next) {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Adds one visit per occurrence of each cell in `cells`.
pub fn accumulate_visits(counts: &mut [u32], cells: &[CellIndex]) {
    for &c in cells {
        counts[c] += 1;
    }
}

/// Number of targets that see each cell.
pub fn watcher_counts(truth: &GroundTruth, cells: usize) -> Vec<u32> {
    let mut w = vec![0; cells];
    for view in &truth.views {
        for c in view.cells() {
            w[c] += 1;
        }
    }
    w
}

/// Ground-truth penalty: visits weighted by how many targets see each cell.
pub fn true_stealth_penalty(counts: &[u32], truth: &GroundTruth) -> f64 {
    watcher_counts(truth, counts.len())
        .iter()
        .zip(counts)
        .map(|(&w, &c)| f64::from(w) * f64::from(c))
        .sum()
}
