//! Browser bindings for the search simulator.
//!
//! The page in `www/` drives one [`Demo`]: it shows a terrain with its
//! average-visibility field and per-cell target views, plans risk-aware paths
//! around threats the user places, and steps a live mission. Structured
//! results cross the boundary as JSON strings; per-cell fields as typed arrays.

use std::sync::Arc;

use serde_json::json;
use star_core::belief::visibility_mean;
use star_core::planner::plan_path;
use star_core::terrain::{maps, TerrainGrid};
use star_core::{CommsMode, Mission, MissionConfig, Placement, PolicyConfig, PolicyKind, World};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    world: Arc<World>,
    mission: Option<Mission>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[wasm_bindgen]
impl Demo {
    /// `map` is `corridors` or `hills`; `seed` only affects hills.
    #[wasm_bindgen(constructor)]
    pub fn new(map: &str, size: usize, seed: u32) -> Result<Demo, String> {
        if !(4..=48).contains(&size) {
            return Err(format!("size must be between 4 and 48, got {size}"));
        }
        let grid: TerrainGrid = match map {
            "corridors" => maps::corridors(size, 60.0),
            "hills" => maps::hills(size, size, 60.0, seed as u64),
            other => return Err(format!("unknown map `{other}`")),
        }
        .map_err(err)?;
        Ok(Demo { world: World::new(grid).map_err(err)?, mission: None })
    }

    pub fn rows(&self) -> usize {
        self.world.grid.rows()
    }

    pub fn cols(&self) -> usize {
        self.world.grid.cols()
    }

    pub fn elevation(&self) -> Vec<f64> {
        self.world.grid.elevation().to_vec()
    }

    pub fn traversable(&self) -> Vec<u8> {
        self.world.grid.traversable().iter().map(|&t| t as u8).collect()
    }

    /// Mean fraction of cells within range that see each cell.
    pub fn average_visibility(&self) -> Vec<f64> {
        self.world.average_visibility.values.clone()
    }

    /// 1 on every cell a target standing at `cell` would see.
    pub fn target_view(&self, cell: usize) -> Result<Vec<u8>, String> {
        if !self.world.grid.contains(cell) {
            return Err(format!("cell {cell} is outside the grid"));
        }
        let mut out = vec![0u8; self.world.grid.len()];
        for &c in self.world.views.view(cell) {
            out[c] = 1;
        }
        Ok(out)
    }

    /// Risk from threats at `threats` (scaled to a maximum of 1) and the
    /// cheapest path from `start` to `goal` under it, alongside the plain
    /// shortest path. Returns `{risk, path, cost, shortest, exposure, shortest_exposure}`,
    /// where exposure is the summed risk along a path.
    pub fn plan(&self, threats: &[u32], start: usize, goal: usize, risk_weight: f64) -> Result<String, String> {
        let n = self.world.grid.len();
        let mut weights = vec![0.0; n];
        for &t in threats {
            *weights.get_mut(t as usize).ok_or_else(|| format!("threat cell {t} is outside the grid"))? = 1.0;
        }
        let risk = self.world.views.risk_landscape(&weights).map_err(err)?.normalized_to_unit_max();
        let grid = &self.world.grid;
        let aware = plan_path(grid, Some(&risk), start, goal, risk_weight).map_err(err)?;
        let plain = plan_path(grid, None, start, goal, 0.0).map_err(err)?;
        let exposure = |cells: &[usize]| cells.iter().map(|&c| risk.get(c)).sum::<f64>();
        Ok(json!({
            "risk": risk.values,
            "path": aware.cells,
            "cost": aware.cost,
            "exposure": exposure(&aware.cells),
            "shortest": plain.cells,
            "shortest_exposure": exposure(&plain.cells),
        })
        .to_string())
    }

    /// Starts a fresh mission; `comms` is `full`, `none` or `drop(p)`.
    #[allow(clippy::too_many_arguments)]
    pub fn start_mission(
        &mut self,
        policy: &str,
        agents: usize,
        targets: usize,
        placement: &str,
        comms: &str,
        budget: usize,
        seed: u32,
    ) -> Result<(), String> {
        let kind: PolicyKind = policy.parse().map_err(err)?;
        let cfg = MissionConfig {
            agents,
            targets,
            placement: placement.parse::<Placement>().map_err(err)?,
            comms: comms.parse::<CommsMode>().map_err(err)?,
            policy: PolicyConfig::new(kind),
            budget,
            seed: seed as u64,
            ..Default::default()
        };
        self.mission = Some(Mission::new(Arc::clone(&self.world), cfg).map_err(err)?);
        Ok(())
    }

    /// Advances the mission by one decision and returns its state as
    /// `{done, step, row, agents, targets, found, belief, penalty}`. `belief`
    /// is the acting agent's expected visibility-weighted target indicator.
    pub fn step_mission(&mut self) -> Result<String, String> {
        let mission = self.mission.as_mut().ok_or("no mission has been started")?;
        let row = mission.step().map_err(err)?;
        let acting = row.as_ref().map_or(0, |r| r.agent_id);
        let agents = mission.agents();
        let belief = agents
            .iter()
            .find(|a| a.id == acting)
            .map(|a| visibility_mean(&a.posterior))
            .unwrap_or_default();
        let state = json!({
            "done": mission.is_done(),
            "step": mission.record().rows.len(),
            "row": row,
            "agents": agents.iter().map(|a| json!({"id": a.id, "cell": a.cell})).collect::<Vec<_>>(),
            "targets": mission.truth().targets,
            "found": mission.found(),
            "belief": belief,
            "penalty": mission.record().rows.last().map_or(0.0, |r| r.cum_true_penalty),
        });
        Ok(state.to_string())
    }
}
