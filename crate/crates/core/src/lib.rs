//! Terrain-aware stealthy multi-agent active search.
//!
//! A team of ground robots looks for a sparse set of static targets on a
//! gridded elevation map. Each robot keeps a sparse Bayesian belief over
//! target locations, picks sensing poses by Thompson sampling traded off
//! against the risk of being seen by the targets it believes in, and drives
//! there along a risk-aware A* path.
//!
//! Modules, from the ground up:
//!
//! - [`terrain`]: elevation grids, line of sight, viewsheds, visibility and
//!   risk fields.
//! - [`sensing`]: robot and target sensing models and simulated measurements.
//! - [`belief`]: the sparse Bayesian posterior and its EM fit.
//! - [`policy`]: the stealth-aware objective and the baseline policies.
//! - [`planner`]: risk-aware path planning and penalty accounting.
//! - [`engine`]: the asynchronous multi-agent mission loop and run records.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod engine;
pub mod error;
pub mod planner;
pub mod policy;
pub mod sensing;
pub mod terrain;

pub use engine::{run_mission, CommsMode, Mission, MissionConfig, Placement, RunRecord, World};
pub use error::{Error, Result};
pub use policy::{PolicyConfig, PolicyKind};
pub use terrain::{CellIndex, TerrainGrid};
