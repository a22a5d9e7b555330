//! Experiment configuration: a strict TOML file with one table per concern.
//!
//! ```toml
//! [terrain]
//! map = "corridors"     # or: file = "dem.asc", format = "ascii" | "pgm16"
//! size = 16
//!
//! [agents]
//! count = 2
//!
//! [targets]
//! count = 5
//! placement = "adversarial"
//!
//! [policy]
//! name = "star"
//!
//! [run]
//! seed = 7
//! budget = 60
//! runs = 10
//!
//! [sweep]
//! policies = ["star", "guts", "rsi"]
//! agents = [1, 2, 4]
//! ```
//!
//! Every table except `terrain` is optional and every key has a default.
//! Unknown keys, type mismatches and repeated tables are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use star_core::belief::{EmOptions, SparsityPrior};
use star_core::sensing::NoiseModel;
use star_core::terrain::{load_dem, load_traversability, maps, DemFormat, TerrainGrid};
use star_core::{CommsMode, MissionConfig, Placement, PolicyConfig, PolicyKind};

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    terrain: RawTerrain,
    #[serde(default)]
    agents: RawAgents,
    #[serde(default)]
    targets: RawTargets,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerrain {
    map: Option<String>,
    file: Option<PathBuf>,
    format: Option<String>,
    /// Metres per PGM sample unit.
    scale: Option<f64>,
    traversability: Option<PathBuf>,
    cell_size: Option<f64>,
    size: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    seed: Option<u64>,
    eye_height: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAgents {
    count: usize,
    start_row: Option<usize>,
    start_col: Option<usize>,
}

impl Default for RawAgents {
    fn default() -> Self {
        Self { count: 1, start_row: None, start_col: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTargets {
    count: usize,
    placement: String,
    found_threshold: f64,
}

impl Default for RawTargets {
    fn default() -> Self {
        Self { count: 5, placement: "uniform".into(), found_threshold: 0.5 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPolicy {
    name: String,
    tradeoff: f64,
    lambda: f64,
    match_threshold: f64,
    risk_weight: f64,
    /// Initial prior variance.
    gamma: f64,
    a: f64,
    b: f64,
    em_max_iter: usize,
    em_tol: f64,
}

impl Default for RawPolicy {
    fn default() -> Self {
        let p = PolicyConfig::default();
        let m = MissionConfig::default();
        Self {
            name: p.kind.name().into(),
            tradeoff: p.tradeoff,
            lambda: p.lambda,
            match_threshold: p.match_threshold,
            risk_weight: m.risk_weight,
            gamma: m.initial_gamma,
            a: m.em.prior.a,
            b: m.em.prior.b,
            em_max_iter: m.em.max_iter,
            em_tol: m.em.tol,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNoise {
    base_sigma: f64,
    distance_scale: f64,
}

impl Default for RawNoise {
    fn default() -> Self {
        let n = NoiseModel::default();
        Self { base_sigma: n.base_sigma, distance_scale: n.distance_scale }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    seed: u64,
    budget: usize,
    runs: usize,
    comms: String,
    out: PathBuf,
}

impl Default for RawRun {
    fn default() -> Self {
        Self { seed: 0, budget: 100, runs: 10, comms: "full".into(), out: PathBuf::from("results") }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    policies: Option<Vec<String>>,
    agents: Option<Vec<usize>>,
    comms: Option<Vec<String>>,
    placements: Option<Vec<String>>,
}

/// Where the heightmap comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TerrainSource {
    Corridors { size: usize },
    Hills { rows: usize, cols: usize, seed: u64 },
    File { path: PathBuf, format: DemFormat, traversability: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainSpec {
    pub source: TerrainSource,
    /// Cell size in metres; for ASCII grids it must match the file header.
    pub cell_size: Option<f64>,
    pub eye_height: f64,
}

impl TerrainSpec {
    pub fn load(&self) -> Result<TerrainGrid> {
        let cell = self.cell_size.unwrap_or(60.0);
        let grid = match &self.source {
            TerrainSource::Corridors { size } => maps::corridors(*size, cell)?,
            TerrainSource::Hills { rows, cols, seed } => maps::hills(*rows, *cols, cell, *seed)?,
            TerrainSource::File { path, format, traversability } => {
                let open = |p: &Path| {
                    fs::File::open(p).map_err(|e| CliError::Config(format!("cannot open {}: {e}", p.display())))
                };
                let cell_size = match format {
                    DemFormat::AsciiGrid => self.cell_size,
                    DemFormat::Pgm16 { .. } => Some(cell),
                };
                let grid = load_dem(std::io::BufReader::new(open(path)?), *format, cell_size)
                    .map_err(|e| CliError::Config(format!("terrain.file {}: {e}", path.display())))?;
                match traversability {
                    Some(t) => {
                        let mask = load_traversability(std::io::BufReader::new(open(t)?), grid.rows(), grid.cols())
                            .map_err(|e| CliError::Config(format!("terrain.traversability {}: {e}", t.display())))?;
                        grid.with_traversable(mask)?
                    }
                    None => grid,
                }
            }
        };
        Ok(grid.with_eye_height(self.eye_height)?)
    }
}

/// The axes an experiment varies. Every combination is one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub policies: Vec<PolicyKind>,
    pub agents: Vec<usize>,
    pub comms: Vec<CommsMode>,
    pub placements: Vec<Placement>,
}

/// One combination of sweep axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub policy: PolicyKind,
    pub agents: usize,
    pub comms: CommsMode,
    pub placement: Placement,
}

impl SweepCell {
    /// A file-name friendly label such as `star_j2_drop0.5_adversarial`.
    pub fn label(&self) -> String {
        let comms: String = self.comms.to_string().chars().filter(|c| !matches!(c, '(' | ')')).collect();
        format!("{}_j{}_{}_{}", self.policy, self.agents, comms, self.placement)
    }
}

impl Sweep {
    /// Cells in policy-major order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &agents in &self.agents {
                for &comms in &self.comms {
                    for &placement in &self.placements {
                        out.push(SweepCell { policy, agents, comms, placement });
                    }
                }
            }
        }
        out
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub terrain: TerrainSpec,
    /// Mission settings shared by all cells; the swept fields are overwritten
    /// per cell and `seed` is the base seed.
    pub base: MissionConfig,
    /// Start position as (row, col); `None` means the first traversable cell.
    pub start: Option<(usize, usize)>,
    pub sweep: Sweep,
    pub runs: usize,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    /// Mission configuration for one run of one cell. Seeds depend only on
    /// the run index, so cells are compared on identical target layouts.
    pub fn mission(&self, cell: &SweepCell, run: usize) -> MissionConfig {
        MissionConfig {
            agents: cell.agents,
            comms: cell.comms,
            placement: cell.placement,
            policy: PolicyConfig { kind: cell.policy, ..self.base.policy },
            seed: self.base.seed.wrapping_add(run as u64),
            ..self.base
        }
    }

    /// Checks everything that can be checked without loading the terrain.
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(CliError::Config("run.runs must be >= 1".into()));
        }
        if self.base.budget == 0 {
            return Err(CliError::Config("run.budget must be >= 1".into()));
        }
        let axes = [
            ("sweep.policies", self.sweep.policies.is_empty()),
            ("sweep.agents", self.sweep.agents.is_empty()),
            ("sweep.comms", self.sweep.comms.is_empty()),
            ("sweep.placements", self.sweep.placements.is_empty()),
        ];
        if let Some((key, _)) = axes.iter().find(|(_, empty)| *empty) {
            return Err(CliError::Config(format!("{key} must not be empty")));
        }
        for cell in self.sweep.cells() {
            self.mission(&cell, 0).validate()?;
        }
        Ok(())
    }
}

/// Command-line values that replace configured ones.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub runs: Option<usize>,
    pub comms: Option<String>,
    pub placement: Option<String>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    /// A flag collapses the corresponding sweep axis to its single value.
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(seed) = self.seed {
            spec.base.seed = seed;
        }
        if let Some(p) = &self.policy {
            let kind = parse_key("--policy", p)?;
            spec.base.policy.kind = kind;
            spec.sweep.policies = vec![kind];
        }
        if let Some(r) = self.runs {
            spec.runs = r;
        }
        if let Some(c) = &self.comms {
            let mode = parse_key("--comms", c)?;
            spec.base.comms = mode;
            spec.sweep.comms = vec![mode];
        }
        if let Some(p) = &self.placement {
            let mode = parse_key("--placement", p)?;
            spec.base.placement = mode;
            spec.sweep.placements = vec![mode];
        }
        if let Some(o) = &self.out {
            spec.out_dir.clone_from(o);
        }
        spec.validate()
    }
}

fn parse_key<T: std::str::FromStr<Err = star_core::Error>>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|e: star_core::Error| CliError::Config(format!("{key}: {e}")))
}

fn parse_list<T: std::str::FromStr<Err = star_core::Error>>(key: &str, values: &[String]) -> Result<Vec<T>> {
    values.iter().map(|v| parse_key(key, v)).collect()
}

/// Reads and resolves a config file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Names the first table header that appears twice. The TOML parser rejects
/// these too, but only by pointing at the line.
fn duplicate_section(text: &str) -> Option<String> {
    let mut seen = std::collections::HashSet::new();
    text.lines()
        .filter_map(|l| {
            let l = l.trim();
            let name = l.strip_prefix('[')?.split(']').next()?.trim();
            (!l.starts_with("[[")).then(|| name.to_owned())
        })
        .find(|name| !seen.insert(name.clone()))
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentSpec> {
    if let Some(name) = duplicate_section(text) {
        return Err(CliError::Config(format!("duplicate section `[{name}]`")));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_owned()))?;

    let t = raw.terrain;
    let source = match (t.map.as_deref(), &t.file) {
        (Some(_), Some(_)) => return Err(CliError::Config("terrain: set either `map` or `file`, not both".into())),
        (None, None) => return Err(CliError::Config("terrain: missing key `map` or `file`".into())),
        (Some("corridors"), None) => TerrainSource::Corridors { size: t.size.unwrap_or(16) },
        (Some("hills"), None) => TerrainSource::Hills {
            rows: t.rows.or(t.size).unwrap_or(32),
            cols: t.cols.or(t.size).unwrap_or(32),
            seed: t.seed.unwrap_or(0),
        },
        (Some(other), None) => {
            return Err(CliError::Config(format!("terrain.map: unknown map `{other}` (expected corridors or hills)")))
        }
        (None, Some(file)) => {
            let format = match t.format.as_deref().unwrap_or("ascii") {
                "ascii" => DemFormat::AsciiGrid,
                "pgm16" => DemFormat::Pgm16 { scale: t.scale.unwrap_or(1.0) },
                other => {
                    return Err(CliError::Config(format!("terrain.format: unknown format `{other}` (expected ascii or pgm16)")))
                }
            };
            TerrainSource::File {
                path: base_dir.join(file),
                format,
                traversability: t.traversability.as_ref().map(|p| base_dir.join(p)),
            }
        }
    };
    if !matches!(source, TerrainSource::File { .. }) {
        let stray = [
            ("format", t.format.is_some()),
            ("scale", t.scale.is_some()),
            ("traversability", t.traversability.is_some()),
        ];
        if let Some((key, _)) = stray.iter().find(|(_, set)| *set) {
            return Err(CliError::Config(format!("terrain.{key} only applies to `file` terrain")));
        }
    }
    if let Some(cs) = t.cell_size {
        if !(cs > 0.0) || !cs.is_finite() {
            return Err(CliError::Config(format!("terrain.cell_size must be > 0, got {cs}")));
        }
    }
    let terrain = TerrainSpec {
        source,
        cell_size: t.cell_size,
        eye_height: t.eye_height.unwrap_or(star_core::terrain::DEFAULT_EYE_HEIGHT),
    };

    let p = raw.policy;
    if !(p.gamma > 0.0) || !p.gamma.is_finite() {
        return Err(CliError::Config(format!("policy.gamma must be > 0, got {}", p.gamma)));
    }
    if !(p.a >= 0.0) {
        return Err(CliError::Config(format!("policy.a must be >= 0, got {}", p.a)));
    }
    if !(p.b > 0.0) {
        return Err(CliError::Config(format!("policy.b must be > 0, got {}", p.b)));
    }
    if p.em_max_iter == 0 {
        return Err(CliError::Config("policy.em_max_iter must be >= 1".into()));
    }
    let kind: PolicyKind = parse_key("policy.name", &p.name)?;
    let policy = PolicyConfig { kind, tradeoff: p.tradeoff, lambda: p.lambda, match_threshold: p.match_threshold };
    policy.validate().map_err(|e| CliError::Config(format!("policy: {e}")))?;

    let placement: Placement = parse_key("targets.placement", &raw.targets.placement)?;
    let comms: CommsMode = parse_key("run.comms", &raw.run.comms)?;

    let start = match (raw.agents.start_row, raw.agents.start_col) {
        (Some(r), Some(c)) => Some((r, c)),
        (None, None) => None,
        _ => return Err(CliError::Config("agents: `start_row` and `start_col` must be given together".into())),
    };

    let base = MissionConfig {
        agents: raw.agents.count,
        targets: raw.targets.count,
        placement,
        comms,
        policy,
        budget: raw.run.budget,
        seed: raw.run.seed,
        start: None,
        noise: NoiseModel {
            base_sigma: raw.noise.base_sigma,
            distance_scale: raw.noise.distance_scale,
            cell_size: t.cell_size.unwrap_or(60.0),
        },
        found_threshold: raw.targets.found_threshold,
        risk_weight: p.risk_weight,
        initial_gamma: p.gamma,
        em: EmOptions { max_iter: p.em_max_iter, tol: p.em_tol, prior: SparsityPrior { a: p.a, b: p.b } },
    };

    let s = raw.sweep;
    let sweep = Sweep {
        policies: match &s.policies {
            Some(v) => parse_list("sweep.policies", v)?,
            None => vec![kind],
        },
        agents: s.agents.unwrap_or_else(|| vec![base.agents]),
        comms: match &s.comms {
            Some(v) => parse_list("sweep.comms", v)?,
            None => vec![comms],
        },
        placements: match &s.placements {
            Some(v) => parse_list("sweep.placements", v)?,
            None => vec![placement],
        },
    };

    let spec = ExperimentSpec {
        terrain,
        base,
        start,
        sweep,
        runs: raw.run.runs,
        out_dir: base_dir.join(raw.run.out),
    };
    spec.validate()?;
    Ok(spec)
}
