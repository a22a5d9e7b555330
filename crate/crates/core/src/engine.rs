//! The asynchronous multi-agent mission loop, target placement,
//! communication, recovery bookkeeping and metric curves.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{e_step, fit_posterior, m_step, visibility_mean, Dataset, EmOptions, Posterior};
use crate::error::{Error, Result};
use crate::planner::{plan_path, reachable_from, watcher_counts, DEFAULT_RISK_WEIGHT};
use crate::policy::{
    select_action_coverage, select_action_random, select_action_rsi, select_action_star, Candidate, CandidateSet,
    PolicyConfig, PolicyKind, Selection,
};
use crate::sensing::{simulate_observation, GroundTruth, Heading, NoiseModel, Observation, RobotSensor};
use crate::terrain::{average_visibility_map, CellIndex, ScalarField, TargetViews, TerrainGrid, DEFAULT_RANGE_MAX};

const STREAM_PLACEMENT: u64 = 1;
const STREAM_COMMS: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn decision_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    stream(seed, 100 + 2 * agent as u64)
}

fn sensing_stream(seed: u64, agent: usize) -> ChaCha8Rng {
    stream(seed, 101 + 2 * agent as u64)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How observations travel between agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CommsMode {
    /// Every observation reaches every other agent immediately.
    Full,
    /// Agents only ever see their own observations.
    None,
    /// Each (message, recipient) pair is lost independently with probability `p`.
    Drop(f64),
}

impl fmt::Display for CommsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommsMode::Full => f.write_str("full"),
            CommsMode::None => f.write_str("none"),
            CommsMode::Drop(p) => write!(f, "drop({p})"),
        }
    }
}

impl FromStr for CommsMode {
    type Err = Error;

    /// Accepts `full`, `none`, `drop(p)` and `drop:p`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Config(format!("unknown comms mode `{s}` (expected full, none or drop(p))"));
        match s.as_str() {
            "full" => Ok(CommsMode::Full),
            "none" => Ok(CommsMode::None),
            _ => {
                let p = s
                    .strip_prefix("drop(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| s.strip_prefix("drop:"))
                    .ok_or_else(bad)?;
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("drop probability must be in [0, 1], got {p}")));
                }
                Ok(CommsMode::Drop(p))
            }
        }
    }
}

impl TryFrom<String> for CommsMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CommsMode> for String {
    fn from(c: CommsMode) -> String {
        c.to_string()
    }
}

/// Target placement rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Uniform,
    /// Biased toward cells with low average visibility.
    Adversarial,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Uniform => "uniform",
            Placement::Adversarial => "adversarial",
        })
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Placement::Uniform),
            "adversarial" => Ok(Placement::Adversarial),
            other => Err(Error::Config(format!("unknown placement `{other}`"))),
        }
    }
}

/// Everything that defines one mission apart from the terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub agents: usize,
    pub targets: usize,
    pub placement: Placement,
    pub comms: CommsMode,
    pub policy: PolicyConfig,
    /// Maximum number of decisions across the whole team.
    pub budget: usize,
    pub seed: u64,
    /// Shared start cell; defaults to the first traversable cell.
    pub start: Option<CellIndex>,
    /// Noise constants; the cell size is taken from the terrain.
    pub noise: NoiseModel,
    /// Posterior mean at which a target counts as located.
    pub found_threshold: f64,
    pub risk_weight: f64,
    /// Prior variance every agent starts from in each cell.
    pub initial_gamma: f64,
    pub em: EmOptions,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            agents: 1,
            targets: 5,
            placement: Placement::Uniform,
            comms: CommsMode::Full,
            policy: PolicyConfig::default(),
            budget: 100,
            seed: 0,
            start: None,
            noise: NoiseModel::default(),
            found_threshold: 0.5,
            risk_weight: DEFAULT_RISK_WEIGHT,
            initial_gamma: 1.0,
            em: EmOptions::default(),
        }
    }
}

impl MissionConfig {
    /// Checks the invariants that do not depend on the terrain. A zero budget
    /// is allowed and yields an empty record.
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::Config("agent count must be >= 1".into()));
        }
        if self.targets == 0 {
            return Err(Error::Config("target count must be >= 1".into()));
        }
        if let CommsMode::Drop(p) = self.comms {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("drop probability must be in [0, 1], got {p}")));
            }
        }
        if !(self.risk_weight >= 0.0) || !self.risk_weight.is_finite() {
            return Err(Error::Config("risk weight must be finite and >= 0".into()));
        }
        if !(self.initial_gamma > 0.0) || !self.initial_gamma.is_finite() {
            return Err(Error::Config(format!("initial gamma must be finite and > 0, got {}", self.initial_gamma)));
        }
        if !self.found_threshold.is_finite() {
            return Err(Error::Config("found threshold must be finite".into()));
        }
        if !(self.noise.base_sigma > 0.0) || !(self.noise.distance_scale >= 0.0) {
            return Err(Error::Config("noise constants must be positive".into()));
        }
        if !(self.em.prior.a >= 0.0) || !(self.em.prior.b > 0.0) {
            return Err(Error::Config("prior needs a >= 0 and b > 0".into()));
        }
        self.policy.validate()
    }
}

// ---------------------------------------------------------------------------
// World: per-terrain precomputation shared by many missions
// ---------------------------------------------------------------------------

/// Terrain plus everything derived from it that missions reuse: target
/// viewsheds, the average-visibility field and the candidate action set.
#[derive(Debug, Clone)]
pub struct World {
    pub grid: TerrainGrid,
    pub views: TargetViews,
    pub average_visibility: ScalarField,
    pub candidates: CandidateSet,
}

impl World {
    pub fn new(grid: TerrainGrid) -> Result<Arc<World>> {
        Self::with_sensor(grid, &RobotSensor::default(), DEFAULT_RANGE_MAX)
    }

    pub fn with_sensor(grid: TerrainGrid, sensor: &RobotSensor, target_range: f64) -> Result<Arc<World>> {
        let views = TargetViews::build(&grid, target_range)?;
        let average_visibility = average_visibility_map(&grid, 0.0, target_range)?;
        let candidates = CandidateSet::build(&grid, sensor, 1)?;
        Ok(Arc::new(World {
            grid,
            views,
            average_visibility,
            candidates,
        }))
    }

    /// Ground truth for `targets`, reusing the precomputed viewsheds.
    pub fn ground_truth(&self, targets: Vec<CellIndex>) -> Result<GroundTruth> {
        GroundTruth::new(&self.grid, targets, DEFAULT_RANGE_MAX)
    }
}

// ---------------------------------------------------------------------------
// Target placement
// ---------------------------------------------------------------------------

/// Draws `k` distinct target cells.
///
/// Adversarial placement samples traversable cells whose average visibility
/// is below the median, weighted by `median - visibility`; when that set is
/// too small or has zero weight it falls back to uniform sampling over the
/// cells at or below the median.
pub fn place_targets<R: Rng + ?Sized>(
    grid: &TerrainGrid,
    average_visibility: &ScalarField,
    k: usize,
    mode: Placement,
    rng: &mut R,
) -> Result<Vec<CellIndex>> {
    let cells: Vec<CellIndex> = (0..grid.len()).filter(|&c| grid.is_traversable(c)).collect();
    let too_many = |n: usize| Error::Config(format!("cannot place {k} targets on {n} eligible cells"));
    match mode {
        Placement::Uniform => {
            if k > cells.len() {
                return Err(too_many(cells.len()));
            }
            Ok(cells.choose_multiple(rng, k).copied().collect())
        }
        Placement::Adversarial => {
            let vis = &average_visibility.values;
            let median = average_visibility
                .median_over(cells.iter().copied())
                .ok_or_else(|| too_many(0))?;
            let below: Vec<(CellIndex, f64)> = cells
                .iter()
                .filter(|&&c| vis[c] < median)
                .map(|&c| (c, median - vis[c]))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            if below.len() >= k {
                let picked = below
                    .choose_multiple_weighted(rng, k, |&(_, w)| w)
                    .map_err(|e| Error::Config(format!("weighted placement failed: {e}")))?;
                return Ok(picked.map(|&(c, _)| c).collect());
            }
            let fallback: Vec<CellIndex> = cells.iter().copied().filter(|&c| vis[c] <= median).collect();
            if k > fallback.len() {
                return Err(too_many(fallback.len()));
            }
            Ok(fallback.choose_multiple(rng, k).copied().collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// One decision of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    /// Global decision index, starting at 1.
    pub step: usize,
    pub agent_id: usize,
    pub goal_row: usize,
    pub goal_col: usize,
    pub heading: Heading,
    pub raw_reward: f64,
    pub raw_penalty: f64,
    pub targets_found: usize,
    pub cum_true_penalty: f64,
}

/// Column order of the per-run CSV.
pub const CSV_COLUMNS: [&str; 9] = [
    "step",
    "agent_id",
    "goal_row",
    "goal_col",
    "heading",
    "raw_reward",
    "raw_penalty",
    "targets_found",
    "cum_true_penalty",
];

/// End-of-run totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub recovery: f64,
    pub final_penalty: f64,
    pub decisions: usize,
}

/// Time-ordered decision log of a mission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub policy: PolicyKind,
    pub agents: usize,
    pub targets: Vec<CellIndex>,
    pub rows: Vec<DecisionRow>,
}

impl RunRecord {
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.rows.last();
        RunSummary {
            recovery: last.map_or(0.0, |r| r.targets_found as f64 / self.k() as f64),
            final_penalty: last.map_or(0.0, |r| r.cum_true_penalty),
            decisions: self.rows.len(),
        }
    }

    /// Rows as CSV with the [`CSV_COLUMNS`] header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows_csv(&self.rows, out)
    }

    /// One JSON object per line: a header line, then one line per decision.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            seed: u64,
            policy: PolicyKind,
            agents: usize,
            targets: &'a [CellIndex],
        }
        serde_json::to_writer(
            &mut out,
            &Header {
                seed: self.seed,
                policy: self.policy,
                agents: self.agents,
                targets: &self.targets,
            },
        )?;
        out.write_all(b"\n")?;
        for row in &self.rows {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<RunRecord> {
        #[derive(Deserialize)]
        struct Header {
            seed: u64,
            policy: PolicyKind,
            agents: usize,
            targets: Vec<CellIndex>,
        }
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Structure("empty run record".into()))??;
        let h: Header = serde_json::from_str(&first)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                rows.push(serde_json::from_str(&line)?);
            }
        }
        Ok(RunRecord {
            seed: h.seed,
            policy: h.policy,
            agents: h.agents,
            targets: h.targets,
            rows,
        })
    }
}

pub fn write_rows_csv<W: Write>(rows: &[DecisionRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses rows written by [`write_rows_csv`], rejecting any other header.
pub fn read_rows_csv<R: std::io::Read>(input: R) -> Result<Vec<DecisionRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::Structure(format!(
            "unexpected CSV header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Team recovery fraction and cumulative penalty, indexed by decision
/// (entry `t - 1` holds the value after decision `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurves {
    pub recovery: Vec<f64>,
    pub penalty: Vec<f64>,
}

impl MetricCurves {
    /// Extends both curves to `len` entries by holding the last value (a run
    /// that found everything early stays at its final values).
    pub fn padded(&self, len: usize) -> MetricCurves {
        let pad = |v: &[f64]| {
            let mut out: Vec<f64> = v.iter().copied().take(len).collect();
            let last = v.last().copied().unwrap_or(0.0);
            out.resize(len, last);
            out
        };
        MetricCurves {
            recovery: pad(&self.recovery),
            penalty: pad(&self.penalty),
        }
    }
}

pub fn metric_curves(record: &RunRecord, k: usize) -> MetricCurves {
    MetricCurves {
        recovery: record.rows.iter().map(|r| r.targets_found as f64 / k as f64).collect(),
        penalty: record.rows.iter().map(|r| r.cum_true_penalty).collect(),
    }
}

/// Cumulative penalty attributable to each agent, indexed like
/// [`MetricCurves`]. Summed over agents it equals the team curve.
pub fn agent_penalty_curves(record: &RunRecord) -> Vec<Vec<f64>> {
    let mut curves = vec![Vec::with_capacity(record.rows.len()); record.agents];
    let mut totals = vec![0.0; record.agents];
    let mut prev = 0.0;
    for row in &record.rows {
        totals[row.agent_id] += row.cum_true_penalty - prev;
        prev = row.cum_true_penalty;
        for (curve, total) in curves.iter_mut().zip(&totals) {
            curve.push(*total);
        }
    }
    curves
}

// ---------------------------------------------------------------------------
// Agents and communication
// ---------------------------------------------------------------------------

/// Private state of one searcher.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub cell: CellIndex,
    pub heading: Heading,
    pub dataset: Dataset,
    pub gamma: Vec<f64>,
    pub posterior: Posterior,
    /// How often the agent has stood on each cell.
    pub visits: Vec<u32>,
    /// Cells covered by any observation in the agent's dataset.
    pub sensed: Vec<bool>,
    pub outbox: Vec<Observation>,
    pub decisions: usize,
    decision_rng: ChaCha8Rng,
    sensing_rng: ChaCha8Rng,
}

impl AgentState {
    /// A fresh agent at `cell` with unit prior variances and the random
    /// streams belonging to `id` under `seed`.
    pub fn new(id: usize, cell: CellIndex, cells: usize, seed: u64) -> Self {
        let gamma = vec![1.0; cells];
        Self {
            id,
            cell,
            heading: Heading::N,
            dataset: Dataset::new(id),
            posterior: Posterior::from_prior(&gamma).expect("unit prior variances are valid"),
            gamma,
            visits: vec![0; cells],
            sensed: vec![false; cells],
            outbox: Vec::new(),
            decisions: 0,
            decision_rng: decision_stream(seed, id),
            sensing_rng: sensing_stream(seed, id),
        }
    }

    pub fn receive(&mut self, obs: Observation) {
        for c in obs.action.cells() {
            self.sensed[c] = true;
        }
        self.dataset.push(obs);
    }
}

/// Moves every outbox into the other agents' datasets according to `comms`.
/// Messages are processed sender by sender, message by message, recipient by
/// recipient, so a fixed RNG state gives a fixed delivery pattern.
pub fn deliver_messages<R: Rng + ?Sized>(agents: &mut [AgentState], comms: CommsMode, rng: &mut R) {
    for sender in 0..agents.len() {
        let outbox = std::mem::take(&mut agents[sender].outbox);
        if comms == CommsMode::None {
            continue;
        }
        for msg in outbox {
            for recipient in (0..agents.len()).filter(|&r| r != sender) {
                let delivered = match comms {
                    CommsMode::Full => true,
                    CommsMode::Drop(p) => rng.random::<f64>() >= p,
                    CommsMode::None => false,
                };
                if delivered {
                    agents[recipient].receive(msg.clone());
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Mission loop
// ---------------------------------------------------------------------------

/// A mission in progress; advance it one decision at a time with
/// [`Mission::step`] or run it out with [`Mission::run`].
#[derive(Debug, Clone)]
pub struct Mission {
    world: Arc<World>,
    cfg: MissionConfig,
    noise: NoiseModel,
    truth: GroundTruth,
    watchers: Vec<u32>,
    reachable: Vec<bool>,
    agents: Vec<AgentState>,
    queue: BinaryHeap<Reverse<(u64, usize)>>,
    comms_rng: ChaCha8Rng,
    found: Vec<bool>,
    cum_penalty: f64,
    record: RunRecord,
}

impl Mission {
    pub fn new(world: Arc<World>, cfg: MissionConfig) -> Result<Mission> {
        let ids: Vec<usize> = (0..cfg.agents).collect();
        Self::with_agent_ids(world, cfg, &ids)
    }

    /// A mission with only agent `id` (its random streams are those it has in
    /// a full team). With no communication its decisions match the full run.
    pub fn solo(world: Arc<World>, cfg: MissionConfig, id: usize) -> Result<Mission> {
        Self::with_agent_ids(world, cfg, &[id])
    }

    fn with_agent_ids(world: Arc<World>, cfg: MissionConfig, ids: &[usize]) -> Result<Mission> {
        cfg.validate()?;
        let grid = &world.grid;
        let start = match cfg.start {
            Some(s) => {
                if !grid.contains(s) || !grid.is_traversable(s) {
                    return Err(Error::Config(format!("start cell {s} is not a traversable cell")));
                }
                s
            }
            None => (0..grid.len())
                .find(|&c| grid.is_traversable(c))
                .ok_or_else(|| Error::Config("terrain has no traversable cells".into()))?,
        };
        let reachable = reachable_from(grid, start);
        if !world.candidates.candidates.iter().any(|c| reachable[c.goal]) {
            return Err(Error::Config("no candidate goal is reachable from the start cell".into()));
        }
        let targets = place_targets(
            grid,
            &world.average_visibility,
            cfg.targets,
            cfg.placement,
            &mut stream(cfg.seed, STREAM_PLACEMENT),
        )?;
        let truth = world.ground_truth(targets.clone())?;
        let watchers = watcher_counts(&truth, grid.len());
        let noise = NoiseModel {
            cell_size: grid.cell_size(),
            ..cfg.noise
        };
        let mut agents: Vec<AgentState> = ids
            .iter()
            .map(|&id| AgentState::new(id, start, grid.len(), cfg.seed))
            .collect();
        if cfg.initial_gamma != 1.0 {
            let gamma = vec![cfg.initial_gamma; grid.len()];
            let prior = Posterior::from_prior(&gamma)?;
            for a in &mut agents {
                a.gamma.clone_from(&gamma);
                a.posterior = prior.clone();
            }
        }
        let queue = (0..agents.len()).map(|slot| Reverse((0u64, slot))).collect();
        let record = RunRecord {
            seed: cfg.seed,
            policy: cfg.policy.kind,
            agents: ids.iter().max().map_or(0, |m| m + 1),
            targets,
            rows: Vec::new(),
        };
        Ok(Mission {
            found: vec![false; truth.k()],
            world,
            cfg,
            noise,
            truth,
            watchers,
            reachable,
            agents,
            queue,
            comms_rng: stream(cfg.seed, STREAM_COMMS),
            cum_penalty: 0.0,
            record,
        })
    }

    pub fn config(&self) -> &MissionConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Which targets (aligned with `truth().targets`) have been located.
    pub fn found(&self) -> &[bool] {
        &self.found
    }

    pub fn targets_found(&self) -> usize {
        self.found.iter().filter(|&&f| f).count()
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    pub fn is_done(&self) -> bool {
        self.record.rows.len() >= self.cfg.budget || self.targets_found() == self.found.len()
    }

    /// Runs until the budget is spent or every target is located.
    pub fn run(mut self) -> Result<RunRecord> {
        while self.step()?.is_some() {}
        Ok(self.record)
    }

    /// The risk field an agent plans against: believed threat weights pushed
    /// through the target viewsheds.
    pub fn believed_risk(&self, posterior: &Posterior) -> Result<ScalarField> {
        self.world.views.risk_landscape(&visibility_mean(posterior))
    }

    fn select(&self, agent: &mut AgentState, candidates: &[&Candidate], risk: Option<&ScalarField>) -> Result<Selection> {
        let kind = self.cfg.policy.kind;
        let rng = &mut agent.decision_rng;
        match kind {
            PolicyKind::Star | PolicyKind::Guts => {
                let risk = risk.expect("reward-driven policies compute a risk field");
                select_action_star(&agent.posterior, candidates, risk, &self.cfg.policy, &self.noise, rng)
            }
            PolicyKind::Rsi => select_action_rsi(&agent.posterior, candidates, &self.noise),
            PolicyKind::Coverage => select_action_coverage(&self.world.grid, &agent.sensed, agent.cell, candidates),
            PolicyKind::Random => select_action_random(candidates, rng),
        }
    }

    /// Lets the next free agent make one decision. Returns `None` once the
    /// mission is over.
    pub fn step(&mut self) -> Result<Option<DecisionRow>> {
        if self.is_done() {
            return Ok(None);
        }
        let Reverse((time, slot)) = self.queue.pop().expect("every agent is always queued");
        let world = Arc::clone(&self.world);
        let grid = &world.grid;
        let mut agent = self.agents[slot].clone();

        let fit = fit_posterior(&agent.dataset, &agent.gamma, &self.cfg.em)?;
        agent.gamma = fit.posterior.gamma.clone();
        agent.posterior = fit.posterior;

        let kind = self.cfg.policy.kind;
        let risk = match kind {
            PolicyKind::Star | PolicyKind::Guts => Some(self.believed_risk(&agent.posterior)?),
            _ => None,
        };
        let candidates = world.candidates.restricted(&self.reachable);
        let sel = self.select(&mut agent, &candidates, risk.as_ref())?;
        let chosen = candidates[sel.index];

        let planning_risk = match (&risk, kind.is_stealthy()) {
            (Some(r), true) => Some(r.normalized_to_unit_max()),
            _ => None,
        };
        let path = plan_path(grid, planning_risk.as_ref(), agent.cell, chosen.goal, self.cfg.risk_weight)?;
        let walked = if agent.decisions == 0 { &path.cells[..] } else { &path.cells[1..] };
        for &c in walked {
            agent.visits[c] += 1;
            self.cum_penalty += f64::from(self.watchers[c]);
        }
        agent.cell = chosen.goal;
        agent.heading = chosen.heading();

        let obs = simulate_observation(&self.truth, &chosen.action, &self.noise, &mut agent.sensing_rng);
        agent.receive(obs.clone());
        agent.outbox.push(obs);
        agent.decisions += 1;
        self.agents[slot] = agent;
        deliver_messages(&mut self.agents, self.cfg.comms, &mut self.comms_rng);

        let agent = &mut self.agents[slot];
        let post = e_step(&agent.dataset, &agent.gamma)?.with_prior(self.cfg.em.prior);
        agent.gamma = m_step(&post);
        for (found, &t) in self.found.iter_mut().zip(&self.truth.targets) {
            if post.mu[t] >= self.cfg.found_threshold {
                *found = true;
            }
        }
        agent.posterior = post;
        self.queue.push(Reverse((time + path.moves() as u64 + 1, slot)));

        let (goal_row, goal_col) = grid.coords(chosen.goal);
        let row = DecisionRow {
            step: self.record.rows.len() + 1,
            agent_id: agent.id,
            goal_row,
            goal_col,
            heading: chosen.heading(),
            raw_reward: sel.raw_reward,
            raw_penalty: sel.raw_penalty,
            targets_found: self.found.iter().filter(|&&f| f).count(),
            cum_true_penalty: self.cum_penalty,
        };
        self.record.rows.push(row.clone());
        Ok(Some(row))
    }
}

/// Runs one mission to completion.
pub fn run_mission(world: Arc<World>, cfg: MissionConfig) -> Result<RunRecord> {
    Mission::new(world, cfg)?.run()
}
