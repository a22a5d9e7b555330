//! Action selection: the stealth-aware Thompson-sampling objective and the
//! baseline policies it is compared against.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{e_step, thompson_sample, Dataset, Posterior};
use crate::error::{domain, Error, Result};
use crate::sensing::{robot_sensing_action_with, Heading, NoiseModel, Observation, Pose, RobotSensor, SensingAction};
use crate::terrain::{CellIndex, ScalarField, TerrainGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Thompson-sampled reward traded off against believed visibility risk.
    Star,
    /// Reward only (the stealth term switched off).
    Guts,
    /// Greedy Gaussian information gain.
    Rsi,
    /// Most never-sensed cells in view.
    Coverage,
    /// Uniformly random candidate.
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Star,
        PolicyKind::Guts,
        PolicyKind::Rsi,
        PolicyKind::Coverage,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Star => "star",
            PolicyKind::Guts => "guts",
            PolicyKind::Rsi => "rsi",
            PolicyKind::Coverage => "coverage",
            PolicyKind::Random => "random",
        }
    }

    /// Whether the policy steers by the believed visibility risk.
    pub fn is_stealthy(self) -> bool {
        matches!(self, PolicyKind::Star)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Policy choice and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Weight of the normalized stealth penalty.
    pub tradeoff: f64,
    /// Weight of the top-entry mismatch indicator in the reward.
    pub lambda: f64,
    /// Entries above this count as non-zero in the mismatch indicator.
    pub match_threshold: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Star,
            tradeoff: 1.0,
            lambda: 0.01,
            match_threshold: 0.1,
        }
    }
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tradeoff >= 0.0) || !self.tradeoff.is_finite() {
            return Err(Error::Config(format!("policy gamma must be >= 0, got {}", self.tradeoff)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("policy lambda must be >= 0, got {}", self.lambda)));
        }
        if !self.match_threshold.is_finite() {
            return Err(Error::Config("policy epsilon must be finite".into()));
        }
        Ok(())
    }

    /// The stealth trade-off actually applied: GUTS runs with it switched off.
    pub fn effective_tradeoff(&self) -> f64 {
        match self.kind {
            PolicyKind::Guts => 0.0,
            _ => self.tradeoff,
        }
    }
}

/// A sensing action together with the goal cell the robot senses from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub action: SensingAction,
    pub goal: CellIndex,
}

impl Candidate {
    pub fn heading(&self) -> Heading {
        self.action.pose.heading
    }
}

/// All candidate goal poses for a terrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Every `stride`-th traversable cell (in row-major order) with all eight
    /// headings.
    pub fn build(grid: &TerrainGrid, sensor: &RobotSensor, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        let mut candidates = Vec::new();
        for cell in (0..grid.len()).filter(|&c| grid.is_traversable(c)).step_by(stride) {
            for heading in Heading::ALL {
                let action = robot_sensing_action_with(grid, Pose { cell, heading }, sensor)?;
                candidates.push(Candidate { action, goal: cell });
            }
        }
        if candidates.is_empty() {
            return Err(Error::Config("terrain has no traversable cells".into()));
        }
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn all(&self) -> Vec<&Candidate> {
        self.candidates.iter().collect()
    }

    /// Candidates whose goal is marked in `eligible`.
    pub fn restricted(&self, eligible: &[bool]) -> Vec<&Candidate> {
        self.candidates.iter().filter(|c| eligible[c.goal]).collect()
    }
}

/// The chosen candidate (index into the slice passed to the selector) and
/// its unnormalized scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub raw_reward: f64,
    pub raw_penalty: f64,
}

// ---------------------------------------------------------------------------
// Reward
// ---------------------------------------------------------------------------

/// Indices of the top `ceil(k / 2)` entries, where `k` counts entries above
/// `eps`. Ties in value go to the lower index.
pub fn top_half(values: &[f64], eps: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] > eps).collect();
    let keep = idx.len().div_ceil(2);
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(keep);
    idx
}

/// 0 when the top halves of the two vectors share an index, else 1.
pub fn mismatch_indicator(beta_sample: &[f64], beta_hat: &[f64], eps: f64) -> f64 {
    let a = top_half(beta_hat, eps);
    let b = top_half(beta_sample, eps);
    if a.iter().any(|i| b.contains(i)) {
        0.0
    } else {
        1.0
    }
}

/// `-||beta_sample - beta_hat||^2 - lambda * I(beta_sample, beta_hat)`.
pub fn reward(beta_sample: &[f64], beta_hat: &[f64], lambda: f64, eps: f64) -> Result<f64> {
    if beta_sample.len() != beta_hat.len() {
        return Err(domain("reward vectors differ in length"));
    }
    let residual: f64 = beta_sample.iter().zip(beta_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(-residual - lambda * mismatch_indicator(beta_sample, beta_hat, eps))
}

/// Expected estimate after a hypothetical noiseless measurement of
/// `candidate` that agrees with `beta_sample`: one E-step over the data plus
/// that measurement, at fixed `gamma`.
pub fn conditional_estimate(
    data: &Dataset,
    candidate: &SensingAction,
    beta_sample: &[f64],
    gamma: &[f64],
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    if beta_sample.len() != gamma.len() {
        return Err(domain("sample and prior variances differ in length"));
    }
    let hypothetical = Observation {
        action: candidate.clone(),
        y: candidate.cells().map(|c| beta_sample[c].clamp(0.0, 1.0)).collect(),
        noise_variance: candidate.noise_variances(noise),
    };
    let mut extended = data.clone();
    extended.push(hypothetical);
    Ok(e_step(&extended, gamma)?.mu)
}

/// Scores candidates against one posterior sample without refitting.
///
/// The belief is diagonal, so a hypothetical measurement only moves the cells
/// it views; rewards are computed from those deltas.
pub struct RewardScorer<'a> {
    posterior: &'a Posterior,
    sample: &'a [f64],
    lambda: f64,
    eps: f64,
    base_residual: f64,
    sample_top: Vec<bool>,
    scratch: Vec<f64>,
}

impl<'a> RewardScorer<'a> {
    pub fn new(posterior: &'a Posterior, sample: &'a [f64], lambda: f64, eps: f64) -> Self {
        let base_residual = sample
            .iter()
            .zip(&posterior.mu)
            .map(|(s, m)| (s - m) * (s - m))
            .sum();
        let mut sample_top = vec![false; sample.len()];
        for i in top_half(sample, eps) {
            sample_top[i] = true;
        }
        Self {
            posterior,
            sample,
            lambda,
            eps,
            base_residual,
            sample_top,
            scratch: posterior.mu.clone(),
        }
    }

    /// Updated mean at one viewed cell.
    fn updated_mean(&self, cell: CellIndex, variance: f64) -> f64 {
        let prior_prec = 1.0 / self.posterior.var_diag[cell];
        let w = 1.0 / variance;
        let y = self.sample[cell].clamp(0.0, 1.0);
        (self.posterior.mu[cell] * prior_prec + w * y) / (prior_prec + w)
    }

    pub fn reward(&mut self, action: &SensingAction, noise: &NoiseModel) -> f64 {
        let mut residual = self.base_residual;
        for row in &action.rows {
            let m = row.cell;
            let hat = self.updated_mean(m, noise.variance(row.distance_m, row.visibility));
            let s = self.sample[m];
            let old = self.posterior.mu[m];
            residual += (s - hat) * (s - hat) - (s - old) * (s - old);
            self.scratch[m] = hat;
        }
        let hits = top_half(&self.scratch, self.eps).iter().any(|&i| self.sample_top[i]);
        for row in &action.rows {
            self.scratch[row.cell] = self.posterior.mu[row.cell];
        }
        -residual.max(0.0) - if hits { 0.0 } else { self.lambda }
    }
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// Believed stealth penalty of standing at `goal`: the risk field value there.
pub fn stealth_penalty(goal: CellIndex, risk: &ScalarField) -> Result<f64> {
    risk.values
        .get(goal)
        .copied()
        .ok_or_else(|| domain(format!("goal cell {goal} outside the risk field")))
}

/// Rescales to `[0, 1]`; a constant vector maps to all zeros.
pub fn normalize_min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// `normalized reward - tradeoff * normalized penalty` per candidate.
pub fn combine_scores(rewards: &[f64], penalties: &[f64], tradeoff: f64) -> Vec<f64> {
    let nr = normalize_min_max(rewards);
    let np = normalize_min_max(penalties);
    nr.iter().zip(&np).map(|(r, p)| r - tradeoff * p).collect()
}

/// Index of the maximum, ties broken uniformly at random.
pub fn argmax_random_ties<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

fn check_nonempty(candidates: &[&Candidate]) -> Result<()> {
    if candidates.is_empty() {
        Err(domain("no candidates to select from"))
    } else {
        Ok(())
    }
}

/// Selection with a Thompson sample already drawn.
pub fn select_with_sample<R: Rng + ?Sized>(
    posterior: &Posterior,
    sample: &[f64],
    candidates: &[&Candidate],
    risk: &ScalarField,
    cfg: &PolicyConfig,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Selection> {
    check_nonempty(candidates)?;
    let mut scorer = RewardScorer::new(posterior, sample, cfg.lambda, cfg.match_threshold);
    let rewards: Vec<f64> = candidates.iter().map(|c| scorer.reward(&c.action, noise)).collect();
    let penalties = candidates
        .iter()
        .map(|c| stealth_penalty(c.goal, risk))
        .collect::<Result<Vec<_>>>()?;
    let scores = combine_scores(&rewards, &penalties, cfg.effective_tradeoff());
    let index = argmax_random_ties(&scores, rng);
    Ok(Selection {
        index,
        raw_reward: rewards[index],
        raw_penalty: penalties[index],
    })
}

/// Draws one posterior sample and maximizes
/// `normalized reward - tradeoff * normalized penalty` over the candidates.
pub fn select_action_star<R: Rng + ?Sized>(
    posterior: &Posterior,
    candidates: &[&Candidate],
    risk: &ScalarField,
    cfg: &PolicyConfig,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Selection> {
    let sample = thompson_sample(posterior, rng);
    select_with_sample(posterior, &sample, candidates, risk, cfg, noise, rng)
}

/// [`select_action_star`] with the stealth term switched off.
pub fn select_action_guts<R: Rng + ?Sized>(
    posterior: &Posterior,
    candidates: &[&Candidate],
    risk: &ScalarField,
    cfg: &PolicyConfig,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Selection> {
    let cfg = PolicyConfig { tradeoff: 0.0, ..*cfg };
    select_action_star(posterior, candidates, risk, &cfg, noise, rng)
}

/// Gaussian information gain `1/2 log det(I + W^1/2 X V X^T W^1/2)` of a
/// measurement. With distinct one-hot rows and diagonal `V` this is a sum over rows.
pub fn information_gain(posterior: &Posterior, action: &SensingAction, noise: &NoiseModel) -> f64 {
    action
        .rows
        .iter()
        .map(|row| {
            let w = 1.0 / noise.variance(row.distance_m, row.visibility);
            0.5 * (1.0 + w * posterior.var_diag[row.cell]).ln()
        })
        .sum()
}

/// Greedy information gain; ties go to the lowest goal index, then the
/// earliest candidate.
pub fn select_action_rsi(posterior: &Posterior, candidates: &[&Candidate], noise: &NoiseModel) -> Result<Selection> {
    check_nonempty(candidates)?;
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let g = information_gain(posterior, &c.action, noise);
        if g > best_gain || (g == best_gain && c.goal < candidates[best].goal) {
            best = i;
            best_gain = g;
        }
    }
    Ok(Selection {
        index: best,
        raw_reward: best_gain,
        raw_penalty: 0.0,
    })
}

/// Most never-sensed cells in view; ties go to the goal nearest the agent
/// (Manhattan), then the lowest goal index, then the earliest candidate.
pub fn select_action_coverage(
    grid: &TerrainGrid,
    sensed: &[bool],
    agent_cell: CellIndex,
    candidates: &[&Candidate],
) -> Result<Selection> {
    check_nonempty(candidates)?;
    let (ar, ac) = grid.coords(agent_cell);
    let key = |c: &Candidate| {
        let fresh = c.action.cells().filter(|&m| !sensed[m]).count();
        let (gr, gc) = grid.coords(c.goal);
        let dist = ar.abs_diff(gr) + ac.abs_diff(gc);
        (fresh, std::cmp::Reverse(dist), std::cmp::Reverse(c.goal))
    };
    let mut best = 0;
    let mut best_key = key(candidates[0]);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let k = key(c);
        if k > best_key {
            best = i;
            best_key = k;
        }
    }
    Ok(Selection {
        index: best,
        raw_reward: best_key.0 as f64,
        raw_penalty: 0.0,
    })
}

pub fn select_action_random<R: Rng + ?Sized>(candidates: &[&Candidate], rng: &mut R) -> Result<Selection> {
    check_nonempty(candidates)?;
    Ok(Selection {
        index: rng.random_range(0..candidates.len()),
        raw_reward: 0.0,
        raw_penalty: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::SparsityPrior;
    use crate::sensing::SensingRow;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn action(cells: &[usize], distance: f64) -> SensingAction {
        SensingAction {
            pose: Pose { cell: 0, heading: Heading::N },
            rows: cells
                .iter()
                .map(|&cell| SensingRow { cell, visibility: 1.0, distance_m: distance })
                .collect(),
        }
    }

    fn cand(cells: &[usize], goal: usize) -> Candidate {
        Candidate { action: action(cells, 60.0), goal }
    }

    fn posterior(mu: Vec<f64>, var: Vec<f64>) -> Posterior {
        Posterior { gamma: var.clone(), mu, var_diag: var, prior: SparsityPrior::default() }
    }

    #[test]
    fn top_half_and_indicator() {
        let hat = [0.0, 0.9, 0.0, 0.8, 0.0, 0.0, 0.0, 0.95, 0.2];
        // k = 4 above 0.1: top 2 are {7, 1}.
        assert_eq!(top_half(&hat, 0.1), vec![7, 1]);
        let mut a = vec![0.0; 10];
        a[3] = 0.9;
        a[7] = 0.8;
        let mut b = vec![0.0; 10];
        b[7] = 0.9;
        b[9] = 0.8;
        // k = 2 each: top 1 is {3} for `a` and {7} for `b`.
        assert_eq!(mismatch_indicator(&b, &a, 0.1), 1.0);
        a[3] = 0.7;
        assert_eq!(mismatch_indicator(&b, &a, 0.1), 0.0);
    }

    #[test]
    fn reward_examples() {
        let v = vec![0.0, 0.9, 0.0];
        assert_eq!(reward(&v, &v, 0.01, 0.1).unwrap(), 0.0);
        let mut hat = vec![0.0; 6];
        hat[1] = 0.5;
        let mut sample = vec![0.0; 6];
        sample[1] = 0.0;
        sample[5] = 0.5;
        // residual = 0.25 + 0.25
        let r = reward(&sample, &hat, 0.01, 0.1).unwrap();
        assert_abs_diff_eq!(r, -0.51, epsilon = 1e-15);
        assert!(reward(&[0.0], &[0.0, 1.0], 0.01, 0.1).is_err());
    }

    #[test]
    fn conditional_estimate_scalar_shrinkage() {
        let noise = NoiseModel::default();
        let a = action(&[1], 60.0);
        let sample = [0.0, 1.0, 0.3];
        let gamma = [1.0, 2.0, 1.0];
        let hat = conditional_estimate(&Dataset::new(0), &a, &sample, &gamma, &noise).unwrap();
        let s2 = noise.variance(60.0, 1.0);
        assert_abs_diff_eq!(hat[1], 2.0 / (2.0 + s2), epsilon = 1e-14);
        assert_eq!(hat[0], 0.0);
        assert_eq!(hat[2], 0.0);
    }

    #[test]
    fn fast_scorer_matches_reference() {
        let noise = NoiseModel::default();
        let mut data = Dataset::new(0);
        data.push(Observation {
            action: action(&[0, 2], 120.0),
            y: vec![0.2, 0.9],
            noise_variance: vec![0.05, 0.02],
        });
        let gamma = vec![1.5, 1.0, 2.0, 0.7, 1.1];
        let post = e_step(&data, &gamma).unwrap();
        let sample = vec![0.4, 1.3, -0.2, 0.8, 0.05];
        let mut scorer = RewardScorer::new(&post, &sample, 0.01, 0.1);
        for cells in [vec![1, 3], vec![0, 2, 4], vec![], vec![3]] {
            let a = action(&cells, 120.0);
            let hat = conditional_estimate(&data, &a, &sample, &gamma, &noise).unwrap();
            let expect = reward(&sample, &hat, 0.01, 0.1).unwrap();
            assert_abs_diff_eq!(scorer.reward(&a, &noise), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn penalty_dominated_choice() {
        let post = posterior(vec![0.0; 4], vec![1.0; 4]);
        let cands = [cand(&[], 0), cand(&[], 1)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        let risk = ScalarField { values: vec![0.2, 0.8, 0.0, 0.0], kind: crate::terrain::FieldKind::Risk };
        let cfg = PolicyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = select_action_star(&post, &refs, &risk, &cfg, &NoiseModel::default(), &mut rng).unwrap();
        assert_eq!(s.index, 0);
        assert_eq!(s.raw_penalty, 0.2);
    }

    #[test]
    fn guts_ignores_penalty_and_matches_zero_tradeoff() {
        let post = posterior(vec![0.0, 0.1, 0.5, 0.0], vec![1.0, 0.5, 0.2, 1.0]);
        let cands = [cand(&[0], 0), cand(&[1, 2], 1), cand(&[3], 2), cand(&[2, 3], 3)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        let noise = NoiseModel::default();
        let risk_a = ScalarField { values: vec![0.0, 5.0, 1.0, 9.0], kind: crate::terrain::FieldKind::Risk };
        let risk_b = ScalarField { values: vec![3.0, 0.0, 7.0, 0.0], kind: crate::terrain::FieldKind::Risk };
        let zero = PolicyConfig { tradeoff: 0.0, ..Default::default() };
        for seed in 0..20 {
            let g1 = select_action_guts(&post, &refs, &risk_a, &PolicyConfig::default(), &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let g2 = select_action_guts(&post, &refs, &risk_b, &PolicyConfig::default(), &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let s = select_action_star(&post, &refs, &risk_a, &zero, &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(g1.index, g2.index);
            assert_eq!(g1.index, s.index);
        }
    }

    #[test]
    fn normalization_degenerate() {
        assert_eq!(normalize_min_max(&[2.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(normalize_min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn rsi_prefers_uncertain_cells() {
        let post = posterior(vec![0.0; 3], vec![0.0, 2.0, 1.0]);
        let noise = NoiseModel::default();
        assert_eq!(information_gain(&post, &action(&[0], 60.0), &noise), 0.0);
        let cands = [cand(&[2], 4), cand(&[1], 5)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        assert_eq!(select_action_rsi(&post, &refs, &noise).unwrap().index, 1);
        // Equal gains: lowest goal wins.
        let cands = [cand(&[1], 5), cand(&[1], 4)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        assert_eq!(select_action_rsi(&post, &refs, &noise).unwrap().index, 1);
    }

    #[test]
    fn coverage_counts_fresh_cells_then_distance() {
        let grid = TerrainGrid::flat(4, 4, 60.0).unwrap();
        let mut sensed = vec![false; 16];
        let cands = [cand(&[1, 2], 15), cand(&[3, 4, 5], 14), cand(&[6], 0)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        assert_eq!(select_action_coverage(&grid, &sensed, 0, &refs).unwrap().index, 1);
        sensed.iter_mut().for_each(|s| *s = true);
        let s = select_action_coverage(&grid, &sensed, 0, &refs).unwrap();
        assert_eq!((s.index, s.raw_reward), (2, 0.0));
    }

    #[test]
    fn random_single_and_seeded() {
        let cands = [cand(&[1], 1)];
        let refs: Vec<&Candidate> = cands.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(select_action_random(&refs, &mut rng).unwrap().index, 0);
        assert!(select_action_random(&[], &mut rng).is_err());
    }

    #[test]
    fn policy_names_and_validation() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("nope".parse::<PolicyKind>().is_err());
        assert!(PolicyConfig { tradeoff: -1.0, ..Default::default() }.validate().is_err());
        assert!(PolicyConfig { lambda: -0.5, ..Default::default() }.validate().is_err());
    }
}
