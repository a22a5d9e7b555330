//! Sparse Bayesian belief over target locations.
//!
//! Each cell carries a zero-mean Gaussian prior with its own variance
//! `gamma_m`, itself under an inverse-gamma hyperprior. The posterior is fitted
//! by expectation maximisation. Sensing rows are one-hot, so the information
//! matrix `X^T W X` is diagonal and the posterior covariance is exactly
//! diagonal; the E-step therefore reduces to per-cell precision sums.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sensing::Observation;

/// Observations available to one agent: its own and any it has received.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub owner: usize,
    pub records: Vec<Observation>,
}

impl Dataset {
    pub fn new(owner: usize) -> Self {
        Self {
            owner,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, obs: Observation) {
        self.records.push(obs);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total number of stacked rows.
    pub fn rows(&self) -> usize {
        self.records.iter().map(|r| r.y.len()).sum()
    }

    /// Per-cell `(sum of precisions, sum of precision * y)` over all rows.
    pub fn precision_sums(&self, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut prec = vec![0.0; cells];
        let mut prec_y = vec![0.0; cells];
        for rec in &self.records {
            accumulate(rec, &mut prec, &mut prec_y)?;
        }
        Ok((prec, prec_y))
    }

    /// Marks every cell that appears in at least one row.
    pub fn sensed_cells(&self, cells: usize) -> Vec<bool> {
        let mut out = vec![false; cells];
        for rec in &self.records {
            for c in rec.action.cells() {
                out[c] = true;
            }
        }
        out
    }
}

fn accumulate(rec: &Observation, prec: &mut [f64], prec_y: &mut [f64]) -> Result<()> {
    if rec.y.len() != rec.action.rows.len() || rec.noise_variance.len() != rec.y.len() {
        return Err(domain("observation rows, values and variances differ in length"));
    }
    for ((row, &y), &var) in rec.action.rows.iter().zip(&rec.y).zip(&rec.noise_variance) {
        if row.cell >= prec.len() {
            return Err(domain(format!("observation references cell {} outside the grid", row.cell)));
        }
        if !(var > 0.0) {
            return Err(domain(format!("noise variance must be positive, got {var}")));
        }
        prec[row.cell] += 1.0 / var;
        prec_y[row.cell] += y / var;
    }
    Ok(())
}

/// Inverse-gamma hyperparameters `(a, b)` shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityPrior {
    pub a: f64,
    pub b: f64,
}

impl Default for SparsityPrior {
    fn default() -> Self {
        Self { a: 0.1, b: 1.0 }
    }
}

/// Gaussian belief `N(mu, diag(var_diag))` and the prior variances it was
/// computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mu: Vec<f64>,
    pub var_diag: Vec<f64>,
    pub gamma: Vec<f64>,
    pub prior: SparsityPrior,
}

impl Posterior {
    /// The data-free belief `N(0, diag(gamma))`.
    pub fn from_prior(gamma: &[f64]) -> Result<Self> {
        if let Some(i) = gamma.iter().position(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(domain(format!("prior variance at cell {i} is {}, must be > 0", gamma[i])));
        }
        Ok(Self {
            mu: vec![0.0; gamma.len()],
            var_diag: gamma.to_vec(),
            gamma: gamma.to_vec(),
            prior: SparsityPrior::default(),
        })
    }

    pub fn with_prior(mut self, prior: SparsityPrior) -> Self {
        self.prior = prior;
        self
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Conditions this belief, used as the prior, on more observations.
    pub fn update<'a>(&self, records: impl IntoIterator<Item = &'a Observation>) -> Result<Posterior> {
        let m = self.len();
        let mut prec: Vec<f64> = self.var_diag.iter().map(|v| 1.0 / v).collect();
        let mut prec_y: Vec<f64> = self.mu.iter().zip(&prec).map(|(mu, p)| mu * p).collect();
        let mut extra = vec![0.0; m];
        let mut extra_y = vec![0.0; m];
        for rec in records {
            accumulate(rec, &mut extra, &mut extra_y)?;
        }
        for i in 0..m {
            prec[i] += extra[i];
            prec_y[i] += extra_y[i];
        }
        Ok(Posterior {
            var_diag: prec.iter().map(|p| 1.0 / p).collect(),
            mu: prec_y.iter().zip(&prec).map(|(py, p)| py / p).collect(),
            gamma: self.gamma.clone(),
            prior: self.prior,
        })
    }
}

/// E-step: `V = (Gamma^-1 + X^T W X)^-1`, `mu = V X^T W y`, with `W` the
/// inverse noise variances of the stacked rows.
pub fn e_step(data: &Dataset, gamma: &[f64]) -> Result<Posterior> {
    let prior = Posterior::from_prior(gamma)?;
    let (prec, prec_y) = data.precision_sums(gamma.len())?;
    let var_diag: Vec<f64> = gamma.iter().zip(&prec).map(|(g, p)| 1.0 / (1.0 / g + p)).collect();
    let mu = var_diag.iter().zip(&prec_y).map(|(v, py)| v * py).collect();
    Ok(Posterior {
        mu,
        var_diag,
        ..prior
    })
}

/// M-step: `gamma_m = (V_mm + mu_m^2 + 2 b) / (1 + 2 a)`.
pub fn m_step(posterior: &Posterior) -> Vec<f64> {
    let SparsityPrior { a, b } = posterior.prior;
    posterior
        .var_diag
        .iter()
        .zip(&posterior.mu)
        .map(|(v, mu)| (v + mu * mu + 2.0 * b) / (1.0 + 2.0 * a))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub prior: SparsityPrior,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 20,
            tol: 1e-4,
            prior: SparsityPrior::default(),
        }
    }
}

/// Result of [`fit_posterior`] with the number of EM rounds taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub posterior: Posterior,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates E and M steps until `gamma` moves less than `tol` (max-abs) or
/// `max_iter` rounds have run. The returned posterior is the E-step at the
/// returned `gamma`.
pub fn fit_posterior(data: &Dataset, init_gamma: &[f64], opts: &EmOptions) -> Result<Fit> {
    if opts.max_iter == 0 {
        return Err(domain("EM needs at least one iteration"));
    }
    if !(opts.tol > 0.0) {
        return Err(domain(format!("EM tolerance must be positive, got {}", opts.tol)));
    }
    let (prec, prec_y) = data.precision_sums(init_gamma.len())?;
    Posterior::from_prior(init_gamma)?;
    let mut gamma = init_gamma.to_vec();
    let (a, b) = (opts.prior.a, opts.prior.b);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for i in 0..gamma.len() {
            let v = 1.0 / (1.0 / gamma[i] + prec[i]);
            let mu = v * prec_y[i];
            let next = (v + mu * mu + 2.0 * b) / (1.0 + 2.0 * a);
            delta = delta.max((next - gamma[i]).abs());
            gamma[i] = next;
        }
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let posterior = e_step(data, &gamma)?.with_prior(opts.prior);
    Ok(Fit {
        posterior,
        iterations,
        converged,
    })
}

/// One draw `beta ~ N(mu, diag(var_diag))`.
pub fn thompson_sample<R: Rng + ?Sized>(posterior: &Posterior, rng: &mut R) -> Vec<f64> {
    posterior
        .mu
        .iter()
        .zip(&posterior.var_diag)
        .map(|(mu, v)| {
            let z: f64 = rng.sample(StandardNormal);
            mu + v.max(0.0).sqrt() * z
        })
        .collect()
}

/// `E|X|` for `X ~ N(mu, var)`.
pub fn folded_normal_mean(mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return mu.abs();
    }
    let sd = var.sqrt();
    sd * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * var)).exp()
        + mu * libm::erf(mu / (sd * std::f64::consts::SQRT_2))
}

/// `d E|X| / d mu`, which simplifies to `erf(mu / sqrt(2 var))`.
pub fn folded_normal_mean_dmu(mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return mu.signum();
    }
    libm::erf(mu / (var.sqrt() * std::f64::consts::SQRT_2))
}

/// Per-cell expected threat weight: the folded-normal mean of the belief.
pub fn visibility_mean(posterior: &Posterior) -> Vec<f64> {
    posterior
        .mu
        .iter()
        .zip(&posterior.var_diag)
        .map(|(&mu, &v)| folded_normal_mean(mu, v))
        .collect()
}
