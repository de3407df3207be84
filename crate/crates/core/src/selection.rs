//! Alive components, the observed-data log-likelihood and the information
//! criteria used to choose the number of factors and the Σ parameterization.

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_sum_exp, LowRankCov};
use crate::model::{free_param_count, ChainState, Dataset, HyperParams, McmcTrace, ModelScore, SigmaMode};
use crate::rng::derive_seed;
use crate::tempering::{self, RunConfig};

/// Components with at least one allocated observation, with their weights
/// renormalized over the alive set.
#[derive(Debug, Clone, PartialEq)]
pub struct AliveSet {
    pub labels: Vec<usize>,
    pub rescaled_w: Vec<f64>,
}

/// Sorted labels `k` with `Σ_i I(z_i = k) > 0`.
pub fn alive_components(z: &[usize], k: usize) -> Vec<usize> {
    let mut seen = vec![false; k];
    for &zi in z {
        seen[zi] = true;
    }
    (0..k).filter(|&c| seen[c]).collect()
}

pub fn alive_set(state: &ChainState) -> AliveSet {
    let labels = alive_components(&state.z, state.k());
    let total: f64 = labels.iter().map(|&c| state.w[c]).sum();
    let rescaled_w = labels.iter().map(|&c| state.w[c] / total).collect();
    AliveSet { labels, rescaled_w }
}

/// `Σ_i log Σ_{k alive} w̃_k N(x_i; μ_k, Λ_kΛ_kᵀ + Σ_k)`.
pub fn observed_loglik(state: &ChainState, data: &Dataset) -> Result<f64> {
    let alive = alive_set(state);
    let covs = alive
        .labels
        .iter()
        .map(|&c| LowRankCov::new(&state.lambda[c], state.sigma.component(c)))
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = alive.rescaled_w.iter().map(|w| w.ln()).collect();
    let mut diff = vec![0.0; data.p()];
    let mut scratch = vec![0.0; state.q()];
    let mut terms = vec![0.0; covs.len()];
    let mut total = 0.0;
    for i in 0..data.n() {
        for (t, ((cov, &c), lw)) in terms.iter_mut().zip(covs.iter().zip(&alive.labels).zip(&log_w)) {
            *t = lw + cov.log_density(data.row(i), &state.mu[c], &mut diff, &mut scratch);
        }
        total += log_sum_exp(&terms);
    }
    Ok(total)
}

/// Empirical distribution of the alive count and its mode, ties broken
/// toward the smaller count.
pub fn alive_posterior(alive_count: &[usize]) -> (usize, BTreeMap<usize, f64>) {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &a in alive_count {
        *counts.entry(a).or_default() += 1;
    }
    let n = alive_count.len() as f64;
    // BTreeMap iterates in increasing k, so `>` keeps the smallest mode.
    let mut best = (0, 0);
    for (&k, &c) in &counts {
        if c > best.1 {
            best = (k, c);
        }
    }
    (best.0, counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
}

/// AIC, BIC, DIC and DIC₂ of a retained trace.
///
/// The criteria are evaluated on the draws whose alive count equals the
/// posterior mode `k̂`. `θ̂` is the draw of that sub-trace with the largest
/// observed log-likelihood, `D = −2 loglik` and `p_D = mean(D) − D(θ̂)`.
pub fn criteria(trace: &McmcTrace, data: &Dataset, hp: &HyperParams) -> Result<ModelScore> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace("no retained draws to score".into()));
    }
    let (k_hat, k_posterior) = alive_posterior(&trace.alive_count);
    let sub: Vec<usize> = (0..trace.len()).filter(|&t| trace.alive_count[t] == k_hat).collect();
    if sub.is_empty() {
        return Err(Error::EmptyTrace(format!("no draws with {k_hat} alive components")));
    }
    let theta_hat_index = sub
        .iter()
        .copied()
        .fold(sub[0], |best, t| if trace.loglik[t] > trace.loglik[best] { t } else { best });
    let d_hat = -2.0 * trace.loglik[theta_hat_index];
    let mean_d = sub.iter().map(|&t| -2.0 * trace.loglik[t]).sum::<f64>() / sub.len() as f64;
    let p_d = mean_d - d_hat;
    let d_free = free_param_count(k_hat, hp.q, data.p(), hp.sigma_mode);
    let d = d_free as f64;
    let mut warnings = Vec::new();
    if p_d < 0.0 {
        warnings.push(format!("negative effective dimension p_D = {p_d:.4}; the chain may not have converged"));
    }
    Ok(ModelScore {
        q: hp.q,
        sigma_mode: hp.sigma_mode,
        k_hat,
        k_posterior,
        aic: d_hat + 2.0 * d,
        bic: d_hat + d * (data.n() as f64).ln(),
        dic: d_hat + 2.0 * p_d,
        dic2: d_hat + 3.0 * p_d,
        p_d,
        d_free,
        theta_hat_index,
        swap_rate: trace.swap_rate(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
    Dic,
    Dic2,
}

impl Criterion {
    pub fn value(&self, score: &ModelScore) -> f64 {
        match self {
            Criterion::Aic => score.aic,
            Criterion::Bic => score.bic,
            Criterion::Dic => score.dic,
            Criterion::Dic2 => score.dic2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
            Criterion::Dic => "dic",
            Criterion::Dic2 => "dic2",
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            "dic" => Ok(Criterion::Dic),
            "dic2" => Ok(Criterion::Dic2),
            other => Err(Error::InvalidConfig(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Index of the score minimizing `criterion`; the first one wins ties.
pub fn best_by(scores: &[&ModelScore], criterion: Criterion) -> Option<usize> {
    (0..scores.len()).fold(None, |best, i| match best {
        Some(b) if criterion.value(scores[b]) <= criterion.value(scores[i]) => Some(b),
        _ => Some(i),
    })
}

/// Seed of the run at one grid point, so every `(q, Σ-mode)` combination
/// gets its own independent streams.
pub fn grid_seed(base: u64, q: usize, mode: SigmaMode) -> u64 {
    let tag = match mode {
        SigmaMode::PerComponent => 0,
        SigmaMode::Shared => 1,
    };
    derive_seed(base, &[q as u64, tag])
}

/// Outcome of one grid point. A failed run is recorded, not fatal.
#[derive(Debug)]
pub struct GridPoint {
    pub hp: HyperParams,
    pub outcome: std::result::Result<(ModelScore, McmcTrace), Error>,
}

impl GridPoint {
    pub fn score(&self) -> Option<&ModelScore> {
        self.outcome.as_ref().ok().map(|(s, _)| s)
    }

    pub fn trace(&self) -> Option<&McmcTrace> {
        self.outcome.as_ref().ok().map(|(_, t)| t)
    }
}

#[derive(Debug)]
pub struct Selection {
    pub points: Vec<GridPoint>,
    /// Index into `points` of the selected model.
    pub best: usize,
    pub criterion: Criterion,
}

impl Selection {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }

    pub fn best_score(&self) -> &ModelScore {
        self.points[self.best].score().expect("the selected grid point succeeded")
    }

    /// Index of the point selected by another criterion on the same runs.
    pub fn best_under(&self, criterion: Criterion) -> Option<usize> {
        let ok: Vec<usize> = (0..self.points.len()).filter(|&i| self.points[i].score().is_some()).collect();
        let scores: Vec<&ModelScore> = ok.iter().map(|&i| self.points[i].score().unwrap()).collect();
        best_by(&scores, criterion).map(|j| ok[j])
    }
}

/// Fits every `(q, Σ-mode)` combination by tempered MCMC and selects the one
/// minimizing `criterion`. Grid points run concurrently on the current
/// rayon pool.
pub fn select_model(
    data: &Dataset,
    q_grid: &[usize],
    sigma_modes: &[SigmaMode],
    hp_base: &HyperParams,
    config: &RunConfig,
    criterion: Criterion,
) -> Result<Selection> {
    if q_grid.is_empty() || sigma_modes.is_empty() {
        return Err(Error::InvalidConfig("the model grid is empty".into()));
    }
    let grid: Vec<HyperParams> = q_grid
        .iter()
        .flat_map(|&q| {
            sigma_modes.iter().map(move |&mode| HyperParams {
                q,
                sigma_mode: mode,
                seed: grid_seed(hp_base.seed, q, mode),
                ..hp_base.clone()
            })
        })
        .collect();
    let points: Vec<GridPoint> = grid
        .into_par_iter()
        .map(|hp| {
            let outcome = tempering::run(data, &hp, config)
                .and_then(|trace| criteria(&trace, data, &hp).map(|score| (score, trace)));
            GridPoint { hp, outcome }
        })
        .collect();
    let mut selection = Selection { points, best: 0, criterion };
    selection.best = match selection.best_under(criterion) {
        Some(b) => b,
        None => {
            let first = selection.points.iter().find_map(|p| p.outcome.as_ref().err());
            return Err(match first {
                Some(Error::NotPositiveDefinite { context }) => {
                    Error::NotPositiveDefinite { context: format!("every grid point failed; first: {context}") }
                }
                Some(e) => Error::InvalidConfig(format!("every grid point failed; first: {e}")),
                None => Error::InvalidConfig("no grid point was scored".into()),
            });
        }
    };
    Ok(selection)
}
