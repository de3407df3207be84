//! Prior parallel tempering over the Dirichlet concentration.
//!
//! All chains share the likelihood and differ only in the concentration of
//! the Dirichlet prior on `w`. Chain 0 targets the posterior of interest;
//! chain `j` uses `γ + δj`. Chains advance independently between
//! synchronization points and one adjacent pair proposes an exchange of
//! states at each of them.
//!
//! Randomness: chain slot `j` owns stream `j + 1` of the run seed and the
//! swap coordinator owns stream 0. Streams stay attached to ladder slots,
//! not to states, so a run is reproducible for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, Dataset, HyperParams, McmcTrace};
use crate::rng::{stream, ChainRng};
use crate::sampler::{gibbs_sweep, init_from_prior};
use crate::selection::observed_loglik;

/// Dirichlet concentrations of every chain, for the main run and for the
/// overdispersed warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub gammas: Vec<f64>,
    pub warm_gammas: Vec<f64>,
}

impl Ladder {
    /// `gammas[j] = γ + δj`; `warm_gammas[j] = d/2 + j·d/(2(J−1))`.
    pub fn new(gamma: f64, delta: f64, chains: usize, d: usize) -> Self {
        let half = d as f64 / 2.0;
        let gammas = (0..chains).map(|j| gamma + delta * j as f64).collect();
        let warm_gammas = if chains == 1 {
            vec![half]
        } else {
            (0..chains).map(|j| half + j as f64 * half / (chains - 1) as f64).collect()
        };
        Self { gammas, warm_gammas }
    }

    pub fn from_hyperparams(hp: &HyperParams) -> Self {
        Self::new(hp.gamma, hp.delta, hp.chains, hp.emission_dim())
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub iterations: usize,
    pub burnin: usize,
    pub thin: usize,
    pub swap_every: usize,
    pub warm_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { iterations: 20_000, burnin: 5_000, thin: 10, swap_every: 10, warm_iterations: 100 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.burnin >= self.iterations {
            return bad("burn-in must be shorter than the run");
        }
        if self.thin < 1 {
            return bad("thinning interval must be at least 1");
        }
        if self.swap_every < 1 {
            return bad("swap interval must be at least 1");
        }
        Ok(())
    }

    /// Number of draws the run retains.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burnin) / self.thin
    }

    fn is_retained(&self, t: usize) -> bool {
        t > self.burnin && (t - self.burnin) % self.thin == 0
    }
}

/// `log A = Σ_k ((γ_i − γ_j)/K)(log w_jk − log w_ik)` for exchanging the
/// states of chains `i` and `j`.
pub fn swap_log_ratio(w_i: &[f64], w_j: &[f64], gamma_i: f64, gamma_j: f64) -> f64 {
    let k = w_i.len() as f64;
    let c = (gamma_i - gamma_j) / k;
    w_i.iter().zip(w_j).map(|(a, b)| c * (b.ln() - a.ln())).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapOutcome {
    /// Lower slot of the proposed pair; the partner is `pair + 1`.
    pub pair: usize,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Proposes exchanging the states of a uniformly chosen adjacent pair.
pub fn attempt_swap<R: Rng + ?Sized>(states: &mut [ChainState], gammas: &[f64], rng: &mut R) -> SwapOutcome {
    assert!(states.len() >= 2, "swaps need at least two chains");
    let outcome = propose(states.len(), |j| &states[j].w, gammas, rng);
    if outcome.accepted {
        states.swap(outcome.pair, outcome.pair + 1);
    }
    outcome
}

fn propose<'a, R: Rng + ?Sized>(
    chains: usize,
    w: impl Fn(usize) -> &'a [f64],
    gammas: &[f64],
    rng: &mut R,
) -> SwapOutcome {
    let j = rng.random_range(0..chains - 1);
    let log_ratio = swap_log_ratio(w(j), w(j + 1), gammas[j], gammas[j + 1]);
    let u: f64 = rng.random();
    SwapOutcome { pair: j, accepted: log_ratio >= 0.0 || u.ln() < log_ratio, log_ratio }
}

struct Slot {
    state: ChainState,
    rng: ChainRng,
}

fn fail_in_chain(j: usize, e: Error) -> Error {
    match e {
        Error::NotPositiveDefinite { context } => {
            Error::NotPositiveDefinite { context: format!("chain {j}: {context}") }
        }
        other => other,
    }
}

/// Runs `sweeps` sweeps on every slot, in parallel across slots. Slot 0
/// calls `record` after each sweep with the 1-based iteration counter.
fn advance<F: FnMut(usize, &ChainState) -> Result<()> + Send>(
    slots: &mut [Slot],
    gammas: &[f64],
    data: &Dataset,
    hp: &HyperParams,
    start: usize,
    sweeps: usize,
    record: &mut F,
) -> Result<()> {
    let (first, rest) = slots.split_first_mut().expect("at least one chain");
    let run_first = || -> Result<()> {
        for s in 0..sweeps {
            gibbs_sweep(&mut first.state, data, hp, gammas[0], &mut first.rng).map_err(|e| fail_in_chain(0, e))?;
            record(start + s + 1, &first.state)?;
        }
        Ok(())
    };
    let run_rest = || -> Result<()> {
        rest.par_iter_mut().enumerate().try_for_each(|(idx, slot)| {
            let j = idx + 1;
            for _ in 0..sweeps {
                gibbs_sweep(&mut slot.state, data, hp, gammas[j], &mut slot.rng).map_err(|e| fail_in_chain(j, e))?;
            }
            Ok(())
        })
    };
    let (a, b) = rayon::join(run_first, run_rest);
    a.and(b)
}

/// Swaps exchange whole states between slots; the RNG streams stay put.
fn swap_slots<R: Rng + ?Sized>(slots: &mut [Slot], gammas: &[f64], rng: &mut R) -> SwapOutcome {
    let outcome = {
        let view: &[Slot] = slots;
        propose(view.len(), |j| &view[j].state.w, gammas, rng)
    };
    if outcome.accepted {
        let (lo, hi) = slots.split_at_mut(outcome.pair + 1);
        std::mem::swap(&mut lo[outcome.pair].state, &mut hi[0].state);
    }
    outcome
}

/// Runs `iterations` sweeps with a swap attempt after every `swap_every`
/// sweeps. Returns `(attempts, accepts)`.
#[allow(clippy::too_many_arguments)]
fn tempered_loop<F: FnMut(usize, &ChainState) -> Result<()> + Send>(
    slots: &mut [Slot],
    gammas: &[f64],
    data: &Dataset,
    hp: &HyperParams,
    iterations: usize,
    swap_every: usize,
    coordinator: &mut ChainRng,
    record: &mut F,
) -> Result<(usize, usize)> {
    let (mut attempts, mut accepts) = (0, 0);
    let mut t = 0;
    while t < iterations {
        let block = swap_every.min(iterations - t);
        advance(slots, gammas, data, hp, t, block, record)?;
        t += block;
        if slots.len() > 1 && t % swap_every == 0 {
            attempts += 1;
            if swap_slots(slots, gammas, coordinator).accepted {
                accepts += 1;
            }
        }
    }
    Ok((attempts, accepts))
}

fn initial_slots(data: &Dataset, hp: &HyperParams, ladder: &Ladder) -> Result<Vec<Slot>> {
    (0..ladder.len())
        .map(|j| {
            let mut rng = stream(hp.seed, j as u64 + 1);
            let state = init_from_prior(data, hp, ladder.warm_gammas[j], &mut rng)?;
            Ok(Slot { state, rng })
        })
        .collect()
}

fn warm_slots(data: &Dataset, hp: &HyperParams, config: &RunConfig) -> Result<(Vec<Slot>, ChainRng)> {
    let ladder = Ladder::from_hyperparams(hp);
    let mut coordinator = stream(hp.seed, 0);
    let mut slots = initial_slots(data, hp, &ladder)?;
    tempered_loop(
        &mut slots,
        &ladder.warm_gammas,
        data,
        hp,
        config.warm_iterations,
        config.swap_every,
        &mut coordinator,
        &mut |_, _| Ok(()),
    )?;
    Ok((slots, coordinator))
}

/// Draws each chain from the prior and runs `warm_iterations` sweeps with
/// the overdispersed concentrations `γ ≥ d/2`, swaps included.
pub fn warm_start(data: &Dataset, hp: &HyperParams, config: &RunConfig) -> Result<Vec<ChainState>> {
    let (slots, _) = warm_slots(data, hp, config)?;
    Ok(slots.into_iter().map(|s| s.state).collect())
}

/// Warm start followed by the tempered main run. Only slot 0 (the target
/// posterior) contributes retained draws.
///
/// Chains run on the current rayon pool; the result does not depend on its
/// size.
pub fn run(data: &Dataset, hp: &HyperParams, config: &RunConfig) -> Result<McmcTrace> {
    config.validate()?;
    hp.validate(data.p())?;
    let (mut slots, mut coordinator) = warm_slots(data, hp, config)?;
    let ladder = Ladder::from_hyperparams(hp);

    let mut trace = McmcTrace::default();
    trace.draws.reserve(config.retained());
    let mut record = |t: usize, state: &ChainState| -> Result<()> {
        if config.is_retained(t) {
            trace.loglik.push(observed_loglik(state, data)?);
            trace.alive_count.push(state.alive_count());
            trace.iterations.push(t);
            trace.draws.push(state.clone());
        }
        Ok(())
    };
    let (attempts, accepts) = tempered_loop(
        &mut slots,
        &ladder.gammas,
        data,
        hp,
        config.iterations,
        config.swap_every,
        &mut coordinator,
        &mut record,
    )?;
    trace.swap_attempts = attempts;
    trace.swap_accepts = accepts;
    Ok(trace)
}
