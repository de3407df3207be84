//! Geweke joint-distribution test for the Gibbs sweep.
//!
//! The marginal-conditional simulator draws parameters from the prior and
//! data from the likelihood, independently of any sampler code. The
//! successive-conditional simulator alternates one Gibbs sweep with a fresh
//! draw of the data given the current parameters and latents. If every
//! conditional is correct, both simulators target the same joint
//! distribution, so the moments of any parameter function must agree.

use ofmfa::model::{ChainState, Dataset, ErrorVariances, HyperParams, LoadingMatrix, SigmaMode};
use ofmfa::rng::stream;
use ofmfa::sampler::gibbs_sweep;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

pub const N: usize = 5;
pub const P: usize = 2;
pub const Q: usize = 1;
pub const K: usize = 2;

#[derive(Debug, Clone)]
pub struct MomentCheck {
    pub name: String,
    pub marginal_mean: f64,
    pub marginal_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
}

impl MomentCheck {
    pub fn z_score(&self) -> f64 {
        (self.marginal_mean - self.successive_mean)
            / (self.marginal_se.powi(2) + self.successive_se.powi(2)).sqrt()
    }
}

/// Moderately informative priors keep the heavy tails of the variance
/// priors from dominating the Monte Carlo error.
pub fn hyperparams(mode: SigmaMode) -> HyperParams {
    let mut hp = HyperParams::standardized_defaults(P, K, Q, mode);
    hp.alpha = 3.0;
    hp.beta = 2.0;
    hp.g = 3.0;
    hp.h = 2.0;
    hp.xi = vec![0.5, -0.5];
    hp.psi_diag = vec![1.5, 0.8];
    hp.gamma = 2.0;
    hp
}

fn gamma_rate<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One exact draw of (θ, z, y) from the prior.
fn prior_draw<R: Rng>(hp: &HyperParams, rng: &mut R) -> ChainState {
    let omega: Vec<f64> = (0..Q).map(|_| 1.0 / gamma_rate(hp.g, hp.h, rng)).collect();
    let mut lambda = Vec::new();
    for _ in 0..K {
        let mut values = vec![0.0; P * Q];
        for r in 0..P {
            for j in 0..Q.min(r + 1) {
                values[r * Q + j] = omega[j].sqrt() * normal(rng);
            }
        }
        lambda.push(LoadingMatrix::from_row_major(P, Q, values).unwrap());
    }
    let mu = (0..K)
        .map(|_| (0..P).map(|r| hp.xi[r] + hp.psi_diag[r].sqrt() * normal(rng)).collect())
        .collect();
    let var_row = |rng: &mut R| -> Vec<f64> {
        (0..P).map(|_| 1.0 / gamma_rate(hp.alpha, hp.beta, rng)).collect()
    };
    let sigma = match hp.sigma_mode {
        SigmaMode::PerComponent => ErrorVariances::PerComponent((0..K).map(|_| var_row(rng)).collect()),
        SigmaMode::Shared => ErrorVariances::Shared(var_row(rng)),
    };
    let a = hp.gamma / K as f64;
    let w1: f64 = Beta::new(a, a).unwrap().sample(rng);
    let w1 = w1.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    let w = vec![w1, 1.0 - w1];
    let z = (0..N).map(|_| if rng.random::<f64>() < w[0] { 0 } else { 1 }).collect();
    let y = (0..N * Q).map(|_| normal(rng)).collect();
    ChainState { w, mu, lambda, sigma, omega, z, y }
}

/// Data given (θ, z, y).
fn data_draw<R: Rng>(state: &ChainState, out: &mut [f64], rng: &mut R) {
    for i in 0..N {
        let c = state.z[i];
        let s = state.sigma.component(c);
        for r in 0..P {
            let fitted: f64 =
                (0..Q).map(|j| state.lambda[c].get(r, j) * state.y[i * Q + j]).sum();
            out[i * P + r] = state.mu[c][r] + fitted + s[r].sqrt() * normal(rng);
        }
    }
}

fn functions(state: &ChainState) -> [f64; 4] {
    [
        state.w[0],
        state.mu[0][0],
        1.0 / state.sigma.component(0)[0],
        1.0 / state.omega[0],
    ]
}

const NAMES: [&str; 4] = ["w_1", "mu_11", "sigma^-2_11", "omega^-2_1"];

fn mean_se_iid(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Batch-means standard error for an autocorrelated series.
fn mean_se_batched(v: &[f64], batches: usize) -> (f64, f64) {
    let size = v.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| v[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let (m, se) = mean_se_iid(&means);
    let _ = m;
    let overall = v[..batches * size].iter().sum::<f64>() / (batches * size) as f64;
    (overall, se)
}

pub fn run(mode: SigmaMode, draws: usize, seed: u64) -> Vec<MomentCheck> {
    let hp = hyperparams(mode);
    let mut rng = stream(seed, 0);

    let mut marginal: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); 8];
    let mut x = vec![0.0; N * P];
    for _ in 0..draws {
        let s = prior_draw(&hp, &mut rng);
        data_draw(&s, &mut x, &mut rng);
        for (j, f) in functions(&s).iter().enumerate() {
            marginal[j].push(*f);
            marginal[4 + j].push(f * f);
        }
    }

    let mut rng = stream(seed, 1);
    let mut state = prior_draw(&hp, &mut rng);
    data_draw(&state, &mut x, &mut rng);
    let mut data = Dataset::from_values(x.clone(), N, P).unwrap();
    let mut successive: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); 8];
    for _ in 0..draws {
        gibbs_sweep(&mut state, &data, &hp, hp.gamma, &mut rng).expect("sweep");
        data_draw(&state, data.values_mut(), &mut rng);
        for (j, f) in functions(&state).iter().enumerate() {
            successive[j].push(*f);
            successive[4 + j].push(f * f);
        }
    }

    (0..8)
        .map(|j| {
            let (mm, ms) = mean_se_iid(&marginal[j]);
            let (sm, ss) = mean_se_batched(&successive[j], 100);
            let name = if j < 4 {
                format!("E[{}]", NAMES[j])
            } else {
                format!("E[({})^2]", NAMES[j - 4])
            };
            MomentCheck {
                name,
                marginal_mean: mm,
                marginal_se: ms,
                successive_mean: sm,
                successive_se: ss,
            }
        })
        .collect()
}
