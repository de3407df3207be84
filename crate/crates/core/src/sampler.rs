//! Partially collapsed Gibbs sampler for one chain.
//!
//! A sweep updates, in order: `Ω`, `Λ` (collapsed over `μ`), `μ`, `z`
//! (collapsed over `y`), `y`, `Σ`, `w`. The `Λ`/`μ` and `z`/`y` pairs are
//! each a blocked draw from their joint conditional, which is why `y` is
//! refreshed right after `z` and before anything conditions on it.
//!
//! Each conditional is exposed as a pure function returning its parameters
//! (`*_conditional`) next to the `update_*` function that draws from it, so
//! the parameters can be checked independently of the random draws.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, solve_lower, solve_lower_transpose, LowRankCov};
use crate::model::{ChainState, Dataset, ErrorVariances, HyperParams, LoadingMatrix, SigmaMode};
use crate::rng::{categorical_from_logs, dirichlet, gamma_shape_rate, std_normal};

/// Per-component allocation statistics.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    k: usize,
    p: usize,
    q: usize,
    /// `ṡ_k(z)`.
    pub counts: Vec<usize>,
    /// `Σ_{i: z_i = k} x_i`, `K × p`.
    pub sum_x: Vec<f64>,
    /// `Σ_{i: z_i = k} y_i`, `K × q`.
    pub sum_y: Vec<f64>,
    /// `s̈_k(z, y) = Σ y_i y_iᵀ`, `K × q × q`.
    pub syy: Vec<f64>,
    /// `s⃛_k(z, x, y) = Σ x_i y_iᵀ`, `K × p × q`.
    pub sxy: Vec<f64>,
    /// Diagonal of `Φ_k = (ṡ_k Σ_k⁻¹ + Ψ⁻¹)⁻¹`, `K × p`.
    pub phi: Vec<f64>,
}

impl SufficientStats {
    pub fn compute(state: &ChainState, data: &Dataset, hp: &HyperParams) -> Self {
        let (k, p, q) = (state.k(), data.p(), state.q());
        let mut counts = vec![0usize; k];
        let mut sum_x = vec![0.0; k * p];
        let mut sum_y = vec![0.0; k * q];
        let mut syy = vec![0.0; k * q * q];
        let mut sxy = vec![0.0; k * p * q];
        for i in 0..data.n() {
            let c = state.z[i];
            counts[c] += 1;
            let x = data.row(i);
            let y = state.y_row(i);
            for (s, v) in sum_x[c * p..(c + 1) * p].iter_mut().zip(x) {
                *s += v;
            }
            if q == 0 {
                continue;
            }
            for (s, v) in sum_y[c * q..(c + 1) * q].iter_mut().zip(y) {
                *s += v;
            }
            let block = &mut syy[c * q * q..(c + 1) * q * q];
            for a in 0..q {
                for b in 0..q {
                    block[a * q + b] += y[a] * y[b];
                }
            }
            let block = &mut sxy[c * p * q..(c + 1) * p * q];
            for r in 0..p {
                let xr = x[r];
                for (s, yv) in block[r * q..(r + 1) * q].iter_mut().zip(y) {
                    *s += xr * yv;
                }
            }
        }
        let mut phi = vec![0.0; k * p];
        for c in 0..k {
            let sigma = state.sigma.component(c);
            for r in 0..p {
                phi[c * p + r] = 1.0 / (counts[c] as f64 / sigma[r] + 1.0 / hp.psi_diag[r]);
            }
        }
        Self { k, p, q, counts, sum_x, sum_y, syy, sxy, phi }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn sum_y(&self, c: usize) -> &[f64] {
        &self.sum_y[c * self.q..(c + 1) * self.q]
    }
}

/// A multivariate normal specified by its mean and a Cholesky factor of its
/// precision.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: Vec<f64>,
    precision_chol: Vec<f64>,
}

impl GaussianConditional {
    fn from_precision(mut precision: Vec<f64>, mut rhs: Vec<f64>, context: &str) -> Result<Self> {
        let dim = rhs.len();
        cholesky_with_jitter(&mut precision, dim, context)?;
        solve_lower(&precision, dim, &mut rhs);
        solve_lower_transpose(&precision, dim, &mut rhs);
        Ok(Self { mean: rhs, precision_chol: precision })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Dense row-major covariance (inverse of the precision).
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.dim();
        let mut cov = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().enumerate().for_each(|(i, v)| *v = if i == j { 1.0 } else { 0.0 });
            solve_lower(&self.precision_chol, n, &mut e);
            solve_lower_transpose(&self.precision_chol, n, &mut e);
            for i in 0..n {
                cov[i * n + j] = e[i];
            }
        }
        cov
    }

    /// Draws `mean + L⁻ᵀ ε`, writing into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim();
        for v in out.iter_mut() {
            *v = std_normal(rng);
        }
        solve_lower_transpose(&self.precision_chol, n, out);
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
    }
}

/// Gamma(shape, rate) conditional for `ω_ℓ⁻²`, `ℓ = 0..q`.
pub fn omega_conditional(state: &ChainState, hp: &HyperParams) -> Vec<(f64, f64)> {
    let q = state.q();
    let p = state.p();
    let k = state.k();
    (0..q)
        .map(|l| {
            // Column l is free in rows r >= l.
            let free = p.saturating_sub(l);
            let ss: f64 = state
                .lambda
                .iter()
                .map(|lam| (l..p).map(|r| lam.get(r, l).powi(2)).sum::<f64>())
                .sum();
            (hp.g + (k * free) as f64 / 2.0, hp.h + 0.5 * ss)
        })
        .collect()
}

pub fn update_omega<R: Rng + ?Sized>(state: &mut ChainState, hp: &HyperParams, rng: &mut R) {
    let params = omega_conditional(state, hp);
    for (om, (shape, rate)) in state.omega.iter_mut().zip(params) {
        *om = 1.0 / gamma_shape_rate(shape, rate, rng);
    }
}

/// Conditional of the free part of loading row `r` of component `c`, with
/// `μ_c` integrated out.
///
/// Precision `Γ⁻¹ = Ω⁻¹_ν + s̈/σ² − (φ/σ⁴) s sᵀ` and mean `Γ Δᵀ` with
/// `Δ = s⃛_r/σ² − (φ/σ⁴) S_r s`, where `s = Σ_{i∈c} y_{i,1:ν}` and `S_r =
/// Σ_{i∈c} x_ir`, both centered at the prior mean `ξ_r`. Here `φ = φ_crr`.
pub fn loading_row_conditional(
    stats: &SufficientStats,
    state: &ChainState,
    hp: &HyperParams,
    c: usize,
    r: usize,
) -> Result<GaussianConditional> {
    let (p, q) = (stats.p, stats.q);
    let nu = (r + 1).min(q);
    let s2 = state.sigma.component(c)[r];
    let phi = stats.phi[c * p + r];
    let rank_one = phi / (s2 * s2);
    let xi = hp.xi[r];
    let n_c = stats.counts[c] as f64;
    let sy = stats.sum_y(c);
    let syy = &stats.syy[c * q * q..(c + 1) * q * q];
    let sxy = &stats.sxy[c * p * q + r * q..c * p * q + (r + 1) * q];
    let sx = stats.sum_x[c * p + r] - n_c * xi;

    let mut precision = vec![0.0; nu * nu];
    let mut rhs = vec![0.0; nu];
    for a in 0..nu {
        for b in 0..nu {
            precision[a * nu + b] = syy[a * q + b] / s2 - rank_one * sy[a] * sy[b];
        }
        precision[a * nu + a] += 1.0 / state.omega[a];
        rhs[a] = (sxy[a] - xi * sy[a]) / s2 - rank_one * sx * sy[a];
    }
    GaussianConditional::from_precision(precision, rhs, "loading row conditional")
}

pub fn update_lambda<R: Rng + ?Sized>(
    state: &mut ChainState,
    stats: &SufficientStats,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    let p = state.p();
    for c in 0..state.k() {
        for r in 0..p {
            let cond = loading_row_conditional(stats, state, hp, c, r)?;
            let mut draw = vec![0.0; cond.dim()];
            cond.sample_into(rng, &mut draw);
            state.lambda[c].free_row_mut(r).copy_from_slice(&draw);
        }
    }
    Ok(())
}

/// Mean and (diagonal) variance of `μ_c` given everything else.
pub fn mu_conditional(
    stats: &SufficientStats,
    state: &ChainState,
    hp: &HyperParams,
    c: usize,
) -> (Vec<f64>, Vec<f64>) {
    let p = stats.p;
    let sigma = state.sigma.component(c);
    let sy = stats.sum_y(c);
    let lam = &state.lambda[c];
    let var: Vec<f64> = stats.phi[c * p..(c + 1) * p].to_vec();
    let mean = (0..p)
        .map(|r| {
            let fitted: f64 = lam.row(r).iter().zip(sy).map(|(l, s)| l * s).sum();
            let resid_sum = stats.sum_x[c * p + r] - fitted;
            var[r] * (resid_sum / sigma[r] + hp.xi[r] / hp.psi_diag[r])
        })
        .collect();
    (mean, var)
}

pub fn update_mu<R: Rng + ?Sized>(
    state: &mut ChainState,
    stats: &SufficientStats,
    hp: &HyperParams,
    rng: &mut R,
) {
    for c in 0..state.k() {
        let (mean, var) = mu_conditional(stats, state, hp, c);
        for (r, (m, v)) in mean.iter().zip(&var).enumerate() {
            state.mu[c][r] = m + v.sqrt() * std_normal(rng);
        }
    }
}

/// Factored marginal covariance `Λ_cΛ_cᵀ + Σ_c` of every component.
pub fn component_covariances(state: &ChainState) -> Result<Vec<LowRankCov>> {
    (0..state.k())
        .map(|c| LowRankCov::new(&state.lambda[c], state.sigma.component(c)))
        .collect()
}

/// Unnormalized log allocation weights `log w_c + log N(x_i; μ_c, Λ_cΛ_cᵀ + Σ_c)`
/// for observation `i`, written into `out` (length `K`).
pub fn allocation_log_weights(
    state: &ChainState,
    covs: &[LowRankCov],
    x: &[f64],
    out: &mut [f64],
) {
    let q = state.q();
    let mut diff = vec![0.0; x.len()];
    let mut scratch = vec![0.0; q];
    for (c, o) in out.iter_mut().enumerate() {
        *o = state.w[c].ln() + covs[c].log_density(x, &state.mu[c], &mut diff, &mut scratch);
    }
}

/// Normalized allocation probabilities, `n × K`.
pub fn allocation_probabilities(state: &ChainState, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let covs = component_covariances(state)?;
    let mut logs = vec![0.0; state.k()];
    Ok((0..data.n())
        .map(|i| {
            allocation_log_weights(state, &covs, data.row(i), &mut logs);
            let lse = crate::linalg::log_sum_exp(&logs);
            logs.iter().map(|l| (l - lse).exp()).collect()
        })
        .collect())
}

/// Draws `z` from its conditional with `y` integrated out.
pub fn update_z<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    covs: &[LowRankCov],
    rng: &mut R,
) {
    let k = state.k();
    let (p, q) = (data.p(), state.q());
    let log_w: Vec<f64> = state.w.iter().map(|w| w.ln()).collect();
    let mut logs = vec![0.0; k];
    let mut diff = vec![0.0; p];
    let mut scratch = vec![0.0; q];
    for i in 0..data.n() {
        let x = data.row(i);
        for c in 0..k {
            logs[c] = log_w[c] + covs[c].log_density(x, &state.mu[c], &mut diff, &mut scratch);
        }
        state.z[i] = categorical_from_logs(&logs, rng);
    }
}

/// Mean and covariance of `y_i` given its allocation: `N(M⁻¹ΛᵀΣ⁻¹(x_i − μ), M⁻¹)`.
pub fn factor_conditional(
    state: &ChainState,
    covs: &[LowRankCov],
    x: &[f64],
    c: usize,
) -> (Vec<f64>, Vec<f64>) {
    let q = state.q();
    let cov = &covs[c];
    let diff: Vec<f64> = x.iter().zip(&state.mu[c]).map(|(a, b)| a - b).collect();
    let mut mean = vec![0.0; q];
    cov.project(&diff, &mut mean);
    let l = cov.capacitance_chol();
    solve_lower(l, q, &mut mean);
    solve_lower_transpose(l, q, &mut mean);
    let cond = GaussianConditional { mean, precision_chol: l.to_vec() };
    let covariance = cond.covariance();
    (cond.mean, covariance)
}

pub fn update_y<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    covs: &[LowRankCov],
    rng: &mut R,
) {
    let (p, q) = (data.p(), state.q());
    if q == 0 {
        return;
    }
    let mut diff = vec![0.0; p];
    let mut b = vec![0.0; q];
    for i in 0..data.n() {
        let c = state.z[i];
        let cov = &covs[c];
        for ((d, a), m) in diff.iter_mut().zip(data.row(i)).zip(&state.mu[c]) {
            *d = a - m;
        }
        cov.project(&diff, &mut b);
        let l = cov.capacitance_chol();
        // y = L⁻ᵀ(L⁻¹b + ε) has mean M⁻¹b and covariance M⁻¹.
        solve_lower(l, q, &mut b);
        for v in b.iter_mut() {
            *v += std_normal(rng);
        }
        solve_lower_transpose(l, q, &mut b);
        state.y[i * q..(i + 1) * q].copy_from_slice(&b);
    }
}

/// Gamma(shape, rate) conditionals of the error precisions. Per-component
/// mode yields `K` rows of `p` pairs; shared mode yields a single row.
pub fn sigma_conditional(
    state: &ChainState,
    data: &Dataset,
    hp: &HyperParams,
) -> Vec<Vec<(f64, f64)>> {
    let (p, q) = (data.p(), state.q());
    let groups = match state.sigma.mode() {
        SigmaMode::PerComponent => state.k(),
        SigmaMode::Shared => 1,
    };
    let mut counts = vec![0usize; groups];
    let mut ss = vec![0.0; groups * p];
    for i in 0..data.n() {
        let c = state.z[i];
        let g = if groups == 1 { 0 } else { c };
        counts[g] += 1;
        let x = data.row(i);
        let y = &state.y[i * q..(i + 1) * q];
        let lam = &state.lambda[c];
        let mu = &state.mu[c];
        for r in 0..p {
            let fitted: f64 = lam.row(r).iter().zip(y).map(|(l, v)| l * v).sum();
            let e = x[r] - mu[r] - fitted;
            ss[g * p + r] += e * e;
        }
    }
    (0..groups)
        .map(|g| {
            (0..p)
                .map(|r| (hp.alpha + counts[g] as f64 / 2.0, hp.beta + 0.5 * ss[g * p + r]))
                .collect()
        })
        .collect()
}

pub fn update_sigma<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hp: &HyperParams,
    rng: &mut R,
) {
    let params = sigma_conditional(state, data, hp);
    let draw_row = |row: &[(f64, f64)], rng: &mut R| -> Vec<f64> {
        row.iter().map(|&(a, b)| 1.0 / gamma_shape_rate(a, b, rng)).collect()
    };
    state.sigma = match state.sigma.mode() {
        SigmaMode::PerComponent => {
            ErrorVariances::PerComponent(params.iter().map(|row| draw_row(row, rng)).collect())
        }
        SigmaMode::Shared => ErrorVariances::Shared(draw_row(&params[0], rng)),
    };
}

/// Dirichlet parameters of the `w` conditional: `γ/K + n_k`.
pub fn weight_conditional(state: &ChainState, gamma_chain: f64) -> Vec<f64> {
    let k = state.k() as f64;
    state.counts().iter().map(|&n| gamma_chain / k + n as f64).collect()
}

pub fn update_w<R: Rng + ?Sized>(state: &mut ChainState, gamma_chain: f64, rng: &mut R) {
    let alpha = weight_conditional(state, gamma_chain);
    state.w = dirichlet(&alpha, rng);
}

/// One full sweep. `gamma_chain` is this chain's Dirichlet concentration.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hp: &HyperParams,
    gamma_chain: f64,
    rng: &mut R,
) -> Result<()> {
    let stats = SufficientStats::compute(state, data, hp);
    if state.q() > 0 {
        update_omega(state, hp, rng);
        update_lambda(state, &stats, hp, rng)?;
    }
    update_mu(state, &stats, hp, rng);
    let covs = component_covariances(state)?;
    update_z(state, data, &covs, rng);
    update_y(state, data, &covs, rng);
    update_sigma(state, data, hp, rng);
    update_w(state, gamma_chain, rng);
    Ok(())
}

/// Draws every parameter from its prior, `z` uniformly and `y` from
/// `N(0, I)`.
pub fn init_from_prior<R: Rng + ?Sized>(
    data: &Dataset,
    hp: &HyperParams,
    gamma_chain: f64,
    rng: &mut R,
) -> Result<ChainState> {
    let (n, p, q, k) = (data.n(), data.p(), hp.q, hp.k);
    if hp.xi.len() != p {
        return Err(Error::InvalidConfig("hyperparameters do not match data dimension".into()));
    }
    let omega: Vec<f64> = (0..q).map(|_| 1.0 / gamma_shape_rate(hp.g, hp.h, rng)).collect();
    let lambda = (0..k)
        .map(|_| {
            let mut lam = LoadingMatrix::zeros(p, q);
            for r in 0..p {
                for (j, v) in lam.free_row_mut(r).iter_mut().enumerate() {
                    *v = omega[j].sqrt() * std_normal(rng);
                }
            }
            lam
        })
        .collect();
    let mu = (0..k)
        .map(|_| (0..p).map(|r| hp.xi[r] + hp.psi_diag[r].sqrt() * std_normal(rng)).collect())
        .collect();
    let prior_sigma = |rng: &mut R| -> Vec<f64> {
        (0..p).map(|_| 1.0 / gamma_shape_rate(hp.alpha, hp.beta, rng)).collect()
    };
    let sigma = match hp.sigma_mode {
        SigmaMode::PerComponent => ErrorVariances::PerComponent((0..k).map(|_| prior_sigma(rng)).collect()),
        SigmaMode::Shared => ErrorVariances::Shared(prior_sigma(rng)),
    };
    let w = dirichlet(&vec![gamma_chain / k as f64; k], rng);
    let z = (0..n).map(|_| rng.random_range(0..k)).collect();
    let y = (0..n * q).map(|_| std_normal(rng)).collect();
    Ok(ChainState { w, mu, lambda, sigma, omega, z, y })
}
