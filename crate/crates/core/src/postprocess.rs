//! Identifiable posterior inference for a fitted model.
//!
//! Only draws whose alive count equals `k̂` are used. Each is first reduced
//! to its `k̂` alive components (labels `0..k̂` in increasing original
//! label order), then relabelled by ECR against a pivot allocation: the
//! permutation maximizing the number of observations whose label agrees
//! with the pivot, found by optimal assignment.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::LN_2PI;
use crate::model::{ChainState, Dataset, ErrorVariances, HyperParams, McmcTrace};
use crate::selection::alive_components;

/// Restricts a draw to its alive components, relabelled `0..k0` in
/// increasing original label order, with weights renormalized. Returns the
/// reduced draw and the original label of each new one.
pub fn compact(state: &ChainState) -> (ChainState, Vec<usize>) {
    let labels = alive_components(&state.z, state.k());
    let mut new_label = vec![usize::MAX; state.k()];
    for (new, &old) in labels.iter().enumerate() {
        new_label[old] = new;
    }
    let total: f64 = labels.iter().map(|&c| state.w[c]).sum();
    let sigma = match &state.sigma {
        ErrorVariances::PerComponent(v) => ErrorVariances::PerComponent(labels.iter().map(|&c| v[c].clone()).collect()),
        shared => shared.clone(),
    };
    let reduced = ChainState {
        w: labels.iter().map(|&c| state.w[c] / total).collect(),
        mu: labels.iter().map(|&c| state.mu[c].clone()).collect(),
        lambda: labels.iter().map(|&c| state.lambda[c].clone()).collect(),
        sigma,
        omega: state.omega.clone(),
        z: state.z.iter().map(|&zi| new_label[zi]).collect(),
        y: state.y.clone(),
    };
    (reduced, labels)
}

/// ECR permutation of one draw: `perm[a]` is the new label of label `a`,
/// chosen to maximize `#{i : perm[z_i] = pivot_i}`.
pub fn ecr_permutation(z: &[usize], pivot: &[usize], k: usize) -> Vec<usize> {
    debug_assert_eq!(z.len(), pivot.len());
    let mut agree = vec![0i64; k * k];
    for (&a, &b) in z.iter().zip(pivot) {
        agree[a * k + b] += 1;
    }
    let weights = Matrix::from_vec(k, k, agree).expect("square agreement matrix");
    kuhn_munkres(&weights).1
}

/// Draws of the `k̂` sub-trace, reduced and relabelled.
#[derive(Debug, Clone)]
pub struct RelabelledTrace {
    pub k_hat: usize,
    /// Relabelled draws; `draws[t]` equals `compact(original).permuted(&permutations[t])`.
    pub draws: Vec<ChainState>,
    /// Index of each draw in the full trace.
    pub source: Vec<usize>,
    /// Original (uncompacted) label of each compacted label, per draw.
    pub alive_labels: Vec<Vec<usize>>,
    pub permutations: Vec<Vec<usize>>,
    pub pivot: Vec<usize>,
}

impl RelabelledTrace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Relabels every draw of `trace` with exactly `k_hat` alive components
/// against `pivot` (labels in `0..k_hat`).
pub fn ecr_relabel(trace: &McmcTrace, k_hat: usize, pivot: &[usize]) -> Result<RelabelledTrace> {
    if pivot.iter().any(|&b| b >= k_hat) {
        return Err(Error::InvalidConfig("pivot labels must lie in 0..k_hat".into()));
    }
    let mut out = RelabelledTrace {
        k_hat,
        draws: Vec::new(),
        source: Vec::new(),
        alive_labels: Vec::new(),
        permutations: Vec::new(),
        pivot: pivot.to_vec(),
    };
    for (t, state) in trace.draws.iter().enumerate() {
        if trace.alive_count[t] != k_hat {
            continue;
        }
        let (reduced, labels) = compact(state);
        let perm = ecr_permutation(&reduced.z, pivot, k_hat);
        out.draws.push(reduced.permuted(&perm));
        out.source.push(t);
        out.alive_labels.push(labels);
        out.permutations.push(perm);
    }
    if out.draws.is_empty() {
        return Err(Error::EmptyTrace(format!("no draws with {k_hat} alive components")));
    }
    Ok(out)
}

fn log_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

/// Log prior density of `(w, μ, Λ, Σ, Ω)`, with the variance priors taken on
/// the precisions `σ⁻²` and `ω⁻²`.
pub fn log_prior(state: &ChainState, hp: &HyperParams) -> f64 {
    let k = state.k() as f64;
    let a = hp.gamma / k;
    let mut lp = ln_gamma(hp.gamma) - k * ln_gamma(a) + state.w.iter().map(|w| (a - 1.0) * w.ln()).sum::<f64>();
    for mu in &state.mu {
        for (r, m) in mu.iter().enumerate() {
            lp += log_normal_density(*m, hp.xi[r], hp.psi_diag[r]);
        }
    }
    for om in &state.omega {
        lp += log_gamma_density(1.0 / om, hp.g, hp.h);
    }
    for lam in &state.lambda {
        for r in 0..lam.p() {
            for j in 0..lam.free_len(r) {
                lp += log_normal_density(lam.get(r, j), 0.0, state.omega[j]);
            }
        }
    }
    let precisions: Vec<f64> = match &state.sigma {
        ErrorVariances::PerComponent(v) => v.iter().flatten().map(|s| 1.0 / s).collect(),
        ErrorVariances::Shared(v) => v.iter().map(|s| 1.0 / s).collect(),
    };
    lp + precisions.iter().map(|t| log_gamma_density(*t, hp.alpha, hp.beta)).sum::<f64>()
}

/// Draw among `candidates` maximizing `loglik + log prior`; the first wins
/// ties.
pub fn map_draw_among(trace: &McmcTrace, hp: &HyperParams, candidates: &[usize]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &t in candidates {
        let v = trace.loglik[t] + log_prior(&trace.draws[t], hp);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((t, v));
        }
    }
    best.map(|(t, _)| t).ok_or_else(|| Error::EmptyTrace("no candidate draws for the MAP".into()))
}

/// Retained draw maximizing the log posterior kernel.
pub fn map_draw(trace: &McmcTrace, hp: &HyperParams) -> Result<usize> {
    map_draw_among(trace, hp, &(0..trace.len()).collect::<Vec<_>>())
}

/// `ζ_krj = λ_krj · mean_{i: z_i = k} y_ij` per draw, averaged over draws.
/// Row-major `p × q` per component.
pub fn regularized_scores(trace: &RelabelledTrace) -> Vec<Vec<f64>> {
    let k = trace.k_hat;
    let Some(first) = trace.draws.first() else {
        return vec![Vec::new(); k];
    };
    let (p, q) = (first.p(), first.q());
    let mut acc = vec![vec![0.0; p * q]; k];
    for draw in &trace.draws {
        let mut ybar = vec![vec![0.0; q]; k];
        let counts = draw.counts();
        for (i, &zi) in draw.z.iter().enumerate() {
            for (s, y) in ybar[zi].iter_mut().zip(draw.y_row(i)) {
                *s += y;
            }
        }
        for c in 0..k {
            for r in 0..p {
                for j in 0..q {
                    acc[c][r * q + j] += draw.lambda[c].get(r, j) * ybar[c][j] / counts[c] as f64;
                }
            }
        }
    }
    let t = trace.len() as f64;
    acc.iter_mut().flatten().for_each(|v| *v /= t);
    acc
}

/// Parameters of a single draw, used for quantities that are not
/// identifiable as ergodic averages (the loadings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    /// Index of the draw in the full trace.
    pub draw_index: usize,
    pub w: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    /// Row-major `p × q` loadings per component.
    pub lambda: Vec<Vec<f64>>,
    /// Diagonal error variances per component.
    pub sigma: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub k_hat: usize,
    pub draws: usize,
    pub w_mean: Vec<f64>,
    pub mu_mean: Vec<Vec<f64>>,
    /// Posterior mean of `Λ_kΛ_kᵀ + Σ_k`, row-major `p × p`.
    pub cov_mean: Vec<Vec<f64>>,
    /// Regularized scores, row-major `p × q`.
    pub zeta_mean: Vec<Vec<f64>>,
    pub z_map: Vec<usize>,
    /// `n × k̂`.
    pub membership_prob: Vec<Vec<f64>>,
    pub map: Option<PointEstimate>,
}

fn point_estimate(state: &ChainState, draw_index: usize) -> PointEstimate {
    PointEstimate {
        draw_index,
        w: state.w.clone(),
        mu: state.mu.clone(),
        lambda: state.lambda.iter().map(|l| l.values().to_vec()).collect(),
        sigma: (0..state.k()).map(|c| state.sigma.component(c).to_vec()).collect(),
        omega: state.omega.clone(),
    }
}

/// Ergodic averages over a relabelled trace. `map_position`, if given, is
/// the position within `trace.draws` of the draw reported as the point
/// estimate.
pub fn summarize(trace: &RelabelledTrace, data: &Dataset, map_position: Option<usize>) -> Result<PosteriorSummary> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace("nothing to summarize".into()));
    }
    let (k, n, p) = (trace.k_hat, data.n(), data.p());
    let t = trace.len() as f64;
    let mut w_mean = vec![0.0; k];
    let mut mu_mean = vec![vec![0.0; p]; k];
    let mut cov_mean = vec![vec![0.0; p * p]; k];
    let mut hits = vec![vec![0usize; k]; n];
    for draw in &trace.draws {
        for c in 0..k {
            w_mean[c] += draw.w[c] / t;
            for (m, v) in mu_mean[c].iter_mut().zip(&draw.mu[c]) {
                *m += v / t;
            }
            let cov = draw.lambda[c].covariance(draw.sigma.component(c));
            for (m, v) in cov_mean[c].iter_mut().zip(&cov) {
                *m += v / t;
            }
        }
        for (i, &zi) in draw.z.iter().enumerate() {
            hits[i][zi] += 1;
        }
    }
    let membership_prob: Vec<Vec<f64>> =
        hits.iter().map(|row| row.iter().map(|&h| h as f64 / t).collect()).collect();
    let z_map = hits
        .iter()
        .map(|row| (0..k).fold(0, |best, c| if row[c] > row[best] { c } else { best }))
        .collect();
    let map = map_position.map(|pos| point_estimate(&trace.draws[pos], trace.source[pos]));
    Ok(PosteriorSummary {
        k_hat: k,
        draws: trace.len(),
        w_mean,
        mu_mean,
        cov_mean,
        zeta_mean: regularized_scores(trace),
        z_map,
        membership_prob,
        map,
    })
}

/// Full post-processing of a fitted model: MAP draw of the `k̂` sub-trace,
/// ECR relabelling against its allocation, then summaries.
pub fn posterior(trace: &McmcTrace, k_hat: usize, data: &Dataset, hp: &HyperParams) -> Result<(RelabelledTrace, PosteriorSummary)> {
    let candidates: Vec<usize> = (0..trace.len()).filter(|&t| trace.alive_count[t] == k_hat).collect();
    let map_index = map_draw_among(trace, hp, &candidates)?;
    let pivot = compact(&trace.draws[map_index]).0.z;
    let relabelled = ecr_relabel(trace, k_hat, &pivot)?;
    let position = relabelled.source.iter().position(|&s| s == map_index);
    let summary = summarize(&relabelled, data, position)?;
    Ok((relabelled, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LoadingMatrix, SigmaMode};

    fn state(z: Vec<usize>, k: usize) -> ChainState {
        let n = z.len();
        ChainState {
            w: vec![1.0 / k as f64; k],
            mu: (0..k).map(|c| vec![c as f64, -(c as f64)]).collect(),
            lambda: (0..k)
                .map(|c| LoadingMatrix::from_row_major(2, 1, vec![c as f64 + 1.0, 0.5]).unwrap())
                .collect(),
            sigma: ErrorVariances::PerComponent((0..k).map(|c| vec![1.0 + c as f64, 2.0]).collect()),
            omega: vec![1.0],
            z,
            y: (0..n).map(|i| i as f64 - 1.5).collect(),
        }
    }

    #[test]
    fn compact_drops_empty_components() {
        let s = state(vec![3, 1, 3, 1], 5);
        let (c, labels) = compact(&s);
        assert_eq!(labels, vec![1, 3]);
        assert_eq!(c.z, vec![1, 0, 1, 0]);
        assert_eq!(c.w, vec![0.5, 0.5]);
        assert_eq!(c.mu[1], s.mu[3]);
    }

    #[test]
    fn identity_when_draw_matches_pivot() {
        let z = vec![0, 1, 2, 2, 1, 0];
        assert_eq!(ecr_permutation(&z, &z, 3), vec![0, 1, 2]);
    }

    #[test]
    fn permutation_maps_labels_onto_pivot() {
        let pivot = vec![0, 0, 1, 1, 2, 2];
        let z = vec![2, 2, 0, 0, 1, 1];
        let perm = ecr_permutation(&z, &pivot, 3);
        let mapped: Vec<usize> = z.iter().map(|&a| perm[a]).collect();
        assert_eq!(mapped, pivot);
    }

    #[test]
    fn zeta_sign_invariance_single_observation() {
        let mut s = state(vec![0], 1);
        s.y = vec![0.7];
        let trace = RelabelledTrace {
            k_hat: 1,
            draws: vec![s.clone()],
            source: vec![0],
            alive_labels: vec![vec![0]],
            permutations: vec![vec![0]],
            pivot: vec![0],
        };
        let zeta = regularized_scores(&trace);
        assert!((zeta[0][0] - 0.7).abs() < 1e-15);
        assert!((zeta[0][1] - 0.35).abs() < 1e-15);
        s.lambda[0].flip_column(0);
        s.y = vec![-0.7];
        let flipped = RelabelledTrace { draws: vec![s], ..trace };
        assert_eq!(regularized_scores(&flipped), zeta);
    }

    #[test]
    fn one_draw_summary_equals_the_draw() {
        let s = state(vec![0, 1, 1, 0], 2);
        let trace = McmcTrace {
            draws: vec![s.clone()],
            iterations: vec![1],
            alive_count: vec![2],
            loglik: vec![-3.0],
            swap_attempts: 0,
            swap_accepts: 0,
        };
        let data = Dataset::from_values(vec![0.0; 8], 4, 2).unwrap();
        let hp = HyperParams::standardized_defaults(2, 2, 1, SigmaMode::PerComponent);
        let (rt, summary) = posterior(&trace, 2, &data, &hp).unwrap();
        assert_eq!(rt.permutations, vec![vec![0, 1]]);
        assert_eq!(summary.w_mean, s.w);
        assert_eq!(summary.mu_mean, s.mu);
        assert_eq!(summary.z_map, s.z);
        assert_eq!(summary.cov_mean[1], s.lambda[1].covariance(s.sigma.component(1)));
        for row in &summary.membership_prob {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(summary.map.unwrap().draw_index, 0);
    }
}
