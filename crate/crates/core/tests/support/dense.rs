//! Dense-matrix oracles for the low-rank covariance algebra.

use nalgebra::{DMatrix, DVector};
use ofmfa::linalg::woodbury_inverse;
use ofmfa::model::{ChainState, Dataset, ErrorVariances, LoadingMatrix};
use ofmfa::rng::ChainRng;
use ofmfa::sampler::allocation_probabilities;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_loadings<R: Rng>(p: usize, q: usize, rng: &mut R) -> LoadingMatrix {
    let mut values = vec![0.0; p * q];
    for r in 0..p {
        for j in 0..q.min(r + 1) {
            let v: f64 = StandardNormal.sample(rng);
            values[r * q + j] = 1.5 * v;
        }
    }
    LoadingMatrix::from_row_major(p, q, values).unwrap()
}

pub fn random_sigma<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(0.05..3.0)).collect()
}

pub fn dense_cov(lambda: &LoadingMatrix, sigma: &[f64]) -> DMatrix<f64> {
    let (p, q) = (lambda.p(), lambda.q());
    let l = DMatrix::from_row_slice(p, q, lambda.values());
    &l * l.transpose() + DMatrix::from_diagonal(&DVector::from_column_slice(sigma))
}

/// Multivariate normal log density by a dense Cholesky factorization.
pub fn dense_log_density(x: &[f64], mu: &[f64], cov: &DMatrix<f64>) -> f64 {
    let p = x.len();
    let chol = cov.clone().cholesky().expect("SPD covariance");
    let d = DVector::from_iterator(p, x.iter().zip(mu).map(|(a, b)| a - b));
    let sol = chol.solve(&d);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + d.dot(&sol))
}

/// Largest absolute errors of the inverse, of `inverse · cov − I` and of the
/// log-determinant over random instances with `p ≤ 10`, `q ≤ 3`.
pub fn woodbury_errors(instances: usize, rng: &mut ChainRng) -> (f64, f64, f64) {
    let (mut inv_err, mut id_err, mut det_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let p = rng.random_range(1..=10);
        let q = rng.random_range(0..=3usize.min(p));
        let lambda = random_loadings(p, q, rng);
        let sigma = random_sigma(p, rng);
        let (inv, log_det) = woodbury_inverse(&lambda, &sigma).unwrap();
        let cov = dense_cov(&lambda, &sigma);
        let dense_inv = cov.clone().try_inverse().unwrap();
        inv_err = inv_err.max((&inv - &dense_inv).amax());
        id_err = id_err.max((&inv * &cov - DMatrix::identity(p, p)).amax());
        det_err = det_err.max((log_det - cov.determinant().ln()).abs());
    }
    (inv_err, id_err, det_err)
}

/// Random mixture state with `k` components on `n` observations.
pub fn random_state<R: Rng>(n: usize, p: usize, q: usize, k: usize, rng: &mut R) -> (ChainState, Dataset) {
    let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let mu: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let state = ChainState {
        w,
        mu,
        lambda: (0..k).map(|_| random_loadings(p, q, rng)).collect(),
        sigma: ErrorVariances::PerComponent((0..k).map(|_| random_sigma(p, rng)).collect()),
        omega: vec![1.0; q],
        z: (0..n).map(|_| rng.random_range(0..k)).collect(),
        y: vec![0.0; n * q],
    };
    let x: Vec<f64> = (0..n * p).map(|_| 2.0 * ofmfa::rng::std_normal(rng)).collect();
    (state, Dataset::from_values(x, n, p).unwrap())
}

/// Largest relative error of the log-space allocation probabilities against
/// probabilities built from dense densities, over instances with `p ≤ 8`.
pub fn allocation_errors(instances: usize, rng: &mut ChainRng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = rng.random_range(1..=8);
        let q = rng.random_range(0..=3usize.min(p));
        let k = rng.random_range(1..=4);
        let (state, data) = random_state(6, p, q, k, rng);
        let probs = allocation_probabilities(&state, &data).unwrap();
        let covs: Vec<DMatrix<f64>> =
            (0..k).map(|c| dense_cov(&state.lambda[c], state.sigma.component(c))).collect();
        for i in 0..data.n() {
            let logs: Vec<f64> = (0..k)
                .map(|c| state.w[c].ln() + dense_log_density(data.row(i), &state.mu[c], &covs[c]))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
            for c in 0..k {
                let expected = (logs[c] - max).exp() / total;
                // Relative error for non-negligible masses, absolute below.
                let err = (probs[i][c] - expected).abs() / expected.max(1e-3);
                worst = worst.max(err);
            }
        }
    }
    worst
}
