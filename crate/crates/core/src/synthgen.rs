//! Synthetic mixtures of factor analyzers with known ground truth.
//!
//! Three scenarios differ in the error variances and in how strongly the
//! loadings concentrate on a block of variables per factor. Component
//! means follow trigonometric profiles so clusters separate on some
//! variables and overlap on others. The data is raw; standardize it like
//! any real dataset before fitting.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{dirichlet, std_normal, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    S1,
    S2,
    S3,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(Scenario::S1),
            "s2" | "2" => Ok(Scenario::S2),
            "s3" | "3" => Ok(Scenario::S3),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}' (expected s1, s2 or s3)"))),
        }
    }
}

impl Scenario {
    fn error_variance(&self, r: usize) -> f64 {
        match self {
            Scenario::S1 => (r + 1) as f64,
            Scenario::S2 => 100.0,
            Scenario::S3 => 0.1,
        }
    }

    /// `(φ_k, ρ_k)` of the star entries.
    fn star_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        const S1: [f64; 6] = [-30.0, -20.0, -10.0, 10.0, 20.0, 30.0];
        const S2: [f64; 8] = [-30.0, -20.0, -10.0, 10.0, 20.0, 30.0, 1.0, 40.0];
        match self {
            Scenario::S1 => (S1[rng.random_range(0..S1.len())], 2.0),
            Scenario::S2 => {
                let phi = S2[rng.random_range(0..S2.len())];
                (phi, 0.2 * phi.abs() + 1.0)
            }
            Scenario::S3 => (1.0, 0.01),
        }
    }
}

/// Whether the trigonometric profile of `μ_kr` is chosen per coordinate or
/// once per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanBranch {
    #[default]
    PerEntry,
    PerRow,
}

impl FromStr for MeanBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-entry" => Ok(MeanBranch::PerEntry),
            "per-row" => Ok(MeanBranch::PerRow),
            other => Err(Error::InvalidConfig(format!("unknown mean branch mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub k: usize,
    pub q: usize,
    pub n: usize,
    pub p: usize,
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default)]
    pub mean_branch: MeanBranch,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        if self.q < 1 {
            return bad("q must be at least 1".into());
        }
        if self.p < 2 || self.p < self.q {
            return bad(format!("need p ≥ max(2, q), got p = {} and q = {}", self.p, self.q));
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    /// Row-major `n × p`.
    pub x: Vec<f64>,
    /// 0-based true allocations.
    pub true_z: Vec<usize>,
    pub w: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    /// Row-major `p × q` per component.
    pub lambda: Vec<Vec<f64>>,
    /// Diagonal error variances per component.
    pub sigma: Vec<Vec<f64>>,
}

impl SynthDataset {
    /// `ΛΛᵀ + Σ` of component `k`, row-major `p × p`.
    pub fn covariance(&self, k: usize) -> Vec<f64> {
        let (p, q) = (self.spec.p, self.spec.q);
        let l = &self.lambda[k];
        let mut cov = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                cov[a * p + b] = (0..q).map(|j| l[a * q + j] * l[b * q + j]).sum();
            }
            cov[a * p + a] += self.sigma[k][a];
        }
        cov
    }
}

/// `μ_kr` for 1-based `k` and 0-based `r` under profile `branch`.
fn mean_profile(branch: usize, k: usize, r: usize, p: usize) -> f64 {
    let angle = r as f64 / (p - 1) as f64 * k as f64 * PI;
    match branch {
        0 => 20.0 * angle.sin(),
        1 => 20.0 * angle.cos(),
        _ => -40.0 * (2.0 * angle).cos(),
    }
}

/// Loadings of one component, row-major `p × q`: factor `ℓ` has a block of
/// `⌊p/q⌋` consecutive variables drawn from `N(φ, ρ²)`; everything else is
/// `N(0, 1)`.
fn loadings<R: Rng + ?Sized>(p: usize, q: usize, phi: f64, rho: f64, rng: &mut R) -> Vec<f64> {
    let block = p / q;
    let star = Normal::new(phi, rho).expect("finite star parameters");
    // Generated in the transposed (q × p) orientation, row by row.
    let mut lt = vec![0.0; q * p];
    for l in 0..q {
        for c in 0..p {
            lt[l * p + c] = if c >= l * block && c < (l + 1) * block { star.sample(rng) } else { std_normal(rng) };
        }
    }
    let mut out = vec![0.0; p * q];
    for l in 0..q {
        for c in 0..p {
            out[c * q + l] = lt[l * p + c];
        }
    }
    out
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let SynthSpec { k, q, n, p, scenario, .. } = *spec;
    let mut rng = stream(spec.seed, 0);
    let w = dirichlet(&vec![10.0; k], &mut rng);
    let mu: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let row_branch = rng.random_range(0..3);
            (0..p)
                .map(|r| {
                    let branch = match spec.mean_branch {
                        MeanBranch::PerEntry => rng.random_range(0..3),
                        MeanBranch::PerRow => row_branch,
                    };
                    mean_profile(branch, c + 1, r, p)
                })
                .collect()
        })
        .collect();
    let sigma: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|r| scenario.error_variance(r)).collect()).collect();
    let lambda: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let (phi, rho) = scenario.star_params(&mut rng);
            loadings(p, q, phi, rho, &mut rng)
        })
        .collect();

    let cumulative: Vec<f64> = w
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let mut x = vec![0.0; n * p];
    let mut true_z = Vec::with_capacity(n);
    let mut y = vec![0.0; q];
    for i in 0..n {
        let u: f64 = rng.random();
        let c = cumulative.iter().position(|&cw| u < cw).unwrap_or(k - 1);
        true_z.push(c);
        y.iter_mut().for_each(|v| *v = std_normal(&mut rng));
        for r in 0..p {
            let fitted: f64 = (0..q).map(|j| lambda[c][r * q + j] * y[j]).sum();
            x[i * p + r] = mu[c][r] + fitted + sigma[c][r].sqrt() * std_normal(&mut rng);
        }
    }
    Ok(SynthDataset { spec: *spec, x, true_z, w, mu, lambda, sigma })
}
