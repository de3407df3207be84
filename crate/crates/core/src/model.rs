//! Domain types shared by every stage of the pipeline.
//!
//! Conventions used throughout the crate:
//!
//! * matrices are stored row-major in flat `Vec<f64>` buffers;
//! * component labels are 0-based internally (`0..K`); the CLI renders them
//!   1-based;
//! * variances are stored as variances (`σ²`, `ω²`), while the Gamma priors
//!   and conditionals are stated on the precision scale with shape/rate
//!   parameterization (mean `shape / rate`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether error variances differ between components or are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    PerComponent,
    Shared,
}

impl SigmaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SigmaMode::PerComponent => "per_component",
            SigmaMode::Shared => "shared",
        }
    }
}

impl std::fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_component" | "per-component" | "unconstrained" => Ok(SigmaMode::PerComponent),
            "shared" | "constrained" => Ok(SigmaMode::Shared),
            other => Err(Error::InvalidConfig(format!("unknown sigma mode `{other}`"))),
        }
    }
}

/// An `n × p` observation matrix, standardized column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n: usize,
    p: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    variable_names: Option<Vec<String>>,
}

impl Dataset {
    /// Standardizes raw row-major values with the z-transform (sample
    /// standard deviation with denominator `n - 1`).
    pub fn standardize(
        raw: &[f64],
        n: usize,
        p: usize,
        variable_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 observations, got {n}")));
        }
        if p < 1 {
            return Err(Error::InvalidData("need at least 1 variable".into()));
        }
        if raw.len() != n * p {
            return Err(Error::InvalidData(format!(
                "expected {} values for a {n}x{p} table, got {}",
                n * p,
                raw.len()
            )));
        }
        if let Some(names) = &variable_names {
            if names.len() != p {
                return Err(Error::InvalidData(format!(
                    "{} variable names for {p} columns",
                    names.len()
                )));
            }
        }
        if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            )));
        }

        let mut center = vec![0.0; p];
        let mut scale = vec![0.0; p];
        for r in 0..p {
            let mean = (0..n).map(|i| raw[i * p + r]).sum::<f64>() / n as f64;
            let ss = (0..n).map(|i| (raw[i * p + r] - mean).powi(2)).sum::<f64>();
            let sd = (ss / (n - 1) as f64).sqrt();
            if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
                let label = variable_names
                    .as_ref()
                    .map(|v| format!("`{}`", v[r]))
                    .unwrap_or_else(|| format!("{}", r + 1));
                return Err(Error::InvalidData(format!("column {label} is constant")));
            }
            center[r] = mean;
            scale[r] = sd;
        }

        let x = raw
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let r = idx % p;
                (v - center[r]) / scale[r]
            })
            .collect();

        Ok(Self { x, n, p, center, scale, variable_names })
    }

    /// Wraps values that are used as-is (zero center, unit scale). Useful for
    /// data that is already on the working scale, such as simulator output in
    /// sampler validation.
    pub fn from_values(x: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if x.len() != n * p || n == 0 || p == 0 {
            return Err(Error::InvalidData(format!(
                "expected a nonempty {n}x{p} table, got {} values",
                x.len()
            )));
        }
        Ok(Self { x, n, p, center: vec![0.0; p], scale: vec![1.0; p], variable_names: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    /// Maps the working values back to the original measurement scale.
    pub fn unstandardize(&self) -> Vec<f64> {
        self.x
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let r = idx % self.p;
                v * self.scale[r] + self.center[r]
            })
            .collect()
    }
}

/// Fixed prior and run constants for one model fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Overfitted component ceiling.
    pub k: usize,
    /// Number of factors.
    pub q: usize,
    /// Gamma(shape, rate) prior on `σ⁻²`.
    pub alpha: f64,
    pub beta: f64,
    /// Gamma(shape, rate) prior on `ω⁻²`.
    pub g: f64,
    pub h: f64,
    /// Dirichlet concentration of the target chain; each weight gets `gamma / k`.
    pub gamma: f64,
    pub xi: Vec<f64>,
    pub psi_diag: Vec<f64>,
    pub sigma_mode: SigmaMode,
    /// Number of tempered chains.
    pub chains: usize,
    /// Increment of the tempering ladder.
    pub delta: f64,
    pub seed: u64,
    /// Accept `q` above the Ledermann bound (validation downgrades to a warning).
    #[serde(default)]
    pub allow_above_ledermann: bool,
}

impl HyperParams {
    /// Prior constants for standardized data: `α = β = g = h = 0.5`, `γ = 1`,
    /// `ξ = 0`, `Ψ = I`, with 8 chains and ladder increment 1.
    pub fn standardized_defaults(p: usize, k: usize, q: usize, sigma_mode: SigmaMode) -> Self {
        Self {
            k,
            q,
            alpha: 0.5,
            beta: 0.5,
            g: 0.5,
            h: 0.5,
            gamma: 1.0,
            xi: vec![0.0; p],
            psi_diag: vec![1.0; p],
            sigma_mode,
            chains: 8,
            delta: 1.0,
            seed: 0,
            allow_above_ledermann: false,
        }
    }

    pub fn p(&self) -> usize {
        self.xi.len()
    }

    /// Dimension `d` of the free parameters of one emission distribution.
    pub fn emission_dim(&self) -> usize {
        emission_dim(self.p(), self.q)
    }

    /// Checks every hard constraint and returns the soft ones that were
    /// overridden as warnings.
    pub fn validate(&self, p: usize) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        if self.xi.len() != p || self.psi_diag.len() != p {
            return bad(format!(
                "xi/psi have lengths {}/{} but the data has {p} variables",
                self.xi.len(),
                self.psi_diag.len()
            ));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("g", self.g),
            ("h", self.h),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.psi_diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("psi diagonal must be positive".into());
        }
        if self.xi.iter().any(|v| !v.is_finite()) {
            return bad("xi must be finite".into());
        }
        if self.chains < 1 {
            return bad("at least one chain is required".into());
        }
        let d = emission_dim(p, self.q) as f64;
        if self.gamma >= d / 2.0 {
            return bad(format!(
                "gamma = {} is not below d/2 = {} (overfitting regime requires gamma < d/2)",
                self.gamma,
                d / 2.0
            ));
        }
        let bound = ledermann_bound(p);
        if self.q as f64 > bound.floor() {
            let msg = format!(
                "q = {} exceeds the Ledermann bound floor({bound:.3}) = {} for p = {p}",
                self.q,
                bound.floor()
            );
            if self.allow_above_ledermann {
                warnings.push(msg);
            } else {
                return bad(format!("{msg}; pass the override flag to fit it anyway"));
            }
        }
        Ok(warnings)
    }
}

/// Factor loadings of one component, with the upper-triangular zero pattern
/// that fixes the rotation: row `r` (0-based) has `min(r + 1, q)` free
/// entries and the rest are structurally zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingMatrix {
    p: usize,
    q: usize,
    values: Vec<f64>,
}

impl LoadingMatrix {
    pub fn zeros(p: usize, q: usize) -> Self {
        Self { p, q, values: vec![0.0; p * q] }
    }

    /// Builds from row-major values, rejecting nonzero structural zeros.
    pub fn from_row_major(p: usize, q: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * q {
            return Err(Error::InvalidConfig(format!(
                "loading matrix needs {} values, got {}",
                p * q,
                values.len()
            )));
        }
        let m = Self { p, q, values };
        if !m.satisfies_constraints() {
            return Err(Error::InvalidConfig(
                "loading matrix has nonzero entries above the diagonal of its leading block".into(),
            ));
        }
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of free entries in row `r` (0-based), `ν = min(r + 1, q)`.
    #[inline]
    pub fn free_len(&self, r: usize) -> usize {
        (r + 1).min(self.q)
    }

    pub fn free_count(&self) -> usize {
        (0..self.p).map(|r| self.free_len(r)).sum()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.q..(r + 1) * self.q]
    }

    /// Mutable view of the free part of row `r`.
    #[inline]
    pub fn free_row_mut(&mut self, r: usize) -> &mut [f64] {
        let nu = self.free_len(r);
        &mut self.values[r * self.q..r * self.q + nu]
    }

    #[inline]
    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.values[r * self.q + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn satisfies_constraints(&self) -> bool {
        (0..self.p).all(|r| self.row(r)[self.free_len(r)..].iter().all(|v| *v == 0.0))
    }

    /// Dense row-major `ΛΛᵀ + diag(sigma)`.
    pub fn covariance(&self, sigma: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut c = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..=a {
                let v: f64 = self.row(a).iter().zip(self.row(b)).map(|(x, y)| x * y).sum();
                c[a * p + b] = v;
                c[b * p + a] = v;
            }
            c[a * p + a] += sigma[a];
        }
        c
    }

    /// Flips the sign of column `j`.
    pub fn flip_column(&mut self, j: usize) {
        for r in 0..self.p {
            self.values[r * self.q + j] = -self.values[r * self.q + j];
        }
    }
}

/// Diagonal error variances `σ²`, per component or shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorVariances {
    PerComponent(Vec<Vec<f64>>),
    Shared(Vec<f64>),
}

impl ErrorVariances {
    #[inline]
    pub fn component(&self, k: usize) -> &[f64] {
        match self {
            ErrorVariances::PerComponent(v) => &v[k],
            ErrorVariances::Shared(v) => v,
        }
    }

    pub fn mode(&self) -> SigmaMode {
        match self {
            ErrorVariances::PerComponent(_) => SigmaMode::PerComponent,
            ErrorVariances::Shared(_) => SigmaMode::Shared,
        }
    }

    fn all_values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            ErrorVariances::PerComponent(v) => Box::new(v.iter().flatten().copied()),
            ErrorVariances::Shared(v) => Box::new(v.iter().copied()),
        }
    }
}

/// Full parameter and latent state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub w: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub lambda: Vec<LoadingMatrix>,
    pub sigma: ErrorVariances,
    /// Diagonal of `Ω`; empty when `q = 0`.
    pub omega: Vec<f64>,
    /// Allocations, 0-based.
    pub z: Vec<usize>,
    /// Latent factors, row-major `n × q`.
    pub y: Vec<f64>,
}

impl ChainState {
    pub fn k(&self) -> usize {
        self.w.len()
    }

    pub fn q(&self) -> usize {
        self.omega.len()
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.mu.first().map_or(0, |m| m.len())
    }

    #[inline]
    pub fn y_row(&self, i: usize) -> &[f64] {
        let q = self.q();
        &self.y[i * q..(i + 1) * q]
    }

    /// Number of observations allocated to each component.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for &zi in &self.z {
            counts[zi] += 1;
        }
        counts
    }

    pub fn alive_count(&self) -> usize {
        self.counts().iter().filter(|&&c| c > 0).count()
    }

    /// Verifies simplex, positivity and loading-constraint invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(format!("invalid chain state: {m}")));
        let k = self.k();
        let sum: f64 = self.w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return fail(format!("weights sum to {sum}"));
        }
        if self.w.iter().any(|w| !(*w > 0.0)) {
            return fail("nonpositive weight".into());
        }
        if self.mu.len() != k || self.lambda.len() != k {
            return fail("component count mismatch".into());
        }
        if let ErrorVariances::PerComponent(v) = &self.sigma {
            if v.len() != k {
                return fail("sigma component count mismatch".into());
            }
        }
        if self.sigma.all_values().any(|s| !(s > 0.0 && s.is_finite())) {
            return fail("nonpositive error variance".into());
        }
        if self.omega.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return fail("nonpositive omega".into());
        }
        if self.lambda.iter().any(|l| !l.satisfies_constraints()) {
            return fail("loading constraint violated".into());
        }
        if self.z.iter().any(|&zi| zi >= k) {
            return fail("allocation out of range".into());
        }
        if self.y.len() != self.n() * self.q() {
            return fail("latent factor shape mismatch".into());
        }
        Ok(())
    }

    /// Relabels components: old label `a` becomes `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> ChainState {
        let k = self.k();
        assert_eq!(perm.len(), k, "permutation length must equal K");
        let mut w = vec![0.0; k];
        let mut mu = vec![Vec::new(); k];
        let mut lambda = vec![LoadingMatrix::zeros(0, 0); k];
        for a in 0..k {
            w[perm[a]] = self.w[a];
            mu[perm[a]] = self.mu[a].clone();
            lambda[perm[a]] = self.lambda[a].clone();
        }
        let sigma = match &self.sigma {
            ErrorVariances::PerComponent(v) => {
                let mut out = vec![Vec::new(); k];
                for a in 0..k {
                    out[perm[a]] = v[a].clone();
                }
                ErrorVariances::PerComponent(out)
            }
            shared => shared.clone(),
        };
        ChainState {
            w,
            mu,
            lambda,
            sigma,
            omega: self.omega.clone(),
            z: self.z.iter().map(|&zi| perm[zi]).collect(),
            y: self.y.clone(),
        }
    }
}

/// Retained draws of the target chain.
#[derive(Debug, Clone, Default)]
pub struct McmcTrace {
    pub draws: Vec<ChainState>,
    /// 1-based iteration at which each draw was retained.
    pub iterations: Vec<usize>,
    pub alive_count: Vec<usize>,
    /// Observed-data log-likelihood of the alive components.
    pub loglik: Vec<f64>,
    pub swap_attempts: usize,
    pub swap_accepts: usize,
}

impl McmcTrace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn swap_rate(&self) -> f64 {
        if self.swap_attempts == 0 {
            0.0
        } else {
            self.swap_accepts as f64 / self.swap_attempts as f64
        }
    }
}

/// Information criteria and alive-count posterior for one `(q, Σ-mode)` fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub q: usize,
    pub sigma_mode: SigmaMode,
    pub k_hat: usize,
    pub k_posterior: BTreeMap<usize, f64>,
    pub aic: f64,
    pub bic: f64,
    pub dic: f64,
    pub dic2: f64,
    pub p_d: f64,
    pub d_free: usize,
    /// Index into the full trace of the draw maximizing the observed log-likelihood.
    pub theta_hat_index: usize,
    pub swap_rate: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `d = 2p + pq − q(q−1)/2`.
pub fn emission_dim(p: usize, q: usize) -> usize {
    2 * p + loading_free_count(p, q)
}

fn loading_free_count(p: usize, q: usize) -> usize {
    // Σ_r min(r, q); equals pq − q(q−1)/2 whenever q ≤ p.
    (1..=p).map(|r| r.min(q)).sum()
}

/// Number of free parameters of a mixture with `k0` components.
pub fn free_param_count(k0: usize, q: usize, p: usize, sigma_mode: SigmaMode) -> usize {
    assert!(k0 >= 1, "at least one component");
    let loadings = loading_free_count(p, q);
    match sigma_mode {
        SigmaMode::PerComponent => (k0 - 1) + k0 * (2 * p + loadings),
        SigmaMode::Shared => (k0 - 1) + k0 * (p + loadings) + p,
    }
}

/// `φ(p) = (2p + 1 − √(8p + 1)) / 2`.
pub fn ledermann_bound(p: usize) -> f64 {
    let p = p as f64;
    (2.0 * p + 1.0 - (8.0 * p + 1.0).sqrt()) / 2.0
}

/// Reduction in covariance parameters of the factor model relative to an
/// unconstrained covariance: `½[(p − q)² − (p + q)]`.
pub fn covariance_param_reduction(p: usize, q: usize) -> f64 {
    let (p, q) = (p as f64, q as f64);
    0.5 * ((p - q).powi(2) - (p + q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn free_param_count_examples() {
        assert_eq!(free_param_count(1, 4, 40, SigmaMode::PerComponent), 234);
        assert_eq!(free_param_count(3, 0, 21, SigmaMode::PerComponent), 128);
        assert_eq!(free_param_count(2, 1, 12, SigmaMode::Shared), 61);
    }

    #[test]
    fn ledermann_examples() {
        assert_eq!(ledermann_bound(6), 3.0);
        assert_eq!(ledermann_bound(21), 15.0);
        assert_eq!(ledermann_bound(1), 0.0);
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(covariance_param_reduction(6, 2), 4.0);
        assert_eq!(covariance_param_reduction(6, 3), 0.0);
        assert_eq!(covariance_param_reduction(40, 4), 626.0);
    }

    #[test]
    fn loading_free_entries() {
        let l = LoadingMatrix::zeros(40, 4);
        assert_eq!(l.free_count(), 40 * 4 - 6);
        assert!(LoadingMatrix::from_row_major(2, 2, vec![1.0, 0.5, 1.0, 1.0]).is_err());
        assert!(LoadingMatrix::from_row_major(2, 2, vec![1.0, 0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn constant_column_rejected() {
        let err = Dataset::standardize(&[1.0, 5.0, 2.0, 5.0, 3.0, 5.0], 3, 2, None).unwrap_err();
        assert!(err.to_string().contains("constant"));
    }

    #[test]
    fn two_by_two_standardization() {
        let d = Dataset::standardize(&[1.0, 2.0, 3.0, 4.0], 2, 2, None).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in d.values().iter().zip([-s, -s, s, s]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_rules() {
        let mut hp = HyperParams::standardized_defaults(6, 20, 3, SigmaMode::Shared);
        assert!(hp.validate(6).unwrap().is_empty());
        hp.q = 4;
        assert!(hp.validate(6).is_err());
        hp.allow_above_ledermann = true;
        assert_eq!(hp.validate(6).unwrap().len(), 1);
        hp.q = 1;
        hp.gamma = emission_dim(6, 1) as f64 / 2.0;
        assert!(hp.validate(6).is_err());
    }

    #[test]
    fn permutation_moves_everything() {
        let state = ChainState {
            w: vec![0.2, 0.8],
            mu: vec![vec![1.0], vec![2.0]],
            lambda: vec![LoadingMatrix::zeros(1, 0), LoadingMatrix::zeros(1, 0)],
            sigma: ErrorVariances::PerComponent(vec![vec![1.0], vec![3.0]]),
            omega: vec![],
            z: vec![0, 1, 1],
            y: vec![],
        };
        let swapped = state.permuted(&[1, 0]);
        assert_eq!(swapped.w, vec![0.8, 0.2]);
        assert_eq!(swapped.mu, vec![vec![2.0], vec![1.0]]);
        assert_eq!(swapped.sigma.component(0), &[3.0]);
        assert_eq!(swapped.z, vec![1, 0, 0]);
        assert_eq!(swapped.permuted(&[1, 0]), state);
    }

    proptest! {
        #[test]
        fn free_params_increase(k0 in 1usize..30, q in 0usize..10, p in 1usize..60) {
            for mode in [SigmaMode::PerComponent, SigmaMode::Shared] {
                let base = free_param_count(k0, q, p, mode);
                prop_assert!(free_param_count(k0 + 1, q, p, mode) > base);
                if q < p {
                    prop_assert!(free_param_count(k0, q + 1, p, mode) > base);
                }
            }
        }

        #[test]
        fn reduction_positive_iff_below_bound(p in 1usize..400, q_frac in 0.0f64..1.0) {
            let q = ((p as f64) * q_frac).floor() as usize;
            let positive = covariance_param_reduction(p, q) > 0.0;
            prop_assert_eq!(positive, (q as f64) < ledermann_bound(p));
        }

        #[test]
        fn standardize_roundtrip(
            rows in 2usize..20,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1e3f64..1e3, 100),
        ) {
            let raw: Vec<f64> = (0..rows * cols)
                .map(|i| seed[i % seed.len()] + (i as f64) * 0.37 + ((i * 7919) % 13) as f64)
                .collect();
            let d = Dataset::standardize(&raw, rows, cols, None).unwrap();
            for r in 0..cols {
                let col: Vec<f64> = (0..rows).map(|i| d.row(i)[r]).collect();
                let mean = col.iter().sum::<f64>() / rows as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rows - 1) as f64;
                prop_assert!(mean.abs() < 1e-10);
                prop_assert!((var - 1.0).abs() < 1e-10);
            }
            for (a, b) in d.unstandardize().iter().zip(&raw) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
