//! Small dense kernels and the low-rank-plus-diagonal Gaussian used by the
//! sampler.
//!
//! Every covariance in the model has the form `ΛΛᵀ + Σ` with `Σ` diagonal
//! and `q ≪ p`, so densities are evaluated through the `q × q` capacitance
//! matrix `M = I_q + ΛᵀΣ⁻¹Λ`:
//!
//! * `(ΛΛᵀ + Σ)⁻¹ = Σ⁻¹ − Σ⁻¹Λ M⁻¹ ΛᵀΣ⁻¹`
//! * `log det(ΛΛᵀ + Σ) = Σ_r log σ²_r + log det M`

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::LoadingMatrix;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal jitter added on the single retry of a failed factorization.
pub const JITTER: f64 = 1e-10;

/// In-place lower Cholesky factor of a row-major `n × n` SPD matrix. Only the
/// lower triangle is read; the strict upper triangle is zeroed. Returns
/// `false` on a nonpositive pivot.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Cholesky with the crate's jitter policy: on failure, add [`JITTER`] to
/// the diagonal of the original matrix and retry once.
pub fn cholesky_with_jitter(a: &mut [f64], n: usize, context: &str) -> Result<()> {
    let original = a.to_vec();
    if cholesky_in_place(a, n) {
        return Ok(());
    }
    a.copy_from_slice(&original);
    for j in 0..n {
        a[j * n + j] += JITTER;
    }
    if cholesky_in_place(a, n) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite { context: context.to_string() })
    }
}

/// Solves `L x = b` in place.
#[inline]
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
#[inline]
pub fn solve_lower_transpose(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `log det` of the matrix whose Cholesky factor is `l`.
pub fn cholesky_log_det(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

/// The Gaussian covariance `ΛΛᵀ + Σ` in factored form.
#[derive(Debug, Clone)]
pub struct LowRankCov {
    p: usize,
    q: usize,
    sigma_inv: Vec<f64>,
    /// `Σ⁻¹Λ`, row-major `p × q`.
    scaled_loadings: Vec<f64>,
    /// Cholesky factor of `M = I_q + ΛᵀΣ⁻¹Λ`.
    capacitance_chol: Vec<f64>,
    log_det: f64,
}

impl LowRankCov {
    pub fn new(lambda: &LoadingMatrix, sigma: &[f64]) -> Result<Self> {
        let (p, q) = (lambda.p(), lambda.q());
        debug_assert_eq!(sigma.len(), p);
        let sigma_inv: Vec<f64> = sigma.iter().map(|s| 1.0 / s).collect();
        let mut scaled_loadings = vec![0.0; p * q];
        for r in 0..p {
            for (j, v) in lambda.row(r).iter().enumerate() {
                scaled_loadings[r * q + j] = v * sigma_inv[r];
            }
        }
        let mut m = vec![0.0; q * q];
        for a in 0..q {
            m[a * q + a] = 1.0;
        }
        for r in 0..p {
            let row = lambda.row(r);
            let srow = &scaled_loadings[r * q..(r + 1) * q];
            for a in 0..q {
                for b in 0..=a {
                    m[a * q + b] += row[a] * srow[b];
                }
            }
        }
        cholesky_with_jitter(&mut m, q, "capacitance matrix I + Λ'Σ⁻¹Λ")?;
        let log_det = sigma.iter().map(|s| s.ln()).sum::<f64>() + cholesky_log_det(&m, q);
        Ok(Self { p, q, sigma_inv, scaled_loadings, capacitance_chol: m, log_det })
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn capacitance_chol(&self) -> &[f64] {
        &self.capacitance_chol
    }

    /// `b = ΛᵀΣ⁻¹ d`, written into `out` (length `q`).
    #[inline]
    pub fn project(&self, d: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, dr) in d.iter().enumerate() {
            let srow = &self.scaled_loadings[r * self.q..(r + 1) * self.q];
            for (o, s) in out.iter_mut().zip(srow) {
                *o += s * dr;
            }
        }
    }

    /// Mahalanobis form `dᵀ(ΛΛᵀ + Σ)⁻¹d`; `scratch` needs length `q`.
    #[inline]
    pub fn quad_form(&self, d: &[f64], scratch: &mut [f64]) -> f64 {
        let diag: f64 = d.iter().zip(&self.sigma_inv).map(|(v, s)| v * v * s).sum();
        if self.q == 0 {
            return diag;
        }
        self.project(d, scratch);
        solve_lower(&self.capacitance_chol, self.q, scratch);
        diag - scratch.iter().map(|v| v * v).sum::<f64>()
    }

    /// `log N_p(x; mu, ΛΛᵀ + Σ)`. `diff` needs length `p`, `scratch` length `q`.
    #[inline]
    pub fn log_density(&self, x: &[f64], mu: &[f64], diff: &mut [f64], scratch: &mut [f64]) -> f64 {
        for ((d, a), b) in diff.iter_mut().zip(x).zip(mu) {
            *d = a - b;
        }
        -0.5 * (self.p as f64 * LN_2PI + self.log_det + self.quad_form(diff, scratch))
    }

    /// Dense row-major inverse via the Woodbury identity.
    pub fn inverse(&self) -> Vec<f64> {
        let (p, q) = (self.p, self.q);
        let mut inv = vec![0.0; p * p];
        // Rows of L⁻¹ (Σ⁻¹Λ)ᵀ: column r of U = L⁻¹ ΛᵀΣ⁻¹ e_r.
        let mut u = vec![0.0; q * p];
        let mut col = vec![0.0; q];
        for r in 0..p {
            col.copy_from_slice(&self.scaled_loadings[r * q..(r + 1) * q]);
            solve_lower(&self.capacitance_chol, q, &mut col);
            for a in 0..q {
                u[a * p + r] = col[a];
            }
        }
        for a in 0..p {
            for b in 0..=a {
                let v = -(0..q).map(|j| u[j * p + a] * u[j * p + b]).sum::<f64>();
                inv[a * p + b] = v;
                inv[b * p + a] = v;
            }
            inv[a * p + a] += self.sigma_inv[a];
        }
        inv
    }
}

/// `((ΛΛᵀ + Σ)⁻¹, log det(ΛΛᵀ + Σ))` by the Sherman–Morrison–Woodbury
/// identity and the matrix determinant lemma.
pub fn woodbury_inverse(lambda: &LoadingMatrix, sigma_diag: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    if sigma_diag.len() != lambda.p() {
        return Err(Error::InvalidConfig("sigma length does not match loadings".into()));
    }
    if sigma_diag.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidConfig("error variances must be positive".into()));
    }
    let cov = LowRankCov::new(lambda, sigma_diag)?;
    let p = lambda.p();
    Ok((DMatrix::from_row_slice(p, p, &cov.inverse()), cov.log_det()))
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
