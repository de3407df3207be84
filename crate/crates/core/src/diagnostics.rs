//! Convergence and cluster-agreement diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classical Gelman-Rubin potential scale reduction factor
/// `sqrt(((T−1)/T · W + B/T) / W)`, where `W` is the mean within-chain
/// variance and `B/T` the variance of the chain means (both with the
/// unbiased denominator).
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidData("PSRF needs at least two chains".into()));
    }
    let t = chains[0].len();
    if t < 2 || chains.iter().any(|c| c.len() != t) {
        return Err(Error::InvalidData("PSRF needs chains of equal length of at least 2".into()));
    }
    let tf = t as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / tf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b_over_t = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mean)| c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tf - 1.0))
        .sum::<f64>()
        / m as f64;
    if !(w > 0.0) {
        return Err(Error::InvalidData("PSRF is undefined for constant chains".into()));
    }
    Ok((((tf - 1.0) / tf * w + b_over_t) / w).sqrt())
}

/// PSRF of several named scalar traces, each observed on every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsrfReport {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub threshold: f64,
    pub converged: bool,
}

impl PsrfReport {
    pub const THRESHOLD: f64 = 1.2;

    /// `traces[v][m]` is the trace of variable `v` in run `m`.
    pub fn new(names: Vec<String>, traces: &[Vec<Vec<f64>>]) -> Result<Self> {
        let values = traces.iter().map(|runs| psrf(runs)).collect::<Result<Vec<_>>>()?;
        let converged = values.iter().all(|v| *v < Self::THRESHOLD);
        Ok(Self { names, values, threshold: Self::THRESHOLD, converged })
    }
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1) / 2) as f64
}

/// Rand index and adjusted Rand index of two partitions.
///
/// Labels are arbitrary integers. The adjusted index uses the contingency
/// table form `(Σ C(n_ij,2) − E) / (½(Σ C(a_i,2) + Σ C(b_j,2)) − E)`; if the
/// denominator vanishes it is 1 for identical partitions and 0 otherwise.
pub fn rand_indices(a: &[usize], b: &[usize]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::InvalidData(format!("partitions have lengths {} and {}", a.len(), b.len())));
    }
    let n = a.len() as u64;
    let dense = |v: &[usize]| -> (Vec<usize>, usize) {
        let mut seen = std::collections::BTreeMap::new();
        let out = v
            .iter()
            .map(|x| {
                let next = seen.len();
                *seen.entry(*x).or_insert(next)
            })
            .collect();
        (out, seen.len())
    };
    let (da, ka) = dense(a);
    let (db, kb) = dense(b);
    let mut table = vec![0u64; ka * kb];
    for (i, j) in da.iter().zip(&db) {
        table[i * kb + j] += 1;
    }
    let rows: Vec<u64> = (0..ka).map(|i| table[i * kb..(i + 1) * kb].iter().sum()).collect();
    let cols: Vec<u64> = (0..kb).map(|j| (0..ka).map(|i| table[i * kb + j]).sum()).collect();
    let index: f64 = table.iter().map(|&x| choose2(x)).sum();
    let sum_a: f64 = rows.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = cols.iter().map(|&x| choose2(x)).sum();
    let pairs = choose2(n);
    if pairs == 0.0 {
        return Ok((1.0, 1.0));
    }
    let rand = (pairs + 2.0 * index - sum_a - sum_b) / pairs;
    // Numerator and denominator scaled by the number of pairs, which keeps
    // both integral for exact results on small tables.
    let denom = 0.5 * pairs * (sum_a + sum_b) - sum_a * sum_b;
    let adjusted = if denom == 0.0 {
        if rand == 1.0 { 1.0 } else { 0.0 }
    } else {
        (pairs * index - sum_a * sum_b) / denom
    };
    Ok((rand, adjusted))
}
