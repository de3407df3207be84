//! Seeded random streams and the few distributions the sampler needs.
//!
//! Every chain owns one ChaCha8 stream keyed by `(seed, stream index)`; the
//! tempering coordinator uses stream 0. Draw order inside a sweep is fixed,
//! so a run is reproducible from `(seed, J, hyperparameters)` regardless of
//! how chains are scheduled onto threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub type ChainRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a master seed and a list of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(master), |acc, t| mix(acc ^ mix(*t)))
}

/// Stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma draw with shape/rate parameterization (mean `shape / rate`).
pub fn gamma_shape_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters must be positive and finite")
        .sample(rng)
}

/// `log G` for `G ~ Gamma(shape, 1)`, accurate for very small shapes where
/// `G` itself underflows: `G = G' U^{1/shape}` with `G' ~ Gamma(shape + 1)`.
pub fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        return gamma_shape_rate(shape, 1.0, rng).ln();
    }
    let boosted = gamma_shape_rate(shape + 1.0, 1.0, rng);
    let u: f64 = rng.random::<f64>();
    // `random` is in [0, 1); map 0 to the smallest positive double.
    boosted.ln() + u.max(f64::MIN_POSITIVE).ln() / shape
}

/// Dirichlet draw computed in log space; every coordinate is kept strictly
/// positive.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp().max(f64::MIN_POSITIVE)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Index drawn from unnormalized log-weights.
pub fn categorical_from_logs<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_weights.iter().map(|l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, l) in log_weights.iter().enumerate() {
        let p = (l - max).exp();
        if u < p {
            return k;
        }
        u -= p;
    }
    // Rounding can leave u marginally above the last mass.
    log_weights
        .iter()
        .rposition(|l| (l - max).exp() > 0.0)
        .unwrap_or(log_weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 1).random()).collect();
        let mut r1 = stream(7, 1);
        let mut r2 = stream(7, 2);
        let x: u64 = r1.random();
        let y: u64 = r2.random();
        assert_eq!(a[0], x);
        assert_ne!(x, y);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }

    #[test]
    fn small_shape_dirichlet_stays_positive() {
        let mut rng = stream(3, 0);
        for _ in 0..2000 {
            let w = dirichlet(&[0.05; 20], &mut rng);
            assert!(w.iter().all(|v| *v > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_gamma_mean_small_shape() {
        // E[G] = shape for Gamma(shape, 1).
        let mut rng = stream(11, 0);
        let n = 200_000;
        let shape = 0.3;
        let draws: Vec<f64> = (0..n).map(|_| log_gamma_draw(shape, &mut rng).exp()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (shape / n as f64).sqrt();
        assert!((mean - shape).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = stream(5, 0);
        let logs = [0.2f64.ln(), 0.5f64.ln(), 0.3f64.ln()];
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[categorical_from_logs(&logs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.5, 0.3]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }
}
