//! Construct-then-invert oracle for ECR relabelling: a trace is built by
//! applying known random permutations to one well-separated state, so the
//! correct relabelling of every draw is the inverse permutation.

use ofmfa::model::McmcTrace;
use ofmfa::postprocess::ecr_relabel;
use ofmfa::rng::stream;
use rand::seq::SliceRandom;
use rand::Rng;

use super::dense::random_state;

/// Returns `(draws whose recovered permutation is the injected inverse, draws)`.
pub fn recovery(k_hat: usize, draws: usize, seed: u64) -> (usize, usize) {
    let mut rng = stream(seed, 0);
    let n = 30 * k_hat;
    let (mut base, _) = random_state(n, 4, 1, k_hat, &mut rng);
    // Balanced allocation so every component is alive.
    base.z = (0..n).map(|i| i % k_hat).collect();
    let mut trace = McmcTrace::default();
    let mut injected = Vec::new();
    for t in 0..draws {
        let mut perm: Vec<usize> = (0..k_hat).collect();
        perm.shuffle(&mut rng);
        let mut draw = base.permuted(&perm);
        // A handful of disagreeing allocations, as in a real well-separated run.
        for _ in 0..2 {
            let i = rng.random_range(0..n);
            draw.z[i] = rng.random_range(0..k_hat);
        }
        // Keep every component alive.
        for c in 0..k_hat {
            draw.z[c] = perm[base.z[c]];
        }
        trace.alive_count.push(draw.alive_count());
        trace.loglik.push(0.0);
        trace.iterations.push(t + 1);
        trace.draws.push(draw);
        injected.push(perm);
    }
    let relabelled = ecr_relabel(&trace, k_hat, &base.z).unwrap();
    let hits = relabelled
        .permutations
        .iter()
        .zip(&injected)
        .filter(|(tau, pi)| (0..k_hat).all(|a| tau[pi[a]] == a))
        .count();
    (hits, relabelled.len())
}
