use ofmfa::synthgen::{generate, MeanBranch, Scenario, SynthSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn single_component_sample_covariance_matches_truth() {
    let spec = SynthSpec { k: 1, q: 2, n: 100_000, p: 5, scenario: Scenario::S1, seed: 9, mean_branch: MeanBranch::PerEntry };
    let d = generate(&spec).unwrap();
    let (n, p) = (spec.n, spec.p);
    let mean: Vec<f64> = (0..p).map(|r| (0..n).map(|i| d.x[i * p + r]).sum::<f64>() / n as f64).collect();
    let truth = d.covariance(0);
    for a in 0..p {
        for b in a..p {
            let prods: Vec<f64> = (0..n).map(|i| (d.x[i * p + a] - mean[a]) * (d.x[i * p + b] - mean[b])).collect();
            let m = prods.iter().sum::<f64>() / n as f64;
            let var = prods.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let t = truth[a * p + b];
            assert!((m - t).abs() < 3.5 * se, "({a},{b}): {m} vs {t}, se {se}");
        }
        assert!((mean[a] - d.mu[0][a]).abs() < 4.0 * (truth[a * p + a] / n as f64).sqrt());
    }
}

#[test]
fn allocations_follow_the_weights() {
    let spec = SynthSpec { k: 4, q: 1, n: 10_000, p: 4, scenario: Scenario::S2, seed: 3, mean_branch: MeanBranch::PerEntry };
    let d = generate(&spec).unwrap();
    let mut counts = vec![0.0; spec.k];
    for &z in &d.true_z {
        counts[z] += 1.0;
    }
    let stat: f64 = counts
        .iter()
        .zip(&d.w)
        .map(|(o, w)| {
            let e = w * spec.n as f64;
            (o - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((spec.k - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 0.01, "chi-square {stat}, p = {p_value}");
}
