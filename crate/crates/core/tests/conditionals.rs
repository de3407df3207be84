//! Monte Carlo moment checks of each conditional update against the
//! parameters of its own conditional distribution.

mod support;

use ofmfa::model::{HyperParams, SigmaMode};
use ofmfa::rng::stream;
use ofmfa::sampler::{
    component_covariances, factor_conditional, loading_row_conditional, mu_conditional, omega_conditional,
    update_lambda, update_mu, update_omega, update_w, update_y, weight_conditional, SufficientStats,
};
use support::dense::random_state;

const DRAWS: usize = 100_000;

fn check(name: &str, samples: &[f64], mean: f64, var: f64) {
    let m = samples.iter().sum::<f64>() / samples.len() as f64;
    let se = (var / samples.len() as f64).sqrt();
    assert!((m - mean).abs() < 3.0 * se, "{name}: mean {m} vs {mean} (se {se})");
}

fn setup() -> (ofmfa::ChainState, ofmfa::Dataset, HyperParams) {
    let mut rng = stream(77, 0);
    let (mut state, data) = random_state(25, 4, 2, 3, &mut rng);
    state.omega = vec![1.3, 0.6];
    state.y = (0..25 * 2).map(|i| ((i * 7 % 11) as f64 - 5.0) / 4.0).collect();
    let mut hp = HyperParams::standardized_defaults(4, 3, 2, SigmaMode::PerComponent);
    hp.xi = vec![0.2, -0.1, 0.0, 0.4];
    hp.psi_diag = vec![1.0, 2.0, 0.5, 1.5];
    (state, data, hp)
}

#[test]
fn omega_draws_match_gamma_moments() {
    let (mut state, _, hp) = setup();
    let params = omega_conditional(&state, &hp);
    let mut rng = stream(1, 0);
    let mut draws = vec![Vec::with_capacity(DRAWS); 2];
    for _ in 0..DRAWS {
        update_omega(&mut state, &hp, &mut rng);
        for l in 0..2 {
            draws[l].push(1.0 / state.omega[l]);
        }
    }
    for (l, (a, b)) in params.iter().enumerate() {
        check(&format!("omega {l}"), &draws[l], a / b, a / (b * b));
    }
}

#[test]
fn loading_rows_match_conditional_moments() {
    let (mut state, data, hp) = setup();
    let stats = SufficientStats::compute(&state, &data, &hp);
    let conds: Vec<_> = (0..4).map(|r| loading_row_conditional(&stats, &state, &hp, 1, r).unwrap()).collect();
    let mut rng = stream(2, 0);
    let mut draws = vec![Vec::with_capacity(DRAWS); 8];
    for _ in 0..DRAWS {
        update_lambda(&mut state, &stats, &hp, &mut rng).unwrap();
        for (idx, v) in state.lambda[1].values().iter().enumerate() {
            draws[idx].push(*v);
        }
    }
    for r in 0..4 {
        let cov = conds[r].covariance();
        let nu = conds[r].dim();
        for j in 0..nu {
            check(&format!("lambda {r},{j}"), &draws[r * 2 + j], conds[r].mean[j], cov[j * nu + j]);
        }
    }
    assert!(draws[1].iter().all(|v| *v == 0.0));
}

#[test]
fn mu_draws_match_conditional_moments() {
    let (mut state, data, hp) = setup();
    let stats = SufficientStats::compute(&state, &data, &hp);
    let (mean, var) = mu_conditional(&stats, &state, &hp, 2);
    let mut rng = stream(3, 0);
    let mut draws = vec![Vec::with_capacity(DRAWS); 4];
    for _ in 0..DRAWS {
        update_mu(&mut state, &stats, &hp, &mut rng);
        for r in 0..4 {
            draws[r].push(state.mu[2][r]);
        }
    }
    for r in 0..4 {
        check(&format!("mu {r}"), &draws[r], mean[r], var[r]);
    }
}

#[test]
fn factor_draws_match_conditional_moments() {
    let (mut state, data, _) = setup();
    let covs = component_covariances(&state).unwrap();
    let c = state.z[0];
    let (mean, cov) = factor_conditional(&state, &covs, data.row(0), c);
    let mut rng = stream(4, 0);
    let mut draws = vec![Vec::with_capacity(DRAWS); 2];
    for _ in 0..DRAWS {
        update_y(&mut state, &data, &covs, &mut rng);
        draws[0].push(state.y[0]);
        draws[1].push(state.y[1]);
    }
    check("y 0", &draws[0], mean[0], cov[0]);
    check("y 1", &draws[1], mean[1], cov[3]);
}

#[test]
fn weight_draws_match_dirichlet_moments() {
    let (mut state, _, _) = setup();
    let alpha = weight_conditional(&state, 1.0);
    let total: f64 = alpha.iter().sum();
    let mut rng = stream(5, 0);
    let mut draws = vec![Vec::with_capacity(DRAWS); 3];
    for _ in 0..DRAWS {
        update_w(&mut state, 1.0, &mut rng);
        for k in 0..3 {
            draws[k].push(state.w[k]);
        }
    }
    for k in 0..3 {
        let m = alpha[k] / total;
        check(&format!("w {k}"), &draws[k], m, m * (1.0 - m) / (total + 1.0));
    }
}
