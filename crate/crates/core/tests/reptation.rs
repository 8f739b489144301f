use std::collections::BTreeMap;

use spt_core::estimators::{action_moments, vmc_estimate};
use spt_core::rng;
use spt_core::rqmc::{
    reptation_kernel, reweighted_action_moments, run_rqmc, BurnIn, Direction, FiniteReptationSpace,
    MarkovChainSpace, RqmcConfig,
};
use spt_core::walker::{GaussianTrial, Harmonic};
use spt_core::{DirectionPolicy, Langevin, Reptile, WalkerState};

fn stationary(matrix: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = matrix.nrows();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if p[i] != 0.0 {
                for j in 0..n {
                    next[j] += p[i] * matrix[(i, j)];
                }
            }
        }
        // Lazy step so a periodic lifted chain still converges.
        let next: Vec<f64> = next.iter().zip(&p).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if diff < 1e-15 {
            break;
        }
    }
    p
}

/// `Π ρ(s_i, s_{i+1}) / Π_interior p(s_i) · e^{-S}` with the symmetric link
/// weight `ρ(a, b) = sqrt(p(a) T(b|a) p(b) T(a|b))`.
fn path_weights(space: &MarkovChainSpace, n_beads: usize) -> BTreeMap<Vec<usize>, f64> {
    let sites = space.states();
    let mut paths: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n_beads {
        paths = paths
            .into_iter()
            .flat_map(|p| sites.iter().map(move |&s| [p.clone(), vec![s]].concat()))
            .collect();
    }
    let mut out = BTreeMap::new();
    let mut total = 0.0;
    for path in paths {
        let mut w = 1.0;
        let mut action = 0.0;
        for i in 0..n_beads - 1 {
            let (a, b) = (path[i], path[i + 1]);
            w *= (space.weights[a]
                * space.transition[a][b]
                * space.weights[b]
                * space.transition[b][a])
                .sqrt();
            action += 0.5 * space.epsilon * (space.local_energies[a] + space.local_energies[b]);
        }
        for &s in &path[1..n_beads - 1] {
            w /= space.weights[s];
        }
        w *= (-action).exp();
        total += w;
        out.insert(path, w);
    }
    out.values_mut().for_each(|w| *w /= total);
    out
}

fn kernel_total_variation(
    space: &MarkovChainSpace,
    policy: DirectionPolicy,
    correction: bool,
) -> f64 {
    let kernel = reptation_kernel(space, 3, policy, correction).unwrap();
    let pi = stationary(&kernel.matrix);
    let mut marginal: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for ((path, _), p) in kernel.states.iter().zip(&pi) {
        *marginal.entry(path.clone()).or_default() += p;
    }
    let exact = path_weights(space, 3);
    0.5 * exact
        .iter()
        .map(|(k, v)| (v - marginal[k]).abs())
        .sum::<f64>()
}

fn toy() -> MarkovChainSpace {
    MarkovChainSpace::metropolis_ring(
        vec![1.0, 2.5, 0.7, 1.8, 1.2],
        vec![0.3, -0.4, 0.9, 0.1, -0.2],
        0.6,
    )
    .unwrap()
}

#[test]
fn kernel_stationary_distribution_random_policy() {
    assert!(kernel_total_variation(&toy(), DirectionPolicy::Random, false) < 1e-6);
}

#[test]
fn kernel_stationary_distribution_bounce_policy() {
    let space = toy();
    assert!(kernel_total_variation(&space, DirectionPolicy::Bounce, false) < 1e-6);
    // Both directions carry equal weight in the lifted chain.
    let kernel = reptation_kernel(&space, 3, DirectionPolicy::Bounce, false).unwrap();
    let pi = stationary(&kernel.matrix);
    let head: f64 = kernel
        .states
        .iter()
        .zip(&pi)
        .filter(|((_, d), _)| *d == Direction::Head)
        .map(|(_, p)| p)
        .sum();
    assert!((head - 0.5).abs() < 1e-9);
}

#[test]
fn kernel_with_proposal_correction_handles_asymmetric_proposals() {
    // A proposal out of detailed balance with the weights.
    let transition = vec![
        vec![0.2, 0.5, 0.0, 0.0, 0.3],
        vec![0.1, 0.3, 0.6, 0.0, 0.0],
        vec![0.0, 0.2, 0.1, 0.7, 0.0],
        vec![0.0, 0.0, 0.4, 0.2, 0.4],
        vec![0.6, 0.0, 0.0, 0.1, 0.3],
    ];
    let space = MarkovChainSpace::new(
        vec![1.0, 2.5, 0.7, 1.8, 1.2],
        transition,
        vec![0.3, -0.4, 0.9, 0.1, -0.2],
        0.6,
    )
    .unwrap();
    for policy in [DirectionPolicy::Random, DirectionPolicy::Bounce] {
        assert!(kernel_total_variation(&space, policy, true) < 1e-6);
        assert!(kernel_total_variation(&space, policy, false) > 1e-3);
    }
}

#[test]
fn sampled_paths_follow_the_kernel() {
    let space = toy();
    let exact = path_weights(&space, 3);
    let mut r = rng::stream(5, "toy-sampling", 0);
    let mut reptile = Reptile::new(&space, vec![0, 1, 2]).unwrap();
    let mut counts: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let n = 2_000_000;
    for _ in 0..n {
        reptile.step(&space, DirectionPolicy::Bounce, false, &mut r);
        *counts
            .entry(reptile.beads().copied().collect())
            .or_default() += 1.0;
    }
    let tv = 0.5
        * exact
            .iter()
            .map(|(k, v)| (v - counts.get(k).unwrap_or(&0.0) / n as f64).abs())
            .sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");
}

fn harmonic(alpha: f64, eps: f64) -> Langevin<GaussianTrial, Harmonic> {
    Langevin::new(GaussianTrial::new(alpha).unwrap(), Harmonic, eps).unwrap()
}

#[test]
fn incremental_action_after_many_moves() {
    let space = harmonic(1.2, 0.05);
    let mut r = rng::stream(6, "integrity", 0);
    let mut reptile =
        Reptile::from_trajectory(&space, space.state_at(vec![0.1]), 100, &mut r).unwrap();
    for _ in 0..100_000 {
        reptile.step(&space, DirectionPolicy::Bounce, false, &mut r);
    }
    assert!((reptile.action() - reptile.recompute_action()).abs() < 1e-9);
}

#[test]
fn exact_trial_action_is_constant() {
    let space = harmonic(1.0, 0.02);
    let mut r = rng::stream(7, "exact-action", 0);
    let reptile = Reptile::from_trajectory(&space, space.state_at(vec![0.0]), 51, &mut r).unwrap();
    assert!((reptile.action() - 0.5 * 0.02 * 50.0).abs() < 1e-12);
}

#[test]
fn acceptance_rate_is_reproducible() {
    let space = harmonic(1.2, 0.05);
    let run = |seed| {
        let mut r = rng::stream(seed, "rqmc", 0);
        let mut cfg = RqmcConfig::new(100, 2000);
        cfg.burn_in = BurnIn::Sweeps(200);
        cfg.probe_steps = 0;
        run_rqmc(&space, space.state_at(vec![0.0]), &cfg, &[], &mut r).unwrap()
    };
    let (a, b) = (run(11), run(11));
    assert_eq!(a.acceptance_rate, b.acceptance_rate);
    assert_eq!(a.energy, b.energy);
    assert!(a.acceptance_rate > 0.0 && a.acceptance_rate < 1.0);
    println!("acceptance rate {}", a.acceptance_rate);
}

#[test]
fn pure_estimates_of_x_squared() {
    let x2 = |s: &WalkerState| s.position()[0].powi(2);
    let one = |_: &WalkerState| 1.0;
    for alpha in [1.2, 1.0] {
        let space = harmonic(alpha, 0.02);
        let mut r = rng::stream(8, "pure", alpha.to_bits());
        let cfg = RqmcConfig::new(401, 40_000);
        let res = run_rqmc(
            &space,
            space.state_at(vec![0.0]),
            &cfg,
            &[("x2", &x2), ("one", &one)],
            &mut r,
        )
        .unwrap();
        let est = res.pure["x2"];
        assert!(est.deviation_sigma(0.5) < 3.0, "α={alpha}: {est:?}");
        assert_eq!(res.pure["one"].mean, 1.0);
    }
}

#[test]
fn mixed_energy_does_not_exceed_vmc() {
    let space = harmonic(1.2, 0.01);
    let mut r = rng::stream(9, "variational", 0);
    let (series, _) = space
        .sample_series(space.state_at(vec![0.0]), 1_000_000, 10_000, &mut r)
        .unwrap();
    let vmc = vmc_estimate(&series).unwrap();
    let cfg = RqmcConfig::new(301, 20_000);
    let res = run_rqmc(&space, space.state_at(vec![0.0]), &cfg, &[], &mut r).unwrap();
    let combined = (vmc.std_error.powi(2) + res.energy.std_error.powi(2)).sqrt();
    assert!(
        res.energy.mean <= vmc.mean + 3.0 * combined,
        "{:?} vs {vmc:?}",
        res.energy
    );
}

#[test]
fn reweighted_action_matches_random_walk_moments() {
    let eps = 0.02;
    let n_beads = 51;
    let space = harmonic(1.2, eps);
    let mut r = rng::stream(10, "action-consistency", 0);
    let (series, _) = space
        .sample_series(space.state_at(vec![0.0]), 2_000_000, 10_000, &mut r)
        .unwrap();
    let tau = (n_beads - 1) as f64 * eps;
    let walk = action_moments(&series, &[tau], 2).unwrap();
    let mut cfg = RqmcConfig::new(n_beads, 200_000);
    cfg.probe_steps = 0;
    let res = run_rqmc(&space, space.state_at(vec![0.0]), &cfg, &[], &mut r).unwrap();
    let re = reweighted_action_moments(&res.records, 2, 20).unwrap();
    for k in 1..=2 {
        let fact = if k == 2 { 2.0 } else { 1.0 };
        let walk_mean = walk.lambda[0][k] * fact;
        let walk_err = walk.lambda_error[0][k] * fact;
        let sigma = (walk_err.powi(2) + re[k - 1].std_error.powi(2)).sqrt();
        assert!(
            (re[k - 1].mean - walk_mean).abs() < 3.0 * sigma,
            "order {k}: {:?} vs {walk_mean} ± {walk_err}",
            re[k - 1]
        );
    }
}

#[test]
#[ignore]
fn explore_energies() {
    for (eps, beads) in [(0.05, 101), (0.025, 201)] {
        let space = harmonic(1.2, eps);
        let mut r = rng::stream(1, "explore", 0);
        let cfg = RqmcConfig::new(beads, 200_000);
        let res = run_rqmc(&space, space.state_at(vec![0.0]), &cfg, &[], &mut r).unwrap();
        println!(
            "eps {eps} {:?} acc {} burn {} warn {:?}",
            res.energy, res.acceptance_rate, res.burn_in_sweeps, res.warnings
        );
    }
}
