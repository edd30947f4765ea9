//! Cross-checks against independent computations: dynamic-programming block
//! moments, Monte Carlo regeneration statistics, polynomial root finding, and
//! matrix-power correlation sums. Each check pins a value the library computes
//! by a completely different mechanism.

mod common;

use chainvar::erw::{self, ErwParams};
use chainvar::markov::{self, Observable, TransitionMatrix};
use chainvar::rng::SplitMix64;
use chainvar::simulate::{self, Start};
use chainvar::variance;

fn two_state(p12: f64, p21: f64) -> TransitionMatrix {
    TransitionMatrix::new(
        vec![vec![1.0 - p12, p12], vec![p21, 1.0 - p21]],
        vec!["a".into(), "b".into()],
    )
    .unwrap()
}

#[test]
fn potential_moments_match_dp_on_random_chains() {
    let mut rng = SplitMix64::new(0x0f0e0d0c0b0a0908);
    for trial in 0..40 {
        let n = 2 + (trial % 5);
        let p = common::random_chain(&mut rng, n);
        let f = common::random_observable(&mut rng, n);
        let pi = markov::stationary(&p).unwrap();
        let g = markov::center(&f, &pi).unwrap();
        for i0 in 0..n {
            let u = markov::potential(&p, &g, i0).unwrap();
            let u2 = markov::potential_second_moment(&p, &g, i0).unwrap();
            for start in 0..n {
                let (m1, m2) = common::block_moments_dp(&p, &g, i0, start, 2500);
                assert!(
                    (u.get(start) - m1).abs() <= 1e-8,
                    "trial {trial} i0={i0} start={start}: U {} vs DP {}",
                    u.get(start),
                    m1
                );
                assert!(
                    (u2.get(start) - m2).abs() <= 1e-8,
                    "trial {trial} i0={i0} start={start}: U2 {} vs DP {}",
                    u2.get(start),
                    m2
                );
            }
        }
    }
}

#[test]
fn cycle_variance_matches_dp_second_moment() {
    let mut rng = SplitMix64::new(0x1122334455667788);
    for trial in 0..25 {
        let n = 2 + (trial % 5);
        let p = common::random_chain(&mut rng, n);
        let f = common::random_observable(&mut rng, n);
        let pi = markov::stationary(&p).unwrap();
        let g = markov::center(&f, &pi).unwrap();
        let base = variance::asymptotic_variance(&p, &f).unwrap().sigma2;
        for i0 in 0..n {
            let (m1, m2) = common::block_moments_dp(&p, &g, i0, i0, 2500);
            let sigma2 = pi.get(i0) * (m2 - m1 * m1);
            assert!(
                (base - sigma2).abs() <= 1e-7,
                "trial {trial} i0={i0}: {base} vs DP {sigma2}"
            );
        }
    }
}

#[test]
fn regeneration_blocks_reproduce_potentials() {
    // Asymmetric two-state chain, centered +-1 observable, regeneration at 0.
    let p = two_state(0.3, 0.6);
    let pi = markov::stationary(&p).unwrap();
    let f = Observable::new(vec![-1.0, 1.0]).unwrap();
    let g = markov::center(&f, &pi).unwrap();
    let i0 = 0;
    let n_steps = 2_000_000;
    let traj = simulate::sample_path(&p, &Start::State(i0), n_steps, 7).unwrap();
    let blocks = simulate::regeneration_blocks(&traj, i0, &g).unwrap();
    let m = blocks.block_sums.len() as f64;
    assert!(m > 100_000.0);

    let mean: f64 = blocks.block_sums.iter().sum::<f64>() / m;
    let second: f64 = blocks.block_sums.iter().map(|z| z * z).sum::<f64>() / m;
    let var_z = second - mean * mean;
    let se_mean = (var_z / m).sqrt();

    // block sums of the centered observable have mean zero
    assert!(mean.abs() <= 4.0 * se_mean, "mean {mean} se {se_mean}");

    // second moment matches the DP oracle and the solver
    let (_, m2) = common::block_moments_dp(&p, &g, i0, i0, 4000);
    let u2 = markov::potential_second_moment(&p, &g, i0).unwrap();
    assert!((u2.get(i0) - m2).abs() <= 1e-9);
    let fourth: f64 = blocks.block_sums.iter().map(|z| z.powi(4)).sum::<f64>() / m;
    let se_second = ((fourth - second * second) / m).sqrt();
    assert!(
        (second - m2).abs() <= 4.0 * se_second,
        "second {second} dp {m2} se {se_second}"
    );

    // mean block length is 1 / pi(i0)
    let mean_len: f64 =
        blocks.block_lengths.iter().map(|&l| l as f64).sum::<f64>() / m;
    let len2: f64 = blocks
        .block_lengths
        .iter()
        .map(|&l| (l as f64).powi(2))
        .sum::<f64>()
        / m;
    let se_len = ((len2 - mean_len * mean_len) / m).sqrt();
    assert!(
        (mean_len - 1.0 / pi.get(i0)).abs() <= 4.0 * se_len,
        "mean length {mean_len} vs {}",
        1.0 / pi.get(i0)
    );

    // consecutive block sums are uncorrelated
    let k = blocks.block_sums.len() - 1;
    let lag1: f64 = (0..k)
        .map(|j| (blocks.block_sums[j] - mean) * (blocks.block_sums[j + 1] - mean))
        .sum::<f64>()
        / k as f64
        / var_z;
    assert!(lag1.abs() <= 4.0 / (k as f64).sqrt(), "lag-1 corr {lag1}");
}

#[test]
fn recursion_spectral_radius_matches_root_finder() {
    // x^L = c (x^{L-1} + ... + 1): monic coefficients are all -c.
    for l in 2..=6 {
        for p10 in 0..=9 {
            let p = p10 as f64 / 10.0;
            let params = ErwParams::new(l, p).unwrap();
            let got = erw::recursion_spectral_check(&params).unwrap();
            let c = (2.0 * p - 1.0) / l as f64;
            let want = if c == 0.0 {
                0.0
            } else {
                common::max_root_modulus(&vec![-c; l])
            };
            assert!(
                (got - want).abs() <= 1e-8,
                "L={l} p={p}: spectral {got} vs roots {want}"
            );
            assert!(got < 1.0);
        }
    }
}

#[test]
fn rho_bar_matches_matrix_power_correlations() {
    // rho_bar_n = E_pi[f(X_0) f(X_n)] / 4 for the ordered step observable.
    for l in [2usize, 3, 5, 8] {
        for p10 in [0, 3, 5, 7, 9] {
            let p = p10 as f64 / 10.0;
            let params = ErwParams::new(l, p).unwrap();
            let (q, f) = erw::build_ordered(&params).unwrap();
            let pi = erw::ordered_stationary(&params).unwrap();
            let series = erw::rho_bar_sequence(&params, 30);
            let ns = q.n_states();
            let mut v = f.clone();
            for n in 0..=30 {
                let corr: f64 =
                    (0..ns).map(|i| pi.get(i) * f.get(i) * v.get(i)).sum();
                assert!(
                    (series.rho_bar[n] - corr / 4.0).abs() <= 1e-10,
                    "L={l} p={p} n={n}: {} vs {}",
                    series.rho_bar[n],
                    corr / 4.0
                );
                v = q.apply(&v);
            }
        }
    }
}

#[test]
fn finite_horizon_variance_approaches_asymptotic() {
    let p = two_state(0.3, 0.6);
    let f = Observable::new(vec![-1.0, 1.0]).unwrap();
    let sigma2 = variance::asymptotic_variance(&p, &f).unwrap().sigma2;
    let mut prev_gap = f64::INFINITY;
    for n in [250usize, 1000, 4000] {
        let vn = common::exact_finite_n_variance(&p, &f, n);
        let gap = (vn - sigma2).abs();
        assert!(gap < prev_gap, "gap not shrinking at n={n}");
        prev_gap = gap;
    }
    assert!(prev_gap <= 0.01 * sigma2);
}

#[test]
fn sampled_path_visits_match_stationary_law() {
    let params = ErwParams::new(4, 0.3).unwrap();
    let (q, _) = erw::build_ordered(&params).unwrap();
    let pi = erw::ordered_stationary(&params).unwrap();
    let traj = simulate::sample_path(&q, &Start::State(0), 1_000_000, 11).unwrap();
    let emp = simulate::empirical_stationary(&traj, q.n_states());
    let tv: f64 = (0..q.n_states())
        .map(|i| (emp.get(i) - pi.get(i)).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.01, "total variation {tv}");
}
