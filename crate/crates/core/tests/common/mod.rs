//! Shared test helpers: random chain generators and independent oracles.
//! Everything here deliberately avoids the solver paths under test.

#![allow(dead_code)]

use chainvar::markov::{self, Observable, TransitionMatrix};
use chainvar::rng::SplitMix64;

/// Random irreducible chain: every entry at least 0.05 before normalization,
/// so the positivity graph is complete.
pub fn random_chain(rng: &mut SplitMix64, n: usize) -> TransitionMatrix {
    let rows = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.next_f64()).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / sum).collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    TransitionMatrix::new(rows, labels).expect("normalized rows")
}

/// Random reversible chain from symmetric positive weights:
/// P(i,j) = w(i,j) / sum_k w(i,k) with w symmetric satisfies detailed
/// balance for pi proportional to the row sums.
pub fn random_reversible_chain(rng: &mut SplitMix64, n: usize) -> TransitionMatrix {
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = 0.05 + rng.next_f64();
            w[i][j] = v;
            w[j][i] = v;
        }
    }
    let rows = w
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            row.iter().map(|v| v / sum).collect()
        })
        .collect();
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    TransitionMatrix::new(rows, labels).expect("normalized rows")
}

pub fn random_observable(rng: &mut SplitMix64, n: usize) -> Observable {
    Observable::new((0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect()).unwrap()
}

/// Exact E_pi[I_n(f_bar)^2] / n by matrix powers:
/// pi(f_bar^2) + (2/n) sum_{d=1}^{n-1} (n-d) pi(f_bar . P^d f_bar).
pub fn exact_finite_n_variance(p: &TransitionMatrix, f: &Observable, n: usize) -> f64 {
    let pi = markov::stationary(p).unwrap();
    let fbar = markov::center(f, &pi).unwrap();
    let ns = p.n_states();
    let pi_f2: f64 = (0..ns).map(|i| pi.get(i) * fbar.get(i) * fbar.get(i)).sum();
    let mut v = fbar.clone();
    let mut acc = 0.0;
    for d in 1..n {
        v = p.apply(&v);
        let c: f64 = (0..ns).map(|i| pi.get(i) * fbar.get(i) * v.get(i)).sum();
        acc += (n - d) as f64 * c;
    }
    pi_f2 + 2.0 * acc / n as f64
}

/// First and second moments of the regeneration-block sum
/// I_{T_i0}(f) started from `start`, by forward dynamic programming over
/// (state, accumulated-sum moments) truncated at `horizon` steps. The alive
/// mass decays geometrically, so a generous horizon makes the truncation
/// error negligible for well-mixing test chains.
pub fn block_moments_dp(
    p: &TransitionMatrix,
    f: &Observable,
    i0: usize,
    start: usize,
    horizon: usize,
) -> (f64, f64) {
    let n = p.n_states();
    let mut alive = vec![0.0_f64; n];
    let mut m1 = vec![0.0_f64; n];
    let mut m2 = vec![0.0_f64; n];
    alive[start] = 1.0;
    let (mut out1, mut out2) = (0.0, 0.0);
    for _ in 0..horizon {
        let mut na = vec![0.0; n];
        let mut n1 = vec![0.0; n];
        let mut n2 = vec![0.0; n];
        for j in 0..n {
            if alive[j] == 0.0 {
                continue;
            }
            let fj = f.get(j);
            // append f(j) to the running sum before transitioning
            let t1 = m1[j] + fj * alive[j];
            let t2 = m2[j] + 2.0 * fj * m1[j] + fj * fj * alive[j];
            for k in 0..n {
                let w = p.entry(j, k);
                if w == 0.0 {
                    continue;
                }
                if k == i0 {
                    out1 += w * t1;
                    out2 += w * t2;
                } else {
                    na[k] += w * alive[j];
                    n1[k] += w * t1;
                    n2[k] += w * t2;
                }
            }
        }
        alive = na;
        m1 = n1;
        m2 = n2;
    }
    (out1, out2)
}

/// Durand-Kerner root finding for the monic polynomial
/// x^deg + coeffs[deg-1] x^(deg-1) + ... + coeffs[0]; returns max |root|.
pub fn max_root_modulus(coeffs: &[f64]) -> f64 {
    use num_complex::Complex64;
    let deg = coeffs.len();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for k in (0..deg).rev() {
            acc = acc * x + Complex64::new(coeffs[k], 0.0);
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
