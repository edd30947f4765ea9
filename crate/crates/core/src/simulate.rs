//! Seeded Monte Carlo: path sampling, regeneration blocks, empirical variance
//! with CLT diagnostics, and step-level ERW simulators built from the prose
//! process definitions rather than the matrix encodings.

use rayon::prelude::*;

use crate::erw::{DisorderedState, ErwParams, OrderedState};
use crate::error::{ChainError, Result};
use crate::markov::{Observable, ProbabilityVector, TransitionMatrix};
use crate::rng::{derive_stream, SplitMix64};
use crate::stats;
use crate::variance;

/// Variances at or below this are treated as degenerate (point-mass limit).
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Where a sampled path starts.
#[derive(Debug, Clone)]
pub enum Start {
    State(usize),
    Distribution(ProbabilityVector),
}

/// A sampled path X_0 .. X_n together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub seed: u64,
}

/// Block sums and lengths between consecutive visits to the regeneration
/// state; `z0` covers the initial segment before the first visit.
#[derive(Debug, Clone)]
pub struct RegenerationBlocks {
    pub block_sums: Vec<f64>,
    pub block_lengths: Vec<usize>,
    pub z0: f64,
}

/// Normality diagnostics of the standardized samples I_n(f_bar)/sqrt(n s^2).
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_statistic: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub empirical_pi: ProbabilityVector,
    pub var_estimate: f64,
    /// Absent when reps < 2.
    pub var_stderr: Option<f64>,
    pub mean_estimate: f64,
    /// Absent when the analytic variance is degenerate.
    pub diagnostics: Option<Diagnostics>,
    pub degenerate: bool,
    /// Analytic sigma^2 used for standardization.
    pub sigma2_analytic: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
}

fn cumulative_rows(p: &TransitionMatrix) -> Vec<Vec<f64>> {
    let n = p.n_states();
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    acc += p.entry(i, j);
                    acc
                })
                .collect();
            row[n - 1] = 1.0;
            row
        })
        .collect()
}

fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn initial_state(
    start: &Start,
    n_states: usize,
    rng: &mut SplitMix64,
) -> Result<usize> {
    match start {
        Start::State(i) => {
            if *i >= n_states {
                Err(ChainError::InvalidStart(*i))
            } else {
                Ok(*i)
            }
        }
        Start::Distribution(mu) => {
            if mu.len() != n_states {
                return Err(ChainError::LengthMismatch {
                    expected: n_states,
                    found: mu.len(),
                });
            }
            let u = rng.next_f64();
            let mut acc = 0.0;
            for i in 0..n_states {
                acc += mu.get(i);
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(n_states - 1)
        }
    }
}

/// Samples X_0 .. X_n by inverse-CDF transitions; deterministic given the seed.
pub fn sample_path(
    p: &TransitionMatrix,
    start: &Start,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = SplitMix64::new(seed);
    let cdf = cumulative_rows(p);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = initial_state(start, p.n_states(), &mut rng)?;
    states.push(x);
    for _ in 0..n {
        x = sample_index(&cdf[x], rng.next_f64());
        states.push(x);
    }
    Ok(Trajectory { states, seed })
}

/// I_n(f) = sum_{k=0}^{n-1} f(X_k); the final state is excluded.
pub fn additive_functional(traj: &Trajectory, f: &Observable) -> Result<f64> {
    let n = traj.states.len() - 1;
    for &x in &traj.states[..n] {
        if x >= f.len() {
            return Err(ChainError::LengthMismatch {
                expected: x + 1,
                found: f.len(),
            });
        }
    }
    Ok(traj.states[..n].iter().map(|&x| f.get(x)).sum())
}

/// Splits a trajectory at its visits to `i0` (at times >= 1). Needs at least
/// two visits; the tail after the last visit is discarded.
pub fn regeneration_blocks(
    traj: &Trajectory,
    i0: usize,
    f: &Observable,
) -> Result<RegenerationBlocks> {
    let visits: Vec<usize> = traj
        .states
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(_, &x)| x == i0)
        .map(|(t, _)| t)
        .collect();
    if visits.len() < 2 {
        return Err(ChainError::InsufficientVisits(i0));
    }
    let z0 = traj.states[..visits[0]].iter().map(|&x| f.get(x)).sum();
    let mut block_sums = Vec::with_capacity(visits.len() - 1);
    let mut block_lengths = Vec::with_capacity(visits.len() - 1);
    for w in visits.windows(2) {
        let (a, b) = (w[0], w[1]);
        block_sums.push(traj.states[a..b].iter().map(|&x| f.get(x)).sum());
        block_lengths.push(b - a);
    }
    Ok(RegenerationBlocks {
        block_sums,
        block_lengths,
        z0,
    })
}

/// Visit frequencies of X_0 .. X_{n-1}.
pub fn empirical_stationary(traj: &Trajectory, n_states: usize) -> ProbabilityVector {
    let upto = (traj.states.len() - 1).max(1);
    let mut counts = vec![0.0; n_states];
    for &x in &traj.states[..upto] {
        counts[x] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    ProbabilityVector::new(counts.into_iter().map(|c| c / total).collect())
        .expect("frequencies form a distribution")
}

struct ReplicaOutcome {
    functional: f64,
    counts: Vec<u64>,
}

/// Monte Carlo estimate of sigma^2_f as the mean of I_n(f_bar)^2 / n over
/// independent replicas, with normality diagnostics on the standardized
/// samples. Centering uses the analytic stationary distribution. Replicas
/// run in parallel but are merged in replica-index order, so the result is
/// independent of thread count.
pub fn empirical_variance(
    p: &TransitionMatrix,
    f: &Observable,
    n: usize,
    reps: usize,
    start: &Start,
    seed: u64,
) -> Result<SimulationReport> {
    if n < 1 || reps < 1 {
        return Err(ChainError::InvalidParams(format!(
            "need n >= 1 and reps >= 1, got n = {n}, reps = {reps}"
        )));
    }
    let n_states = p.n_states();
    let pi = crate::markov::stationary(p)?;
    let fbar = crate::markov::center(f, &pi)?;
    let sigma2 = variance::asymptotic_variance(p, f)?.sigma2;
    // validate the start once up front so replicas cannot fail
    initial_state(start, n_states, &mut SplitMix64::new(seed))?;

    let cdf = cumulative_rows(p);
    let fb = fbar.values().to_vec();
    let outcomes: Vec<ReplicaOutcome> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = SplitMix64::new(derive_stream(seed, r as u64));
            let mut x = initial_state(start, n_states, &mut rng).expect("validated start");
            let mut sum = 0.0;
            let mut counts = vec![0u64; n_states];
            for _ in 0..n {
                sum += fb[x];
                counts[x] += 1;
                x = sample_index(&cdf[x], rng.next_f64());
            }
            ReplicaOutcome {
                functional: sum,
                counts,
            }
        })
        .collect();

    let mut total_counts = vec![0u64; n_states];
    let mut samples = Vec::with_capacity(reps);
    for o in &outcomes {
        samples.push(o.functional);
        for (t, c) in total_counts.iter_mut().zip(&o.counts) {
            *t += c;
        }
    }
    let steps = (n * reps) as f64;
    let empirical_pi = ProbabilityVector::new(
        total_counts.iter().map(|&c| c as f64 / steps).collect(),
    )
    .expect("visit frequencies form a distribution");

    let nf = n as f64;
    let squares: Vec<f64> = samples.iter().map(|s| s * s / nf).collect();
    let var_estimate = stats::mean(&squares);
    let var_stderr = if reps >= 2 {
        Some((stats::sample_variance(&squares) / reps as f64).sqrt())
    } else {
        None
    };
    let mean_estimate = stats::mean(&samples) / nf;

    let degenerate = sigma2 <= DEGENERATE_TOL;
    let diagnostics = if degenerate {
        None
    } else {
        let scale = (nf * sigma2).sqrt();
        let z: Vec<f64> = samples.iter().map(|s| s / scale).collect();
        Some(Diagnostics {
            skewness: stats::skewness(&z),
            excess_kurtosis: stats::excess_kurtosis(&z),
            ks_statistic: stats::ks_statistic(&z),
        })
    };

    Ok(SimulationReport {
        empirical_pi,
        var_estimate,
        var_stderr,
        mean_estimate,
        diagnostics,
        degenerate,
        sigma2_analytic: sigma2,
        n,
        reps,
        seed,
    })
}

/// One step of the disordered ERW, straight from the process definition:
/// sample a sign from the jar without replacement, accept with probability p
/// (otherwise flip), put the new sign back.
pub fn step_disordered(
    params: &ErwParams,
    state: &DisorderedState,
    rng: &mut SplitMix64,
) -> DisorderedState {
    let l = params.l();
    let sampled_plus = rng.next_f64() < state.pluses as f64 / l as f64;
    let accept = rng.next_f64() < params.p();
    let new_plus = sampled_plus == accept;
    let pluses = state.pluses - usize::from(sampled_plus) + usize::from(new_plus);
    DisorderedState {
        sign: if new_plus { 1 } else { -1 },
        pluses,
    }
}

/// One step of the ordered ERW: sample a sign proportionally to its count in
/// the list, accept with probability p (otherwise flip), append the new sign
/// at position L-1 and drop position 0.
pub fn step_ordered(
    params: &ErwParams,
    state: &OrderedState,
    rng: &mut SplitMix64,
) -> OrderedState {
    let l = params.l();
    let sampled_one = rng.next_f64() < state.ones() as f64 / l as f64;
    let accept = rng.next_f64() < params.p();
    let s = u32::from(sampled_one == accept);
    OrderedState {
        word: (state.word >> 1) | (s << (l - 1)),
    }
}
