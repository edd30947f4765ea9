//! The `verify` subcommand: re-runs the closed-form grids and simulator
//! cross-checks and reports one ok/FAIL line per check.

use chainvar::erw::{self, DisorderedState, ErwParams, OrderedState};
use chainvar::markov::{self, Observable, TransitionMatrix};
use chainvar::rng::{derive_stream, SplitMix64};
use chainvar::simulate::{self, step_disordered, step_ordered};
use chainvar::variance;

fn random_chain(rng: &mut SplitMix64, n: usize) -> TransitionMatrix {
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

fn random_reversible_chain(rng: &mut SplitMix64, n: usize) -> TransitionMatrix {
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

fn random_observable(rng: &mut SplitMix64, n: usize) -> Observable {
    Observable::new((0..n).map(|_| 2.0 * rng.next_f64() - 1.0).collect()).unwrap()
}

fn p_grid() -> Vec<f64> {
    (0..=9).map(|k| k as f64 / 10.0).collect()
}

fn two_state_routes() -> Result<(), String> {
    let p = TransitionMatrix::new(
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let f = Observable::new(vec![-1.0, 1.0]).unwrap();
    let values = [
        variance::asymptotic_variance(&p, &f).map_err(|e| e.to_string())?.sigma2,
        variance::cycle_variance(&p, &f, 0).map_err(|e| e.to_string())?.sigma2,
        variance::cycle_variance(&p, &f, 1).map_err(|e| e.to_string())?.sigma2,
        variance::reversible_variance(&p, &f).map_err(|e| e.to_string())?.sigma2,
        variance::two_state_variance(&p, &f).map_err(|e| e.to_string())?.sigma2,
    ];
    for v in values {
        if (v - 1.0).abs() > 1e-10 {
            return Err(format!("route gave {v}, expected 1"));
        }
    }
    Ok(())
}

fn route_agreement(trials: usize, perturb: bool) -> Result<(), String> {
    let mut rng = SplitMix64::new(0x7e41f4_0001);
    for trial in 0..trials {
        let n = 2 + (trial % 7);
        let reversible = trial % 3 == 0;
        let mut p = if reversible {
            random_reversible_chain(&mut rng, n)
        } else {
            random_chain(&mut rng, n)
        };
        if perturb && trial == 0 {
            // negative control: break row-stochasticity by 1e-3 in one entry
            let rows = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| p.entry(i, j) + if i == 0 && j == 0 { 1e-3 } else { 0.0 })
                        .collect()
                })
                .collect();
            p = TransitionMatrix::from_rows_unchecked(rows, p.labels().to_vec());
        }
        let f = random_observable(&mut rng, n);
        let base = variance::asymptotic_variance(&p, &f)
            .map_err(|e| format!("trial {trial}: {e}"))?
            .sigma2;
        for i0 in 0..n {
            let cyc = variance::cycle_variance(&p, &f, i0)
                .map_err(|e| format!("trial {trial}: {e}"))?
                .sigma2;
            if (base - cyc).abs() > 1e-8 {
                return Err(format!(
                    "trial {trial} i0={i0}: poisson {base} vs cycle {cyc}"
                ));
            }
        }
        if reversible {
            let spectral = variance::reversible_variance(&p, &f)
                .map_err(|e| format!("trial {trial}: {e}"))?
                .sigma2;
            if (base - spectral).abs() > 1e-8 {
                return Err(format!("trial {trial}: poisson {base} vs spectral {spectral}"));
            }
        }
    }
    Ok(())
}

fn disordered_grid(l_max: usize) -> Result<(), String> {
    for l in 1..=l_max {
        for &p in &p_grid() {
            let params = ErwParams::new(l, p).unwrap();
            let (q, f) = erw::build_disordered(&params);
            let got = variance::asymptotic_variance(&q, &f)
                .map_err(|e| e.to_string())?
                .sigma2;
            let want = erw::disordered_variance(&params);
            if (got - want).abs() > 1e-9 {
                return Err(format!("L={l} p={p}: {got} vs {want}"));
            }
            let pi_closed = erw::disordered_stationary(&params);
            let pi_solved = markov::stationary(&q).map_err(|e| e.to_string())?;
            for i in 0..q.n_states() {
                if (pi_closed.get(i) - pi_solved.get(i)).abs() > 1e-10 {
                    return Err(format!("L={l} p={p}: stationary mismatch at {i}"));
                }
            }
        }
    }
    Ok(())
}

fn ordered_grid(l_max: usize) -> Result<(), String> {
    for l in 1..=l_max {
        for &p in &p_grid() {
            let params = ErwParams::new(l, p).unwrap();
            let (q, f) = erw::build_ordered(&params).map_err(|e| e.to_string())?;
            let got = variance::asymptotic_variance(&q, &f)
                .map_err(|e| e.to_string())?
                .sigma2;
            let want = erw::ordered_variance(&params);
            if (got - want).abs() > 1e-9 {
                return Err(format!("L={l} p={p}: {got} vs {want}"));
            }
        }
    }
    Ok(())
}

fn correlation_series(l_max: usize) -> Result<(), String> {
    for l in 1..=l_max {
        for &p in &p_grid() {
            if l == 1 && p == 0.0 {
                // the correlation sequence alternates +-1/4 and never decays
                continue;
            }
            let params = ErwParams::new(l, p).unwrap();
            let series = erw::rho_bar_sequence(&params, 100_000);
            let mut sum = 0.0;
            let mut small_run = 0;
            for &r in series.rho_bar.iter().skip(1) {
                if r.abs() < 1e-14 {
                    small_run += 1;
                    if small_run >= l {
                        break;
                    }
                } else {
                    small_run = 0;
                }
                sum += r;
            }
            let lhs = 0.25 + 2.0 * sum;
            let rhs = erw::ordered_variance(&params) / 4.0;
            if (lhs - rhs).abs() > 1e-8 {
                return Err(format!("L={l} p={p}: series {lhs} vs {rhs}"));
            }
            if l >= 2 {
                let radius =
                    erw::recursion_spectral_check(&params).map_err(|e| e.to_string())?;
                if radius >= 1.0 {
                    return Err(format!("L={l} p={p}: spectral radius {radius}"));
                }
            }
        }
    }
    Ok(())
}

fn check_row(
    q: &TransitionMatrix,
    start: usize,
    counts: &[u64],
    trials: u64,
    what: &str,
) -> Result<(), String> {
    let t = trials as f64;
    for j in 0..q.n_states() {
        let prob = q.entry(start, j);
        let freq = counts[j] as f64 / t;
        if prob == 0.0 {
            if counts[j] != 0 {
                return Err(format!("{what} start={start} j={j}: impossible move seen"));
            }
        } else {
            let band = 3.0 * (prob * (1.0 - prob) / t).sqrt();
            if (freq - prob).abs() > band {
                return Err(format!(
                    "{what} start={start} j={j}: freq {freq} vs prob {prob}"
                ));
            }
        }
    }
    Ok(())
}

fn step_simulators(l_max: usize, trials: u64) -> Result<(), String> {
    for l in 1..=l_max {
        for &p in &[0.3, 0.75] {
            let params = ErwParams::new(l, p).unwrap();

            let (qd, _) = erw::build_disordered(&params);
            for idx in 0..qd.n_states() {
                let state = DisorderedState::from_index(idx, l);
                let mut rng = SplitMix64::new(derive_stream(
                    0x57e9_0002 ^ p.to_bits(),
                    ((l as u64) << 8) | idx as u64,
                ));
                let mut counts = vec![0u64; qd.n_states()];
                for _ in 0..trials {
                    let next = step_disordered(&params, &state, &mut rng);
                    counts[next.index(l)] += 1;
                }
                check_row(&qd, idx, &counts, trials, "unordered")?;
            }

            let (qo, _) = erw::build_ordered(&params).map_err(|e| e.to_string())?;
            for word in 0..qo.n_states() as u32 {
                let state = OrderedState { word };
                let mut rng = SplitMix64::new(derive_stream(
                    0x07de_0000 ^ p.to_bits(),
                    ((l as u64) << 16) | word as u64,
                ));
                let mut counts = vec![0u64; qo.n_states()];
                for _ in 0..trials {
                    let next = step_ordered(&params, &state, &mut rng);
                    counts[next.word as usize] += 1;
                }
                check_row(&qo, word as usize, &counts, trials, "ordered")?;
            }
        }
    }
    Ok(())
}

fn monte_carlo_spot_check(n: usize, reps: usize) -> Result<(), String> {
    let params = ErwParams::new(4, 0.3).unwrap();
    let (q, f) = erw::build_ordered(&params).map_err(|e| e.to_string())?;
    let closed = erw::ordered_variance(&params);
    let report =
        simulate::empirical_variance(&q, &f, n, reps, &simulate::Start::State(0), 0)
            .map_err(|e| e.to_string())?;
    let band = 3.0 * report.var_stderr.unwrap_or(0.0) + 5.0 * closed / (n as f64).sqrt();
    if (report.var_estimate - closed).abs() > band {
        return Err(format!(
            "estimate {} vs closed form {closed} (band {band})",
            report.var_estimate
        ));
    }
    Ok(())
}

/// Runs every check, prints one line per check, returns true iff all passed.
pub fn run(quick: bool, perturb: bool) -> bool {
    let (fuzz, l_dis, l_ord, l_step, trials, mc_n, mc_reps) = if quick {
        (20, 4, 6, 2, 200_000u64, 5_000, 200)
    } else {
        (200, 8, 10, 4, 1_000_000u64, 10_000, 2_000)
    };
    let checks: Vec<(&str, Result<(), String>)> = vec![
        ("two-state routes", two_state_routes()),
        ("route agreement fuzz", route_agreement(fuzz, perturb)),
        ("unordered grid", disordered_grid(l_dis)),
        ("ordered grid", ordered_grid(l_ord)),
        ("correlation series", correlation_series(l_ord)),
        ("step simulators vs matrices", step_simulators(l_step, trials)),
        ("Monte Carlo spot check", monte_carlo_spot_check(mc_n, mc_reps)),
    ];
    let mut ok = true;
    for (name, result) in checks {
        match result {
            Ok(()) => println!("ok    {name}"),
            Err(msg) => {
                ok = false;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{}", if ok { "verify: all checks passed" } else { "verify: FAILED" });
    ok
}
