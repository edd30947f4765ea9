mod verify;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chainvar::erw::{self, ErwParams, ORDERED_L_MAX};
use chainvar::markov::{self, Observable, TransitionMatrix};
use chainvar::rng::derive_stream;
use chainvar::simulate::{self, Start};
use chainvar::variance;
use chainvar::ChainFile;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Largest memory length for which the unordered walk gets a dense
/// matrix-route column (2L states).
const DISORDERED_L_MAX: usize = 1024;

#[derive(Parser)]
#[command(name = "chainvar", version, about = "Asymptotic variance of Markov chain additive functionals: analytic routes, memory-walk tables, and seeded Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// unordered jar of the last L signs
    Disordered,
    /// ordered list of the last L signs
    Ordered,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary law, reversibility, and every applicable variance route for a chain file
    Analyze {
        /// chain JSON file with labels, P, and f
        #[arg(long)]
        input: PathBuf,
        /// regeneration state label for the cycle route (default: first state)
        #[arg(long)]
        i0: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variance table for the memory walks: closed form, matrix route, Monte Carlo
    Erw {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long = "L")]
        l: usize,
        /// acceptance probabilities; comma list emits one row per value
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// steps per Monte Carlo replica
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation report for a chain file or a memory walk
    Simulate {
        /// chain JSON file; mutually exclusive with --model
        #[arg(long, conflicts_with = "model")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, requires = "l", requires = "p")]
        model: Option<Model>,
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// start state label (default: first state)
        #[arg(long)]
        i0: Option<String>,
        /// also dump one trajectory as CSV to this path
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the closed-form grids and cross-checks; nonzero exit on any failure
    Verify {
        /// reduced grid, finishes in well under a minute
        #[arg(long)]
        quick: bool,
        /// negative control: corrupt one matrix entry and expect a failure
        #[arg(long, hide = true)]
        perturb: bool,
    },
}

/// Rounds to 12 significant digits so serialized reports are stable.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

fn num(x: f64) -> String {
    format!("{}", sig12(x))
}

/// Quotes a CSV field when it contains a delimiter or quote.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_chain(path: &PathBuf) -> Result<(TransitionMatrix, Option<Observable>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let file = ChainFile::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(file.build()?)
}

fn label_index(p: &TransitionMatrix, label: &str) -> Result<usize> {
    p.labels()
        .iter()
        .position(|l| l == label)
        .with_context(|| format!("no state labelled {label:?}"))
}

fn cmd_analyze(
    input: PathBuf,
    i0: Option<String>,
    format: Format,
    out: Option<PathBuf>,
) -> Result<()> {
    let (p, f) = load_chain(&input)?;
    let f = f.context("analyze needs an observable: add \"f\" to the chain file")?;
    let i0 = match &i0 {
        Some(label) => label_index(&p, label)?,
        None => 0,
    };
    let pi = markov::stationary(&p)?;
    let reversible = variance::is_reversible(&p, &pi);

    let base = variance::asymptotic_variance(&p, &f)?;
    let mut routes = vec![(base.route.name(), base.sigma2)];
    routes.push((
        "cycle",
        variance::cycle_variance(&p, &f, i0)?.sigma2,
    ));
    if reversible {
        routes.push(("spectral", variance::reversible_variance(&p, &f)?.sigma2));
    }
    if p.n_states() == 2 {
        routes.push(("closed_form", variance::two_state_variance(&p, &f)?.sigma2));
    }

    let route_docs: Vec<Value> = routes
        .iter()
        .map(|(name, v)| {
            json!({
                "route": name,
                "sigma2": sig12(*v),
                "delta_vs_poisson": sig12(v - base.sigma2),
            })
        })
        .collect();
    let text = match format {
        Format::Json => {
            let doc = json!({
                "labels": p.labels(),
                "pi": (0..pi.len()).map(|i| sig12(pi.get(i))).collect::<Vec<_>>(),
                "irreducible": p.is_irreducible(),
                "reversible": reversible,
                "i0": p.labels()[i0],
                "routes": route_docs,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let mut s = String::from("section,name,value\n");
            for (i, label) in p.labels().iter().enumerate() {
                s.push_str(&format!("pi,{},{}\n", csv_field(label), num(pi.get(i))));
            }
            s.push_str(&format!("flag,irreducible,{}\n", p.is_irreducible()));
            s.push_str(&format!("flag,reversible,{reversible}\n"));
            for (name, v) in &routes {
                s.push_str(&format!("sigma2,{name},{}\n", num(*v)));
                s.push_str(&format!("delta,{name},{}\n", num(v - base.sigma2)));
            }
            s
        }
    };
    emit(&text, &out)
}

struct ErwRow {
    p: f64,
    closed: f64,
    matrix: Option<f64>,
    mc: Option<(f64, Option<f64>)>,
    matrix_agrees: Option<bool>,
    mc_agrees: Option<bool>,
}

fn erw_chain(model: Model, params: &ErwParams) -> Result<Option<(TransitionMatrix, Observable)>> {
    match model {
        Model::Disordered if params.l() <= DISORDERED_L_MAX => {
            Ok(Some(erw::build_disordered(params)))
        }
        Model::Ordered if params.l() <= ORDERED_L_MAX => {
            Ok(Some(erw::build_ordered(params)?))
        }
        _ => Ok(None),
    }
}

fn cmd_erw(
    model: Model,
    l: usize,
    ps: Vec<f64>,
    n: usize,
    reps: usize,
    seed: u64,
    format: Format,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut rows = Vec::new();
    for (idx, &p) in ps.iter().enumerate() {
        let params = ErwParams::new(l, p)?;
        let closed = match model {
            Model::Disordered => erw::disordered_variance(&params),
            Model::Ordered => erw::ordered_variance(&params),
        };
        let mut row = ErwRow {
            p,
            closed,
            matrix: None,
            mc: None,
            matrix_agrees: None,
            mc_agrees: None,
        };
        if let Some((q, f)) = erw_chain(model, &params)? {
            let matrix = variance::asymptotic_variance(&q, &f)?.sigma2;
            row.matrix_agrees = Some((matrix - closed).abs() <= 1e-9);
            row.matrix = Some(matrix);
            let report = simulate::empirical_variance(
                &q,
                &f,
                n,
                reps,
                &Start::State(0),
                derive_stream(seed, idx as u64),
            )?;
            let band = 3.0 * report.var_stderr.unwrap_or(0.0)
                + 5.0 * closed / (n as f64).sqrt();
            row.mc_agrees = Some((report.var_estimate - closed).abs() <= band);
            row.mc = Some((report.var_estimate, report.var_stderr));
        }
        rows.push(row);
    }

    let model_name = match model {
        Model::Disordered => "disordered",
        Model::Ordered => "ordered",
    };
    let text = match format {
        Format::Json => {
            let docs: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "model": model_name,
                        "L": l,
                        "p": sig12(r.p),
                        "closed_form": sig12(r.closed),
                        "matrix": r.matrix.map(sig12),
                        "mc_estimate": r.mc.map(|(v, _)| sig12(v)),
                        "mc_stderr": r.mc.and_then(|(_, s)| s.map(sig12)),
                        "matrix_agrees": r.matrix_agrees,
                        "mc_agrees": r.mc_agrees,
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&json!({ "rows": docs }))?)
        }
        Format::Csv => {
            let na = || "n/a".to_string();
            let mut s = String::from(
                "model,L,p,closed_form,matrix,mc_estimate,mc_stderr,matrix_agrees,mc_agrees\n",
            );
            for r in &rows {
                s.push_str(&format!(
                    "{model_name},{l},{},{},{},{},{},{},{}\n",
                    num(r.p),
                    num(r.closed),
                    r.matrix.map(num).unwrap_or_else(na),
                    r.mc.map(|(v, _)| num(v)).unwrap_or_else(na),
                    r.mc.and_then(|(_, s)| s.map(num)).unwrap_or_else(na),
                    r.matrix_agrees.map(|b| b.to_string()).unwrap_or_else(na),
                    r.mc_agrees.map(|b| b.to_string()).unwrap_or_else(na),
                ));
            }
            s
        }
    };
    emit(&text, &out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    input: Option<PathBuf>,
    model: Option<Model>,
    l: Option<usize>,
    p: Option<f64>,
    n: usize,
    reps: usize,
    seed: u64,
    i0: Option<String>,
    traj: Option<PathBuf>,
    format: Format,
    out: Option<PathBuf>,
) -> Result<()> {
    let (q, f) = match (&input, model) {
        (Some(path), None) => {
            let (q, f) = load_chain(path)?;
            let f = f.context("simulate needs an observable: add \"f\" to the chain file")?;
            (q, f)
        }
        (None, Some(model)) => {
            let params = ErwParams::new(l.unwrap(), p.unwrap())?;
            match model {
                Model::Disordered => erw::build_disordered(&params),
                Model::Ordered => erw::build_ordered(&params)?,
            }
        }
        _ => bail!("provide exactly one of --input or --model"),
    };
    let start = match &i0 {
        Some(label) => label_index(&q, label)?,
        None => 0,
    };
    if reps == 1 {
        eprintln!("warning: reps = 1, variance standard error omitted");
    }
    let report = simulate::empirical_variance(&q, &f, n, reps, &Start::State(start), seed)?;

    if let Some(path) = &traj {
        let t = simulate::sample_path(&q, &Start::State(start), n, seed)?;
        let mut s = String::from("step,state_index,state_label\n");
        for (step, &x) in t.states.iter().enumerate() {
            s.push_str(&format!("{step},{x},{}\n", csv_field(&q.labels()[x])));
        }
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    }

    let pi: Vec<f64> = (0..report.empirical_pi.len())
        .map(|i| sig12(report.empirical_pi.get(i)))
        .collect();
    let text = match format {
        Format::Json => {
            let doc = json!({
                "labels": q.labels(),
                "empirical_pi": pi,
                "var_estimate": sig12(report.var_estimate),
                "var_stderr": report.var_stderr.map(sig12),
                "mean_estimate": sig12(report.mean_estimate),
                "sigma2_analytic": sig12(report.sigma2_analytic),
                "degenerate": report.degenerate,
                "diagnostics": report.diagnostics.map(|d| json!({
                    "skewness": sig12(d.skewness),
                    "excess_kurtosis": sig12(d.excess_kurtosis),
                    "ks_statistic": sig12(d.ks_statistic),
                })),
                "n": report.n,
                "reps": report.reps,
                "seed": report.seed,
            });
            format!("{}\n", serde_json::to_string_pretty(&doc)?)
        }
        Format::Csv => {
            let na = || "n/a".to_string();
            let mut s = String::from("key,value\n");
            s.push_str(&format!("var_estimate,{}\n", num(report.var_estimate)));
            s.push_str(&format!(
                "var_stderr,{}\n",
                report.var_stderr.map(num).unwrap_or_else(na)
            ));
            s.push_str(&format!("mean_estimate,{}\n", num(report.mean_estimate)));
            s.push_str(&format!("sigma2_analytic,{}\n", num(report.sigma2_analytic)));
            s.push_str(&format!("degenerate,{}\n", report.degenerate));
            for (key, value) in [
                ("skewness", report.diagnostics.map(|d| d.skewness)),
                ("excess_kurtosis", report.diagnostics.map(|d| d.excess_kurtosis)),
                ("ks_statistic", report.diagnostics.map(|d| d.ks_statistic)),
            ] {
                s.push_str(&format!("{key},{}\n", value.map(num).unwrap_or_else(na)));
            }
            s.push_str(&format!("n,{}\n", report.n));
            s.push_str(&format!("reps,{}\n", report.reps));
            s.push_str(&format!("seed,{}\n", report.seed));
            for (i, label) in q.labels().iter().enumerate() {
                s.push_str(&format!("{},{}\n", csv_field(&format!("pi:{label}")), num(pi[i])));
            }
            s
        }
    };
    emit(&text, &out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { input, i0, format, out } => cmd_analyze(input, i0, format, out),
        Command::Erw { model, l, p, n, reps, seed, format, out } => {
            cmd_erw(model, l, p, n, reps, seed, format, out)
        }
        Command::Simulate { input, model, l, p, n, reps, seed, i0, traj, format, out } => {
            cmd_simulate(input, model, l, p, n, reps, seed, i0, traj, format, out)
        }
        Command::Verify { quick, perturb } => {
            if verify::run(quick, perturb) {
                Ok(())
            } else {
                std::process::exit(1);
            }
        }
    }
}
