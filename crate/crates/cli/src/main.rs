//! `rdl` — command-line front end for the decoupling/coding bound library.
//!
//! Loads states and channels from JSON, runs entropy, bound, Monte Carlo and
//! coding computations, and emits deterministic JSON reports plus optional
//! CSV sweeps of `(alpha, exponent, bound)` rows.
//!
//! Exit codes: 0 success, 2 validation error (malformed input or violated
//! invariant), 3 numerical failure (non-convergence or non-finite result).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons guard NaN

use clap::{Args, Parser, Subcommand};
use rdl_core::coding::{coding_bounds_rates, CodeParams};
use rdl_core::decoupling::{father_exponent, fenchel_check, mother_exponent};
use rdl_core::entropy::{h_cond_petz_down, h_cond_sandwiched, h_cond_vn};
use rdl_core::haar::{mc_operator_expectation, twirl_two_copy, twirl_two_copy_sample};
use rdl_core::json::{CodingTaskJson, InstanceJson, OperatorJson};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Parser)]
#[command(name = "rdl", version, about = "one-shot decoupling and coding bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional entropies of a state at one Renyi order
    Entropy(EntropyArgs),
    /// Optimized achievability bound with an alpha sweep
    DecoupleBound(BoundArgs),
    /// Monte Carlo estimate of the Haar-averaged decoupling error
    DecoupleMc(McArgs),
    /// Optimized strong-converse bound with an alpha sweep
    DecoupleConverse(BoundArgs),
    /// Compare the Monte Carlo two-copy twirl against the exact formula
    TwirlCheck(TwirlArgs),
    /// One-shot coding bounds at a (Q, E) rate pair
    Coding(CodingArgs),
    /// Mother and father exponents of an instance at a rate
    Exponents(ExponentArgs),
    /// Fenchel duality check between the decoupling and protocol exponents
    Fenchel(FenchelArgs),
}

#[derive(Args, Serialize)]
struct EntropyArgs {
    /// Operator JSON file holding the state
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated conditioning labels (the B system)
    #[arg(long, value_delimiter = ',')]
    cond: Vec<String>,
    /// Renyi order (1 gives the von Neumann quantities)
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "nats")]
    units: Units,
    /// Report path; stdout when omitted
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    /// Instance JSON: { rho, channel }, { tau } or an ensemble
    #[arg(long)]
    input: PathBuf,
    /// Points in the alpha sweep
    #[arg(long, default_value_t = 33)]
    alpha_grid: usize,
    /// Write the (alpha, exponent, bound) sweep as CSV
    #[arg(long)]
    #[serde(skip)]
    csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct McArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    streams: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct TwirlArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    streams: u64,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CodingArgs {
    /// Coding-task JSON: { channel, sigma, Q_bits, E_bits }
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExponentArgs {
    /// Instance JSON with a { rho, channel } pair
    #[arg(long)]
    input: PathBuf,
    /// Rate R (in --units)
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value = "nats")]
    units: Units,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FenchelArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rate-grid resolution over [0, ln|A|]
    #[arg(long, default_value_t = 500)]
    grid_points: usize,
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Units {
    Nats,
    Bits,
}

impl Units {
    fn render(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / LN2,
        }
    }

    fn absorb(self, v: f64) -> f64 {
        match self {
            Units::Nats => v,
            Units::Bits => v * LN2,
        }
    }
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<rdl_core::Error> for CliError {
    fn from(e: rdl_core::Error) -> Self {
        match e {
            rdl_core::Error::NonFiniteSample { .. } | rdl_core::Error::NonFiniteObjective(_) => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Entropy(a) => run_entropy(a),
        Command::DecoupleBound(a) => run_bound(a, false),
        Command::DecoupleConverse(a) => run_bound(a, true),
        Command::DecoupleMc(a) => run_mc(a),
        Command::TwirlCheck(a) => run_twirl(a),
        Command::Coding(a) => run_coding(a),
        Command::Exponents(a) => run_exponents(a),
        Command::Fenchel(a) => run_fenchel(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_report<T: Serialize>(output: &Option<PathBuf>, report: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// RDL_SEED overrides the configured seed when set.
fn resolve_seed(seed: u64) -> CliResult<u64> {
    match std::env::var("RDL_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map_err(|_| CliError::Validation(format!("RDL_SEED is not a u64: {v}"))),
        Err(_) => Ok(seed),
    }
}

fn ensure_finite(values: &[f64]) -> CliResult<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical("non-finite result".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct Report<C: Serialize, R: Serialize> {
    command: &'static str,
    config: C,
    result: R,
}

#[derive(Serialize)]
struct EntropyResultJson {
    alpha: f64,
    units: Units,
    h_sandwiched: f64,
    h_petz: f64,
    h_vn: f64,
    iterations: u32,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    optimizer_sigma: OperatorJson,
}

fn run_entropy(args: EntropyArgs) -> CliResult<()> {
    let op: OperatorJson = read_json(&args.input)?;
    let rho = op.to_density()?;
    let sandwiched = h_cond_sandwiched(&rho, &args.cond, args.alpha)?;
    let petz = h_cond_petz_down(&rho, &args.cond, args.alpha)?;
    let vn = h_cond_vn(&rho, &args.cond)?;
    ensure_finite(&[sandwiched.value, petz, vn])?;
    let sigma = sandwiched
        .optimizer_sigma
        .as_ref()
        .expect("conditional entropy always carries an optimizer");
    let result = EntropyResultJson {
        alpha: args.alpha,
        units: args.units,
        h_sandwiched: args.units.render(sandwiched.value),
        h_petz: args.units.render(petz),
        h_vn: args.units.render(vn),
        iterations: sandwiched.iterations,
        converged: sandwiched.converged,
        warning: sandwiched.warning.clone(),
        optimizer_sigma: OperatorJson::from_op(sigma.op()),
    };
    let report = Report {
        command: "entropy",
        config: &args,
        result,
    };
    write_report(&args.output, &report)?;
    if !sandwiched.converged {
        return Err(CliError::Numerical(
            "sigma optimization did not converge".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    exponent: f64,
    bound: f64,
}

#[derive(Serialize)]
struct BoundResultJson {
    best: rdl_core::decoupling::ExponentReport,
    vn_criterion_sum: f64,
    sweep: Vec<SweepRow>,
}

fn write_csv(path: &PathBuf, rows: &[SweepRow]) -> CliResult<()> {
    let mut text = String::from("alpha,exponent,bound\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r.alpha, r.exponent, r.bound));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn run_bound(args: BoundArgs, converse: bool) -> CliResult<()> {
    if args.alpha_grid < 2 {
        return Err(CliError::Validation(
            "alpha grid needs at least 2 points".into(),
        ));
    }
    let instance: InstanceJson = read_json(&args.input)?;
    let joint = instance.to_joint()?;
    let pair = instance.to_pair().ok();
    let rest: Vec<String> = joint.tau().spec().labels()[2..].to_vec();

    let (best, sweep) = if converse {
        let best = match &pair {
            Some(p) => p.best_converse()?,
            None => {
                let tau = joint.tau().clone();
                let rest = rest.clone();
                let (alpha_star, exponent) = rdl_core::entropy::sup_over_alpha(
                    |alpha| Ok((alpha - 1.0) * h_cond_petz_down(&tau, &rest, alpha)?),
                    0.01,
                    0.9999,
                )?;
                rdl_core::decoupling::ExponentReport {
                    alpha_star,
                    exponent,
                    bound: joint.converse_bound(alpha_star)?,
                    positive: exponent > 0.0,
                    converged: true,
                }
            }
        };
        let lo = 0.01;
        let hi = 0.99;
        let mut sweep = Vec::with_capacity(args.alpha_grid);
        for i in 0..args.alpha_grid {
            let alpha = lo + (hi - lo) * i as f64 / (args.alpha_grid - 1) as f64;
            let bound = match &pair {
                Some(p) => p.converse_bound(alpha)?,
                None => joint.converse_bound(alpha)?,
            };
            let exponent = (alpha - 1.0) * h_cond_petz_down(joint.tau(), &rest, alpha)?;
            sweep.push(SweepRow {
                alpha,
                exponent,
                bound,
            });
        }
        (best, sweep)
    } else {
        let best = match &pair {
            Some(p) => p.best_achievability()?,
            None => joint.best_achievability()?,
        };
        let mut sweep = Vec::with_capacity(args.alpha_grid);
        for i in 0..args.alpha_grid {
            let alpha = 1.0 + i as f64 / (args.alpha_grid - 1) as f64;
            let h = h_cond_sandwiched(joint.tau(), &rest, alpha)?.value;
            let exponent = (alpha - 1.0) / alpha * h;
            let bound = match &pair {
                Some(p) => p.achievability_bound(alpha)?,
                None => joint.achievability_bound(alpha)?,
            };
            sweep.push(SweepRow {
                alpha,
                exponent,
                bound,
            });
        }
        (best, sweep)
    };

    ensure_finite(&[best.exponent, best.bound])?;
    if let Some(csv) = &args.csv {
        write_csv(csv, &sweep)?;
    }
    let vn_sum = match &pair {
        Some(p) => p.vn_criterion()?,
        None => h_cond_vn(joint.tau(), &rest)?,
    };
    let converged = best.converged;
    let report = Report {
        command: if converse {
            "decouple-converse"
        } else {
            "decouple-bound"
        },
        config: &args,
        result: BoundResultJson {
            best,
            vn_criterion_sum: vn_sum,
            sweep,
        },
    };
    write_report(&args.output, &report)?;
    if !converged {
        return Err(CliError::Numerical(
            "entropy optimization did not converge at some orders".into(),
        ));
    }
    Ok(())
}

fn run_mc(args: McArgs) -> CliResult<()> {
    if args.samples < 2 {
        return Err(CliError::Validation(
            "Monte Carlo commands need at least 2 samples".into(),
        ));
    }
    if args.streams < 1 {
        return Err(CliError::Validation("need at least one stream".into()));
    }
    let seed = resolve_seed(args.seed)?;
    let instance: InstanceJson = read_json(&args.input)?;
    let est = match &instance {
        InstanceJson::Pair { .. } => {
            instance
                .to_pair()?
                .mc_error(args.samples, seed, args.streams)?
        }
        InstanceJson::Joint { .. } => {
            instance
                .to_joint()?
                .mc_error(args.samples, seed, args.streams)?
        }
        InstanceJson::Ensemble { .. } => {
            instance
                .to_ensemble()?
                .mc_error(args.samples, seed, args.streams)?
        }
    };
    ensure_finite(&[est.mean, est.stderr])?;
    let mut config = args;
    config.seed = seed;
    let report = Report {
        command: "decouple-mc",
        config: &config,
        result: est,
    };
    write_report(&config.output, &report)
}

#[derive(Serialize)]
struct TwirlResultJson {
    max_abs_deviation: f64,
    within_3_stderr: bool,
    n_samples: u64,
    exact_trace: f64,
}

fn run_twirl(args: TwirlArgs) -> CliResult<()> {
    if args.samples < 2 {
        return Err(CliError::Validation(
            "Monte Carlo commands need at least 2 samples".into(),
        ));
    }
    let seed = resolve_seed(args.seed)?;
    let exact = twirl_two_copy(args.dim)?;
    let est = mc_operator_expectation(
        |u| twirl_two_copy_sample(args.dim, u).expect("fixed spec"),
        args.dim,
        args.samples,
        seed,
        args.streams,
    )?;
    let result = TwirlResultJson {
        max_abs_deviation: est.max_abs_deviation(&exact),
        within_3_stderr: est.covers_within(&exact, 3.0),
        n_samples: est.n_samples,
        exact_trace: exact.trace().re,
    };
    ensure_finite(&[result.max_abs_deviation])?;
    let mut config = args;
    config.seed = seed;
    let report = Report {
        command: "twirl-check",
        config: &config,
        result,
    };
    write_report(&config.output, &report)
}

fn run_coding(args: CodingArgs) -> CliResult<()> {
    let task: CodingTaskJson = read_json(&args.input)?;
    let channel = task.channel.to_channel()?;
    let sigma = task.sigma.to_density()?;
    let params = CodeParams::new(task.q_bits, task.e_bits)?;
    let result = coding_bounds_rates(&channel, &sigma, params)?;
    ensure_finite(&[result.delta1, result.delta2, result.epsilon_bound])?;
    let report = Report {
        command: "coding",
        config: &task,
        result,
    };
    write_report(&args.output, &report)
}

#[derive(Serialize)]
struct ExponentsResultJson {
    rate_nats: f64,
    mother: rdl_core::decoupling::ExponentReport,
    father: rdl_core::decoupling::ExponentReport,
}

fn run_exponents(args: ExponentArgs) -> CliResult<()> {
    let instance: InstanceJson = read_json(&args.input)?;
    let pair = instance.to_pair()?;
    let rate = args.units.absorb(args.rate);
    if !(rate >= 0.0) {
        return Err(CliError::Validation("rate must be >= 0".into()));
    }
    let e_labels = pair.e_labels().to_vec();
    let c_labels = pair.c_labels().to_vec();
    let mother = mother_exponent(pair.rho(), &e_labels, rate)?;
    let father = father_exponent(pair.choi(), &c_labels, rate)?;
    ensure_finite(&[mother.exponent, father.exponent])?;
    let report = Report {
        command: "exponents",
        config: &args,
        result: ExponentsResultJson {
            rate_nats: rate,
            mother,
            father,
        },
    };
    write_report(&args.output, &report)
}

fn run_fenchel(args: FenchelArgs) -> CliResult<()> {
    if args.grid_points < 1 {
        return Err(CliError::Validation("grid needs at least one point".into()));
    }
    let instance: InstanceJson = read_json(&args.input)?;
    let pair = instance.to_pair()?;
    let ln_a = (pair.dim_a() as f64).ln();
    let grid: Vec<f64> = if args.grid_points == 1 {
        vec![0.0]
    } else {
        (0..args.grid_points)
            .map(|i| ln_a * i as f64 / (args.grid_points - 1) as f64)
            .collect()
    };
    let e_labels = pair.e_labels().to_vec();
    let c_labels = pair.c_labels().to_vec();
    let result = fenchel_check(pair.rho(), &e_labels, pair.choi(), &c_labels, &grid)?;
    ensure_finite(&[result.lhs, result.rhs])?;
    let report = Report {
        command: "fenchel",
        config: &args,
        result,
    };
    write_report(&args.output, &report)
}
