//! `pmsearch`: check, forge and study sparse-violation instances.
//!
//! Exit status: 0 when the matrix is a P-matrix or every check passes, 2 when
//! violations (or failed checks) are found, 1 on any error.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pmsearch_core::export;
use pmsearch_core::forge::{self, ForgeConfig};
use pmsearch_core::info;
use pmsearch_core::minors::{self, Engine};
use pmsearch_core::oracle::{self, OracleMode, StrategyKind};
use pmsearch_core::schur::{self, EnsembleConfig, EnsembleKind, PairSpec};
use pmsearch_core::{Error, Instance, Regime};

use output::{Format, Output};

#[derive(Parser, Debug)]
#[command(name = "pmsearch", version, about = "Sparse-violation P-matrix instances and their search problem")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// RNG seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Violation threshold: a minor counts as violating when it is <= tol.
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    tol: f64,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate principal minors of an instance and classify violations.
    Check(CheckArgs),
    /// Build a single-violation instance from a P-matrix base.
    Forge(ForgeArgs),
    /// First-hit experiment for a query strategy.
    Simulate(SimulateArgs),
    /// Entropy, mutual-information and Fano quantities.
    Mi(MiArgs),
    /// Joint-sign statistics of minor pairs and the Schur identity check.
    SchurStudy(SchurArgs),
    /// Recompute the 6×6 worked example and compare with the printed table.
    ReproAppendixB,
}

#[derive(Args, Debug, Serialize)]
struct CheckArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = EngineArg::Naive)]
    engine: EngineArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum EngineArg {
    Naive,
    Recursive,
    Parallel,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Naive => Engine::Naive,
            EngineArg::Recursive => Engine::Recursive,
            EngineArg::Parallel => Engine::Parallel,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ForgeArgs {
    /// Base matrix file (instance format; any u, v are ignored).
    base: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 64)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    max_lambda_factor: f64,
    /// Where to write the forged instance; embedded in the summary otherwise.
    #[arg(long)]
    instance_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Dimension of the synthetic problem (ignored with --instance).
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Queries per round.
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value = "uniform-without-replacement", value_parser = parse_strategy)]
    #[serde(serialize_with = "output::display")]
    strategy: StrategyKind,
    #[arg(long, default_value = "sign", value_parser = parse_mode)]
    mode: OracleMode,
    /// Query a concrete instance instead of a hidden uniform witness.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct MiArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Query budget (capped at 2^n − 1 in sweep mode).
    #[arg(long, default_value_t = 10)]
    q: u64,
    #[arg(long, default_value = "sweep", value_parser = parse_strategy)]
    #[serde(serialize_with = "output::display")]
    strategy: StrategyKind,
    /// Monte Carlo samples for the plug-in estimate (0 skips it).
    #[arg(long, default_value_t = 0)]
    samples: usize,
    /// Range `a..b` (inclusive) of dimensions; one row per n.
    #[arg(long, value_parser = parse_range)]
    sweep_n: Option<(usize, usize)>,
}

#[derive(Args, Debug, Serialize)]
struct SchurArgs {
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value = "iid_uniform", value_parser = parse_ensemble)]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// `defaults`, `containment`, or an overlap size.
    #[arg(long, default_value = "defaults")]
    overlap: String,
    /// Random block splits for the Schur identity check (0 skips it).
    #[arg(long, default_value_t = 0)]
    identity_samples: usize,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<OracleMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ensemble(s: &str) -> Result<EnsembleKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if a > b {
        return Err(format!("empty range {s:?}"));
    }
    Ok((a, b))
}

enum Status {
    Clean,
    Flagged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Clean) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Status, Error> {
    let c = &cli.common;
    let out = Output::new(c);
    match &cli.command {
        Command::Check(args) => {
            let inst = Instance::load(&args.instance)?;
            let report = minors::violation_set_with(&inst.perturbed(), c.tol, args.engine.into())?;
            let flagged = report.regime != Regime::PMatrix;
            match c.format {
                Format::Json => out.json("check", args, &report)?,
                Format::Csv => out.csv("check", args, |w| export::write_minors(w, &report.violations))?,
            }
            Ok(if flagged { Status::Flagged } else { Status::Clean })
        }
        Command::Forge(args) => {
            let base = Instance::load(&args.base)?.m().clone();
            if !minors::is_p_matrix(&base, c.tol)? {
                let (alpha, value) = match forge::find_min_minor(&base) {
                    Err(Error::NotPMatrix { subset, value }) => (subset, value),
                    _ => ("?".into(), f64::NAN),
                };
                return Err(Error::NotPMatrix { subset: alpha, value });
            }
            let cfg = ForgeConfig {
                epsilon: args.epsilon,
                lambda_search_steps: args.steps,
                max_lambda_factor: args.max_lambda_factor,
            };
            let r = forge::forge_single_violation(&base, &cfg)?;
            if let Some(path) = &args.instance_out {
                r.instance.save(path)?;
            }
            let summary = output::ForgeSummary::new(&r, args.instance_out.as_deref());
            match c.format {
                Format::Json => out.json("forge", args, &summary)?,
                Format::Csv => out.csv("forge", args, |w| export::write_minors(w, &r.report.violations))?,
            }
            Ok(Status::Clean)
        }
        Command::Simulate(args) => {
            let report = match &args.instance {
                Some(path) => {
                    let a = Instance::load(path)?.perturbed();
                    oracle::first_hit_experiment_on_matrix(&a, c.tol, args.mode, args.p, args.trials, &args.strategy, c.seed)?
                }
                None => {
                    if args.mode == OracleMode::Value {
                        return Err(Error::ValueModeUnavailable);
                    }
                    oracle::first_hit_experiment(args.n, args.p, args.trials, &args.strategy, c.seed)?
                }
            };
            match c.format {
                Format::Json => out.json("simulate", args, &report)?,
                Format::Csv => out.csv("simulate", args, |w| export::write_histogram(w, &report.histogram))?,
            }
            Ok(Status::Clean)
        }
        Command::Mi(args) => {
            match args.sweep_n {
                Some((a, b)) => {
                    let rows = (a..=b)
                        .map(|n| {
                            let q = args.q.min(info::candidate_count(n)?);
                            info::info_report(n, q, &args.strategy, args.samples, c.seed)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    match c.format {
                        Format::Json => out.json("mi", args, &rows)?,
                        Format::Csv => out.csv("mi", args, |w| export::write_info_sweep(w, &rows))?,
                    }
                }
                None => {
                    let r = info::info_report(args.n, args.q, &args.strategy, args.samples, c.seed)?;
                    match c.format {
                        Format::Json => out.json("mi", args, &r)?,
                        Format::Csv => out.csv("mi", args, |w| export::write_info_sweep(w, std::slice::from_ref(&r)))?,
                    }
                }
            }
            Ok(Status::Clean)
        }
        Command::SchurStudy(args) => {
            let spec: PairSpec = args.overlap.parse()?;
            let cfg = EnsembleConfig { n: args.n, kind: args.ensemble, samples: args.samples, seed: c.seed };
            let report = schur::conditional_sign_study(&cfg, &spec)?;
            let identity = if args.identity_samples > 0 {
                let (max_rel_error, used) = schur::verify_schur_identity(args.identity_samples, args.n, c.seed)?;
                Some(output::IdentityCheck { max_rel_error, samples_used: used })
            } else {
                None
            };
            match c.format {
                Format::Json => {
                    out.json("schur-study", args, &output::SchurOutput { report: &report, schur_identity: identity })?
                }
                Format::Csv => out.csv("schur-study", args, |w| export::write_sign_pairs(w, &report.pairs))?,
            }
            Ok(Status::Clean)
        }
        Command::ReproAppendixB => {
            let r = forge::reproduce_fixture()?;
            for row in &r.rows {
                eprintln!(
                    "row {:>2} {:<9} printed {:>8.3} computed {:>10.6} {}",
                    row.row,
                    row.subset.to_string(),
                    row.printed,
                    row.computed,
                    if row.pass { "PASS" } else { "FAIL" }
                );
            }
            for chk in &r.checks {
                eprintln!(
                    "{:<22} expected {:<30} observed {:<24} {}",
                    chk.name,
                    chk.expected,
                    chk.observed,
                    if chk.pass { "PASS" } else { "FAIL" }
                );
            }
            match c.format {
                Format::Json => out.json("repro-appendix-b", &(), &r)?,
                Format::Csv => out.csv("repro-appendix-b", &(), |w| export::write_fixture_rows(w, &r.rows))?,
            }
            Ok(if r.all_pass { Status::Clean } else { Status::Flagged })
        }
    }
}
