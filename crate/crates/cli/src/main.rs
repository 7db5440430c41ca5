//! `trpca` command-line front end.
//!
//! Exit codes: 0 ok, 2 usage, 3 io/format, 4 solver failure. Errors are
//! printed to stderr as a single JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use trpca::io::{atomic_write, read_tensor, write_tensor, FinalErrors, RunReport, REPORT_SCHEMA_VERSION};
use trpca::metrics::{diagnostics, error_report};
use trpca::rpca::DEFAULT_SEED;
use trpca::synth::{CorruptionScale, GroundTruth, TruthSpec};
use trpca::{gen_truth, run_sweep, solve_order_n, DenseTensor, Error, SolverConfig, SweepSpec, Threshold};

#[derive(Parser)]
#[command(name = "trpca", version, about = "Robust low-rank plus sparse tensor decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a tensor into low-rank and sparse parts.
    Decompose(DecomposeArgs),
    /// Generate a synthetic low-rank plus sparse instance.
    Synth(SynthArgs),
    /// Run a parameter sweep described by a spec file.
    Sweep(SweepArgs),
    /// Print incoherence, condition numbers and sparsity of a tensor.
    Info(InfoArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Multilinear rank, one value per mode or a single value for all.
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    #[arg(long, default_value_t = 0.25)]
    eta: f64,
    /// Initial threshold: a number, `auto` or `oracle` (needs --truth).
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    zeta0: Threshold,
    /// First iterate threshold: a number, `auto` or `oracle` (needs --truth).
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    zeta1: Threshold,
    /// Threshold decay; defaults to 1 - 0.45 eta.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    stop_tol: f64,
    /// Corruption fraction used by the automatic initial threshold.
    #[arg(long, default_value_t = 0.1)]
    alpha_hat: f64,
    /// Per-mode update mask such as `1,0,0`; frozen modes keep their initial factor.
    #[arg(long, value_delimiter = ',', value_parser = parse_flag)]
    modes: Option<Vec<bool>>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out_lowrank: Option<PathBuf>,
    #[arg(long)]
    out_sparse: Option<PathBuf>,
    /// Writes PREFIX.core.trpc and PREFIX.u<k>.trpc.
    #[arg(long)]
    out_factors: Option<PathBuf>,
    /// JSONL report; the trace is also written to PATH.trace.csv.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Low-rank ground truth, enabling error tracking and oracle thresholds.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Corruption magnitude; defaults to the mean absolute entry of the truth.
    #[arg(long)]
    scale: Option<f64>,
    /// Maximum nonzero fraction in any fiber.
    #[arg(long)]
    fiber_cap: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output prefix; writes PREFIX.y.trpc, PREFIX.x_star.trpc, PREFIX.s_star.trpc.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    /// Sparse part whose fiber sparsity is reported as alpha.
    #[arg(long)]
    sparse: Option<PathBuf>,
}

fn parse_threshold(s: &str) -> Result<Threshold, String> {
    match s {
        "auto" => Ok(Threshold::Auto),
        "oracle" => Ok(Threshold::Oracle),
        _ => s
            .parse::<f64>()
            .map(Threshold::Value)
            .map_err(|_| format!("expected a number, `auto` or `oracle`, got `{s}`")),
    }
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(format!("expected 0 or 1, got `{s}`")),
    }
}

fn ranks_for(rank: &[usize], order: usize) -> Result<Vec<usize>, Error> {
    match rank.len() {
        1 => Ok(vec![rank[0]; order]),
        n if n == order => Ok(rank.to_vec()),
        n => Err(Error::InvalidConfig(format!("{n} ranks given for an order-{order} tensor"))),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn matrix_tensor(m: &trpca::DenseMatrix) -> Result<DenseTensor, Error> {
    DenseTensor::new(&[m.nrows(), m.ncols()], m.iter().copied().collect())
}

fn decompose(a: DecomposeArgs) -> Result<(), Error> {
    let y = read_tensor(&a.input)?;
    let ranks = ranks_for(&a.rank, y.order())?;
    let mut cfg = SolverConfig::new(ranks.clone())
        .with_eta(a.eta)
        .with_thresholds(a.zeta0, a.zeta1)
        .with_max_iters(a.iters)
        .with_stop_tol(a.stop_tol)
        .with_alpha_hat(a.alpha_hat);
    if let Some(rho) = a.rho {
        cfg = cfg.with_rho(rho);
    }
    if let Some(mask) = a.modes {
        cfg = cfg.with_active_modes(mask);
    }
    cfg.seed = a.seed;

    let truth = match &a.truth {
        Some(path) => {
            let x = read_tensor(path)?;
            if x.dims() != y.dims() {
                return Err(Error::ShapeMismatch(format!("truth {:?} vs input {:?}", x.dims(), y.dims())));
            }
            let s = &y - &x;
            Some(GroundTruth::from_parts(x, s, &ranks, a.seed)?)
        }
        None => None,
    };

    let start = Instant::now();
    let out = solve_order_n(&y, &cfg, truth.as_ref())?;
    let wall_seconds = start.elapsed().as_secs_f64();

    if let Some(p) = &a.out_lowrank {
        write_tensor(p, &out.low_rank)?;
    }
    if let Some(p) = &a.out_sparse {
        write_tensor(p, &out.sparse)?;
    }
    if let Some(prefix) = &a.out_factors {
        write_tensor(with_suffix(prefix, ".core.trpc"), &out.factors.core)?;
        for (k, u) in out.factors.factors.iter().enumerate() {
            write_tensor(with_suffix(prefix, &format!(".u{k}.trpc")), &matrix_tensor(u)?)?;
        }
    }

    let final_errors = match &truth {
        Some(t) => {
            let e = error_report(&out.low_rank, &t.x_star, &t.diagnostics, &ranks)?;
            Some(FinalErrors {
                rel_fro: e.rel_fro,
                inf_err: e.inf_err,
                inf_envelope_ratio: e.inf_envelope_ratio,
            })
        }
        None => None,
    };
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        input_dims: y.dims().to_vec(),
        config: cfg,
        zeta0: out.schedule.zeta0,
        zeta1: out.schedule.zeta1,
        rho: out.schedule.rho,
        diagnostics: truth.as_ref().map(|t| t.diagnostics.clone()),
        trace: out.trace.records.clone(),
        iterations: out.iterations,
        stopped_early: out.stopped_early,
        final_errors,
        wall_seconds,
    };
    if let Some(p) = &a.report {
        atomic_write(p, report.to_jsonl().as_bytes())?;
        atomic_write(&with_suffix(p, ".trace.csv"), report.trace_csv().as_bytes())?;
    }
    let last = out.trace.last();
    println!(
        "{}",
        json!({
            "iterations": out.iterations,
            "stopped_early": out.stopped_early,
            "loss": last.map(|r| r.loss),
            "rel_fro": report.final_errors.as_ref().map(|e| e.rel_fro),
            "wall_seconds": wall_seconds,
        })
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Error> {
    let spec = TruthSpec {
        ranks: vec![a.rank; a.dims.len()],
        dims: a.dims,
        kappa: a.kappa,
        alpha: a.alpha,
        scale: a.scale.map_or(CorruptionScale::MeanAbs, CorruptionScale::Fixed),
        max_fiber_fraction: a.fiber_cap,
        seed: a.seed,
    };
    let truth = gen_truth(&spec)?;
    write_tensor(with_suffix(&a.out, ".y.trpc"), &truth.observation())?;
    write_tensor(with_suffix(&a.out, ".x_star.trpc"), &truth.x_star)?;
    write_tensor(with_suffix(&a.out, ".s_star.trpc"), &truth.s_star)?;
    println!("{}", serde_json::to_string(&truth.diagnostics).expect("diagnostics serialize"));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&a.spec)?;
    let spec = SweepSpec::parse(&text)?;
    let result = run_sweep(&spec)?;
    atomic_write(&a.out, result.to_csv().as_bytes())?;
    let failures: usize = result.cells.iter().map(|c| c.failures).sum();
    println!("{}", json!({ "cells": result.cells.len(), "failures": failures }));
    Ok(())
}

fn info(a: InfoArgs) -> Result<(), Error> {
    let x = read_tensor(&a.input)?;
    let ranks = ranks_for(&a.rank, x.order())?;
    let s = a.sparse.as_ref().map(read_tensor).transpose()?;
    let d = diagnostics(&x, s.as_ref(), &ranks)?;
    println!(
        "{}",
        json!({
            "mu": d.mu,
            "kappa": d.kappa,
            "kappa_s": d.kappa_s,
            "sigma_min": d.sigma_min,
            "alpha": d.alpha,
        })
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) | Error::Io(_) | Error::SpecParse { .. } => 3,
        Error::InvalidConfig(_) | Error::RankOutOfRange { .. } | Error::ShapeMismatch(_) | Error::ModeOutOfRange { .. } => 2,
        _ => 4,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Format(f) => f.code(),
        Error::Io(_) => "io",
        Error::SpecParse { .. } => "spec_parse",
        Error::InvalidConfig(_) => "invalid_config",
        Error::RankOutOfRange { .. } => "rank_out_of_range",
        Error::ShapeMismatch(_) => "shape_mismatch",
        Error::ModeOutOfRange { .. } => "mode_out_of_range",
        Error::ZeroTensor => "zero_tensor",
        Error::SvdNoConvergence { .. } => "svd_no_convergence",
        Error::SingularGram { .. } => "singular_gram",
        Error::NonFinite(_) => "non_finite",
        Error::NotOrthonormal { .. } => "not_orthonormal",
        Error::NotSparse { .. } => "not_sparse",
        Error::Infeasible(_) => "infeasible",
    }
}

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "exit_code": code }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => return fail(2, "usage", e.to_string().trim_end().to_owned()),
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Info(a) => info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(exit_code(&e), error_kind(&e), e.to_string()),
    }
}
