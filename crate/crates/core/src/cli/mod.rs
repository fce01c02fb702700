//! Command-line front end: `bound`, `oracle`, `simulate`, `verify` and `sweep`.
//!
//! Exit codes: 0 on success, 2 when a bound or inequality is violated, 1 on
//! usage, configuration or computation errors.

pub mod config;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{self, BoundReport, BoundRequest, Constants, GSpec, Instance, Theorem};
use crate::error::{Error, Result};
use crate::proof_lab::{self, McOptions, VerifyOptions};
use crate::{exact, mc};
use config::{RunConfig, SweepGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "comb-clt", version, about = "Error bounds for the combinatorial central limit theorem")]
pub struct Cli {
    /// Instance configuration (a sweep grid for `sweep`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "COMB_CLT_THREADS")]
    pub threads: Option<usize>,
    /// Master seed; falls back to the config `seed`, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Double-center the coefficient matrix before validation.
    #[arg(long, global = true)]
    pub center: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one or more explicit bounds.
    Bound(BoundArgs),
    /// Exact law of S_n and exact Δ_n by enumeration.
    Oracle,
    /// Monte Carlo estimate of Δ_n with a DKW band.
    Simulate(SimulateArgs),
    /// Check every inequality of the truncation argument.
    Verify(VerifyArgs),
    /// Run a grid of instances and write a CSV table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// A, 1, 2, 3 or lindeberg; repeatable.
    #[arg(long = "theorem", value_parser = parse_theorem)]
    pub theorems: Vec<Theorem>,
    /// Weight for theorem 2: power:D, min or min:X.
    #[arg(long, value_parser = parse_g)]
    pub g: Option<GSpec>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub a0: Option<f64>,
    /// Constant of theorems 1, 2, 3 and the Lindeberg form.
    #[arg(long)]
    pub a: Option<f64>,
    /// Also write a CSV summary here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(short = 'm', long = "m")]
    pub m: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Write the sorted standardized draws as little-endian f64.
    #[arg(long)]
    pub dump_sample: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub rho_sqrt: Option<f64>,
    /// Run the enumeration-based checks when the instance is discrete.
    #[arg(long)]
    pub exact: bool,
    /// Monte Carlo size for the statistical checks (0 disables them).
    #[arg(short = 'm', long = "m", default_value_t = 0)]
    pub m: usize,
    #[arg(long)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Also write the rows as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_theorem(s: &str) -> std::result::Result<Theorem, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_g(s: &str) -> std::result::Result<GSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            EXIT_ERROR
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn config_path(cli: &Cli) -> Result<&Path> {
    cli.config.as_deref().ok_or_else(|| Error::Config {
        source_name: "command line".into(),
        message: "--config is required".into(),
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_run(cli: &Cli) -> Result<(RunConfig, Instance)> {
    let path = config_path(cli)?;
    let cfg: RunConfig = config::load(path)?;
    let mut ic = cfg.instance_config();
    ic.center |= cli.center;
    let inst = ic.build(&base_dir(path))?;
    Ok((cfg, inst))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    emit_bytes(out, text.as_bytes())
}

fn emit_bytes(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            so.flush()?;
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Bound(a) => run_bound(cli, a),
        Command::Oracle => run_oracle(cli),
        Command::Simulate(a) => run_simulate(cli, a),
        Command::Verify(a) => run_verify(cli, a),
        Command::Sweep(a) => run_sweep(cli, a),
    }
}

/// Flags override the config; `a` defaults to `max{1810, 198 a0 + 5}`.
fn constants(cfg: &RunConfig, a0: Option<f64>, a: Option<f64>) -> Result<Constants> {
    let base = cfg.constants;
    let a0_val = a0.or(base.map(|k| k.a0)).unwrap_or(bounds::DEFAULT_A0);
    let a_val = a
        .or(if a0.is_some() { None } else { base.map(|k| k.a) })
        .unwrap_or_else(|| bounds::remark_a(a0_val));
    Constants::new(a0_val, a_val)
}

fn run_bound(cli: &Cli, a: &BoundArgs) -> Result<i32> {
    let (cfg, inst) = load_run(cli)?;
    let k = constants(&cfg, a.a0, a.a)?;
    let theorems = if a.theorems.is_empty() {
        cfg.theorems.clone().unwrap_or_else(|| vec![Theorem::One])
    } else {
        a.theorems.clone()
    };
    let defaults = BoundRequest::default();
    let reports = theorems
        .iter()
        .map(|&t| {
            let req = BoundRequest {
                theorem: t,
                g: a.g.or(cfg.g).unwrap_or(defaults.g),
                delta: a.delta.or(cfg.delta).unwrap_or(defaults.delta),
                eps: a.eps.or(cfg.eps).unwrap_or(defaults.eps),
            };
            bounds::compute_bound(&inst, &req, k)
        })
        .collect::<Result<Vec<BoundReport>>>()?;
    if reports.len() == 1 {
        emit_json(cli.out.as_deref(), &reports[0])?;
    } else {
        emit_json(cli.out.as_deref(), &reports)?;
    }
    if let Some(path) = &a.csv {
        let mut wr = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(["theorem", "b_n", "constant_used", "bracket", "total"]).map_err(io)?;
        for r in &reports {
            wr.write_record([
                r.theorem.to_string(),
                format!("{:.16e}", r.b_n),
                format!("{:.16e}", r.constant_used),
                format!("{:.16e}", r.bracket),
                format!("{:.16e}", r.total),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    label: Option<&'a str>,
    n: usize,
    b_n: f64,
    delta_n: f64,
    atoms: &'a [crate::dist::Atom],
}

fn run_oracle(cli: &Cli) -> Result<i32> {
    let (cfg, inst) = load_run(cli)?;
    let dist = exact::exact_distribution(&inst)?;
    let out = OracleOutput {
        label: cfg.label.as_deref(),
        n: inst.n(),
        b_n: inst.b_n(),
        delta_n: exact::sup_deviation(&dist, inst.b_n()),
        atoms: &dist.atoms,
    };
    emit_json(cli.out.as_deref(), &out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    label: Option<&'a str>,
    n: usize,
    b_n: f64,
    #[serde(flatten)]
    estimate: mc::DeltaEstimate,
    draws_sha256: String,
    bound_1: f64,
    /// `delta_hat - epsilon > bound_1`.
    violation: bool,
}

fn run_simulate(cli: &Cli, a: &SimulateArgs) -> Result<i32> {
    let (cfg, inst) = load_run(cli)?;
    let m = a.m.or(cfg.m).unwrap_or(100_000);
    let confidence = a.confidence.or(cfg.confidence).unwrap_or(0.99);
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let sample = mc::simulate(&inst, m, seed)?;
    let estimate = mc::estimate_from_sample(&sample, confidence)?;
    if let Some(path) = &a.dump_sample {
        sample.dump(path)?;
    }
    let k = constants(&cfg, None, None)?;
    let bound_1 = bounds::bound_theorem_1(&inst, k).total;
    let violation = estimate.delta_hat - estimate.epsilon > bound_1;
    let out = SimulateOutput {
        label: cfg.label.as_deref(),
        n: inst.n(),
        b_n: inst.b_n(),
        estimate,
        draws_sha256: sample.digest(),
        bound_1,
        violation,
    };
    emit_json(cli.out.as_deref(), &out)?;
    Ok(if violation { EXIT_VIOLATION } else { EXIT_OK })
}

fn run_verify(cli: &Cli, a: &VerifyArgs) -> Result<i32> {
    let (cfg, inst) = load_run(cli)?;
    let mc = (a.m > 0).then(|| McOptions {
        m: a.m,
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        confidence: a.confidence.or(cfg.confidence).unwrap_or(0.99),
    });
    let opts = VerifyOptions {
        rho_sqrt: a.rho_sqrt.or(cfg.rho_sqrt).unwrap_or(proof_lab::DEFAULT_RHO_SQRT),
        constants: constants(&cfg, None, None)?,
        exact: a.exact,
        mc,
    };
    let report = proof_lab::check_inequalities(&inst, &opts)?;
    for c in report.failures() {
        log::warn!("check {} fails: lhs {:e} > rhs {:e}", c.name, c.lhs, c.rhs);
    }
    emit_json(cli.out.as_deref(), &report)?;
    Ok(if report.all_hold() { EXIT_OK } else { EXIT_VIOLATION })
}

fn run_sweep(cli: &Cli, a: &SweepArgs) -> Result<i32> {
    let path = config_path(cli)?;
    let grid: SweepGrid = config::load(path)?;
    let rows = sweep::sweep(&grid, &base_dir(path), cli.seed.unwrap_or(0))?;
    let mut buf = Vec::new();
    sweep::write_csv(&rows, &mut buf)?;
    emit_bytes(cli.out.as_deref(), &buf)?;
    if let Some(p) = &a.json {
        emit_json(Some(p), &rows)?;
    }
    for r in rows.iter().filter(|r| r.status != "ok") {
        log::warn!("row {}: {}", r.label, r.status);
    }
    Ok(if rows.iter().any(|r| r.is_violation()) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    })
}
