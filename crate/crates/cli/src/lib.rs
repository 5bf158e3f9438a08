//! The `bms` command-line tool: clustering runs, traces, the verification
//! harness and the oracle experiments.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on usage,
//! parse or input errors.

pub mod io;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bms_core::clusterer::{bandwidth_sweep, cluster_with, default_merge_tol, h_grid, standardize, Standardization};
use bms_core::datasets::{generate, Dataset};
use bms_core::diagnostics::DEFAULT_DIRECTION_COUNT;
use bms_core::engine::StopRule;
use bms_core::oracles::{compare_sim_to_oracle, population_log_trace, population_trace};
use bms_core::{ClusterResult, Configuration, KernelSpec};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::io::{load_points, sink, write_points_csv, InputError, PointFormat, TraceWriter};
use crate::verify::{verify_run, VerifyOptions};

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Parser)]
#[command(name = "bms", version, about = "Blurring mean shift clustering with convergence checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a point file and write labels and representatives as JSON.
    Cluster(ClusterArgs),
    /// Write the per-iteration diagnostics of a run as JSON Lines.
    Trace(TraceArgs),
    /// Check every per-step inequality on a run, optionally plus a fuzz corpus.
    Verify(VerifyArgs),
    /// Closed-form recurrences to compare the engine against.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// One clustering run per bandwidth on a grid.
    Sweep(SweepArgs),
    /// Write a seeded synthetic 2-D dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Built-in kernel name.
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// JSON kernel descriptor; overrides --kernel.
    #[arg(long)]
    pub kernel_file: Option<PathBuf>,
}

impl KernelArgs {
    pub fn resolve(&self) -> anyhow::Result<KernelSpec> {
        match &self.kernel_file {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                Ok(KernelSpec::from_json(&text)?)
            }
            None => Ok(KernelSpec::from_name(&self.kernel)?),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV (optional header) or JSON array of arrays.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<PointFormat>,
    /// Rescale each axis to zero mean and unit variance first.
    #[arg(long)]
    pub standardize: bool,
}

impl InputArgs {
    pub fn load(&self) -> anyhow::Result<(Configuration, Option<Standardization>)> {
        let pts = match load_points(&self.input, self.format) {
            Ok(p) => p,
            Err(e @ InputError::Io { .. }) => return Err(e.into()),
            Err(e) => return Err(anyhow::Error::new(e).context(format!("in {}", self.input.display()))),
        };
        if self.standardize {
            let (z, stats) = standardize(&pts)?;
            Ok((z, Some(stats)))
        } else {
            Ok((pts, None))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StopArgs {
    #[arg(long, default_value_t = StopRule::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Stop once no point moves farther than this [default: 1e-12 * diameter].
    #[arg(long, value_parser = non_negative)]
    pub move_tol: Option<f64>,
}

impl StopArgs {
    pub fn rule(&self, cfg: &Configuration) -> StopRule {
        let mut rule = StopRule::default_for(cfg);
        rule.max_iter = self.max_iter;
        if let Some(tol) = self.move_tol {
            rule.move_tol = tol;
        }
        rule
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_parser = positive)]
    pub h: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Terminal points closer than this share a label [default: 1e-8 * diameter].
    #[arg(long, value_parser = non_negative)]
    pub merge_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the JSON Lines trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_parser = positive)]
    pub h: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_parser = positive)]
    pub h: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Number of fuzzed configurations to check as well.
    #[arg(long, default_value_t = 0)]
    pub fuzz: usize,
    /// Seed for the fuzz corpus and the projection directions (decimal or 0x hex).
    #[arg(long, default_value = "0x5EED", value_parser = parse_seed)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DIRECTION_COUNT)]
    pub directions: usize,
    /// Deliberately corrupt each step to confirm the harness reports failures.
    #[arg(long)]
    pub inject_descent: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Engine radius of a regular simplex next to the scalar recurrence (CSV).
    Simplex(SimplexArgs),
    /// Per-axis spread recurrence of a Gaussian population (CSV).
    Population(PopulationArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimplexArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub h: f64,
    #[arg(long, default_value_t = 0.99, value_parser = positive)]
    pub r0: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PopulationArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub s0: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub h: f64,
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_parser = positive)]
    pub h_min: f64,
    #[arg(long, value_parser = positive)]
    pub h_max: f64,
    #[arg(long, value_parser = positive)]
    pub h_step: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long, value_parser = non_negative)]
    pub merge_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// noisy_circles, noisy_moons, varied, aniso, blobs or no_structure.
    #[arg(long)]
    pub dataset: Dataset,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value = "0x5EED", value_parser = parse_seed)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the generator's labels, one per line, here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive and finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be non-negative and finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ChecksFailed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ChecksFailed => 1,
        }
    }
}

#[derive(Serialize)]
struct ClusterOutput<'a> {
    #[serde(flatten)]
    result: &'a ClusterResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    standardization: Option<&'a Standardization>,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    kernel: &'a str,
    standardized: bool,
    rows: Vec<bms_core::clusterer::SweepRow>,
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Cluster(a) => run_cluster(&a),
        Command::Trace(a) => run_trace(&a),
        Command::Verify(a) => run_verify(&a),
        Command::Oracle(OracleCommand::Simplex(a)) => run_simplex(&a),
        Command::Oracle(OracleCommand::Population(a)) => run_population(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Generate(a) => run_generate(&a),
    }
}

fn run_cluster(a: &ClusterArgs) -> anyhow::Result<Status> {
    let kernel = a.kernel.resolve()?;
    let (pts, stats) = a.input.load()?;
    let merge_tol = a.merge_tol.unwrap_or_else(|| default_merge_tol(&pts));
    let mut trace = match &a.trace {
        Some(p) => Some(TraceWriter::new(sink(Some(p))?)),
        None => None,
    };
    let mut write_err = None;
    let mut result = cluster_with(&pts, &kernel, a.h, &a.stop.rule(&pts), merge_tol, |view| {
        if let (Some(w), None) = (trace.as_mut(), write_err.as_ref()) {
            write_err = w.write(view.record).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing trace");
    }
    if let Some(w) = trace {
        w.finish().context("writing trace")?;
    }
    if let Some(s) = &stats {
        result.representatives = result.representatives.iter().map(|z| s.invert(z)).collect();
    }
    write_json(
        a.out.as_deref(),
        &ClusterOutput {
            result: &result,
            standardization: stats.as_ref(),
        },
    )?;
    Ok(Status::Ok)
}

fn run_trace(a: &TraceArgs) -> anyhow::Result<Status> {
    let kernel = a.kernel.resolve()?;
    let (pts, _) = a.input.load()?;
    let mut w = TraceWriter::new(sink(a.out.as_deref())?);
    let mut write_err = None;
    bms_core::engine::run_bms_with(&pts, &kernel, a.h, &a.stop.rule(&pts), |view| {
        if write_err.is_none() {
            write_err = w.write(view.record).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing trace");
    }
    w.finish()?;
    Ok(Status::Ok)
}

fn run_verify(a: &VerifyArgs) -> anyhow::Result<Status> {
    let kernel = a.kernel.resolve()?;
    let (pts, _) = a.input.load()?;
    let opts = VerifyOptions {
        stop: a.stop.rule(&pts),
        seed: a.seed,
        directions: a.directions,
        fuzz: a.fuzz,
        inject_descent: a.inject_descent,
    };
    let report = verify_run(&pts, &kernel, a.h, &opts)?;
    write_json(a.out.as_deref(), &report)?;
    if report.passed {
        Ok(Status::Ok)
    } else {
        eprintln!("verification failed; see the report for the violated checks");
        Ok(Status::ChecksFailed)
    }
}

fn run_simplex(a: &SimplexArgs) -> anyhow::Result<Status> {
    let kernel = a.kernel.resolve()?;
    let cmp = compare_sim_to_oracle(&kernel, a.n, a.d, a.h, a.r0, a.steps)?;
    let mut w = sink(a.out.as_deref())?;
    cmp.write_csv(&mut w)?;
    w.flush()?;
    Ok(Status::Ok)
}

fn run_population(a: &PopulationArgs) -> anyhow::Result<Status> {
    let s = population_trace(a.s0, a.h, a.steps)?;
    let logs = population_log_trace(a.s0, a.h, a.steps)?;
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "t,s,log_s,ratio")?;
    for (t, l) in logs.iter().enumerate() {
        // s underflows long before log s stops being representable
        let s_t = s.get(t).copied().unwrap_or(0.0);
        let ratio = if t == 0 {
            String::new()
        } else {
            format!("{:e}", (l - 3.0 * logs[t - 1]).exp())
        };
        writeln!(w, "{t},{s_t:e},{l:e},{ratio}")?;
    }
    w.flush()?;
    Ok(Status::Ok)
}

fn run_sweep(a: &SweepArgs) -> anyhow::Result<Status> {
    let kernel = a.kernel.resolve()?;
    let (pts, _) = a.input.load()?;
    let grid = h_grid(a.h_min, a.h_max, a.h_step)?;
    let merge_tol = a.merge_tol.unwrap_or_else(|| default_merge_tol(&pts));
    let rows = bandwidth_sweep(&pts, &kernel, &grid, &a.stop.rule(&pts), merge_tol)?;
    write_json(
        a.out.as_deref(),
        &SweepOutput {
            kernel: kernel.name(),
            standardized: a.input.standardize,
            rows,
        },
    )?;
    Ok(Status::Ok)
}

fn run_generate(a: &GenerateArgs) -> anyhow::Result<Status> {
    let lp = generate(a.dataset, a.n, a.seed)?;
    let mut w = sink(a.out.as_deref())?;
    write_points_csv(&mut w, &lp.points)?;
    w.flush()?;
    if let Some(p) = &a.truth {
        let mut t = sink(Some(p))?;
        for l in &lp.truth {
            writeln!(t, "{l}")?;
        }
        t.flush()?;
    }
    Ok(Status::Ok)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
