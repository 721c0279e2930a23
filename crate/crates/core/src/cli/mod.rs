//! Command-line front end of the `entropic` binary.
//!
//! Every command writes into its `--out` directory: the resolved parameters
//! as `config.txt`, its data files, and `manifest.json` (one JSON line with
//! the code version, outputs, failure count and wall-clock time). Exit codes
//! are 0 on success, 1 on runtime failure and 2 on usage errors.

pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::conjugation::{conjugate_sample, entropic_draw, ConjugateSample, ConjugationConfig};
use crate::energy::{
    antisym_lower_bound, catalog, estimate_pre_energy, half_pushforward_points, invariance_test, key_lower_bound,
    lip_lower_bound, pushforward_points, sharp_example_report, CloudEnsemble, CylinderFunction, EnergyEstimate, Inner,
    InvarianceOutcome,
};
use crate::error::{Error, Result};
use crate::measure::{sample_df_batch, AtomicMeasure, AxisBox, Domain, MeasureRecord, StickBreakingConfig};
use crate::metrics::{
    beta_limit_diagnostic, ldp_scan, mean_measure_check, support_probe, write_rows, Law, LdpTarget,
    UNIFORM_REFERENCE,
};
use crate::one_dim::{
    conjugate_1d, entropy_1d, quasi_invariance_test, reverse_entropy_1d, Diffeo1D, QuantileMeasure1D,
};
use crate::rng::{self, Purpose};
use crate::stats::SIGMA_BAND;
use crate::torus::{IsometryFamily, TorusPoint};

use svg::SvgScene;

#[derive(Debug, Parser)]
#[command(name = "entropic", version, about = "Entropic random measures on the flat torus and the interval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stick-breaking draws of the Dirichlet-Ferguson measure, as JSON lines.
    SampleDf(SampleDfArgs),
    /// Entropic draws: conjugate clouds, per-draw report, optional SVG.
    SampleEntropic(SampleEntropicArgs),
    /// Conjugates the measures of a JSON-lines file.
    Conjugate(ConjugateArgs),
    /// Batch diagnostics written as CSV tables.
    Report {
        #[command(subcommand)]
        report: Report,
    },
}

#[derive(Debug, Subcommand)]
enum Report {
    MeanCheck(MeanCheckArgs),
    BetaLimits(BetaLimitsArgs),
    LdpScan(LdpScanArgs),
    SupportProbe(SupportProbeArgs),
    Energy(EnergyArgs),
    Invariance(InvarianceArgs),
    SharpExample(SharpExampleArgs),
    QuasiInvariance(QuasiInvarianceArgs),
    #[command(name = "duality-1d")]
    Duality1d(Duality1dArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct RunArgs {
    /// Master seed; drawn from system entropy and logged when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    out: PathBuf,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Plain-text `key = value` file; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct GridArgs {
    /// Quadrature resolution per axis of the transport solver.
    #[arg(long)]
    grid: Option<usize>,
    /// Uniform points pushed through each conjugate map.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    points: Option<u64>,
}

impl GridArgs {
    fn resolve(&mut self, dim: usize, grid: usize, points: u64) -> ConjugationConfig {
        let g = *self.grid.get_or_insert(grid);
        let p = *self.points.get_or_insert(points);
        ConjugationConfig::new(dim).with_grid(g).with_points(p as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DomainArg {
    Torus1,
    Torus2,
    Interval,
}

impl DomainArg {
    fn domain(self) -> Domain {
        match self {
            DomainArg::Torus1 => Domain::Torus(1),
            DomainArg::Torus2 => Domain::Torus(2),
            DomainArg::Interval => Domain::Interval,
        }
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn dim_arg(s: &str) -> std::result::Result<usize, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        _ => Err("dimension must be 1 or 2".into()),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct SampleDfArgs {
    #[arg(long, value_parser = positive)]
    beta: f64,
    /// Number of measures.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_enum, default_value = "torus2")]
    domain: DomainArg,
    /// Stop breaking once the remainder falls below this.
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    tail_tol: f64,
    #[arg(long, default_value_t = 4096)]
    max_atoms: usize,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct SampleEntropicArgs {
    #[arg(long, value_parser = positive)]
    beta: f64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value = "2", value_parser = dim_arg)]
    dim: usize,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    /// Write one SVG figure per measure.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct ConjugateArgs {
    /// JSON-lines file of measures, as written by `sample-df`.
    #[arg(long)]
    input: PathBuf,
    /// Only conjugate the record with this index.
    #[arg(long)]
    index: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LawArg {
    Entropic,
    Df,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PartitionArg {
    Quadrants,
    Halves,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct MeanCheckArgs {
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, value_enum, default_value = "entropic")]
    law: LawArg,
    #[arg(long, value_enum, default_value = "quadrants")]
    partition: PartitionArg,
    /// Torus dimension for `halves`; quadrants always live on the square.
    #[arg(long, default_value = "2", value_parser = dim_arg)]
    dim: usize,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct BetaLimitsArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,1,0.1,0.01", value_parser = positive)]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value = "2", value_parser = dim_arg)]
    dim: usize,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LdpTargetArg {
    /// Density `1/2 + x` on the interval.
    Linear,
    /// Lebesgue measure on the interval.
    Uniform,
    /// Uniform grid measure on the square torus.
    UniformTorus,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct LdpScanArgs {
    #[arg(long, value_enum, default_value = "linear")]
    target: LdpTargetArg,
    #[arg(long, default_value_t = 0.04, value_parser = positive)]
    eps: f64,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40", value_parser = positive)]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProbeTargetArg {
    Uniform,
    Dirac,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct SupportProbeArgs {
    #[arg(long, value_enum, default_value = "uniform")]
    target: ProbeTargetArg,
    /// Location of the Dirac target.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.5")]
    at: Vec<f64>,
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    beta: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3", value_parser = positive)]
    eps: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct EnergyArgs {
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    beta: f64,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Ball radius of the Lipschitz bound, around the Dirac at the origin.
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    eps: f64,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct InvarianceArgs {
    #[arg(long, default_value_t = 5.0, value_parser = positive)]
    beta: f64,
    /// Measures in each of the two independent sample sets.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.37,0.71")]
    t: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct SharpExampleArgs {
    #[arg(long, default_value_t = 0.05, value_parser = positive)]
    beta: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1", value_parser = positive)]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct QuasiInvarianceArgs {
    #[arg(long, value_delimiter = ',', default_value = "2", value_parser = positive)]
    beta: Vec<f64>,
    /// Strength `a` of `h(x) = x + a x (1 - x)`, in `(-1, 1)`.
    #[arg(long, default_value_t = 0.1)]
    a: f64,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(args_override_self = true)]
struct Duality1dArgs {
    /// Cells of the piecewise-constant densities.
    #[arg(long, default_value_t = 10_000)]
    cells: usize,
    #[command(flatten)]
    #[serde(flatten)]
    run: RunArgs,
}

/// Failure of a CLI invocation.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type Density = Box<dyn Fn(f64) -> f64>;

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config::splice(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::SampleDf(a) => with_workers(a.run.workers, || sample_df(a.clone())),
        Command::SampleEntropic(a) => with_workers(a.run.workers, || sample_entropic(a.clone())),
        Command::Conjugate(a) => with_workers(a.run.workers, || conjugate(a.clone())),
        Command::Report { report } => match report {
            Report::MeanCheck(a) => with_workers(a.run.workers, || mean_check(a.clone())),
            Report::BetaLimits(a) => with_workers(a.run.workers, || beta_limits(a.clone())),
            Report::LdpScan(a) => with_workers(a.run.workers, || ldp(a.clone())),
            Report::SupportProbe(a) => with_workers(a.run.workers, || probe(a.clone())),
            Report::Energy(a) => with_workers(a.run.workers, || energy(a.clone())),
            Report::Invariance(a) => with_workers(a.run.workers, || invariance(a.clone())),
            Report::SharpExample(a) => with_workers(a.run.workers, || sharp(a.clone())),
            Report::QuasiInvariance(a) => with_workers(a.run.workers, || quasi(a.clone())),
            Report::Duality1d(a) => with_workers(a.run.workers, || duality(a.clone())),
        },
    }
}

fn with_workers(workers: usize, f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| usage(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

fn resolve_seed(run: &mut RunArgs) {
    if run.seed.is_none() {
        let s = rand::random::<u64>();
        eprintln!("no --seed given; using seed {s}");
        run.seed = Some(s);
    }
}

/// An output directory being filled by one command.
struct RunDir {
    command: &'static str,
    dir: PathBuf,
    seed: u64,
    started: Instant,
    config: String,
    outputs: Vec<String>,
    failures: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a str,
    outputs: &'a [String],
    failures: usize,
    wall_clock_seconds: f64,
}

impl RunDir {
    fn open<P: Serialize>(command: &'static str, run: &RunArgs, params: &P) -> CliResult<Self> {
        let seed = run.seed.expect("seed is resolved before the run directory opens");
        let text = config::render(command, params)?;
        fs::create_dir_all(&run.out).map_err(Error::from)?;
        let mut d = Self {
            command,
            dir: run.out.clone(),
            seed,
            started: Instant::now(),
            config: text.clone(),
            outputs: Vec::new(),
            failures: 0,
        };
        d.write("config.txt", text.as_bytes())?;
        Ok(d)
    }

    fn path(&mut self, rel: &str) -> CliResult<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(Error::from)?;
        }
        self.outputs.push(rel.to_string());
        Ok(p)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path(rel)?;
        fs::write(p, bytes).map_err(Error::from)?;
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> CliResult<()> {
        let mut buf = Vec::new();
        write_rows(&mut buf, rows)?;
        self.write(rel, &buf)
    }

    fn finish(mut self) -> CliResult<()> {
        self.outputs.sort();
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config: &self.config,
            outputs: &self.outputs,
            failures: self.failures,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut line = serde_json::to_vec(&m).map_err(Error::from)?;
        line.push(b'\n');
        fs::write(self.dir.join("manifest.json"), line).map_err(Error::from)?;
        Ok(())
    }
}

fn sample_df(mut a: SampleDfArgs) -> CliResult<()> {
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("sample-df", &a.run, &a)?;
    let cfg = StickBreakingConfig {
        beta: a.beta,
        tail_tol: a.tail_tol,
        max_atoms: a.max_atoms,
        seed: d.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let measures = sample_df_batch(&cfg, a.domain.domain(), a.n as usize)?;
    let mut buf = Vec::new();
    for (i, nu) in measures.iter().enumerate() {
        serde_json::to_writer(&mut buf, &MeasureRecord::from_measure(nu, &cfg, i as u64)).map_err(Error::from)?;
        buf.push(b'\n');
    }
    d.write("measures.jsonl", &buf)?;
    println!("wrote {} measures to {}", measures.len(), d.dir.join("measures.jsonl").display());
    d.finish()
}

/// One row of the per-draw run report.
#[derive(Debug, Serialize)]
struct DrawRow {
    index: u64,
    seed: u64,
    beta: Option<f64>,
    status: String,
    atom_count: usize,
    /// Cells of the diagram: each is a hole of the conjugate support.
    hole_count: usize,
    largest_hole_mass: f64,
    merged_mass: f64,
    solver_residual: f64,
    solver_iterations: usize,
    cloud_points: usize,
}

impl DrawRow {
    fn failed(index: u64, seed: u64, beta: Option<f64>, err: &str) -> Self {
        Self {
            index,
            seed,
            beta,
            status: format!("failed: {err}"),
            atom_count: 0,
            hole_count: 0,
            largest_hole_mass: 0.0,
            merged_mass: 0.0,
            solver_residual: f64::NAN,
            solver_iterations: 0,
            cloud_points: 0,
        }
    }
}

/// Writes the cloud (and figure) of one sample and returns its report row.
fn emit_sample(d: &mut RunDir, s: &ConjugateSample, svg: bool) -> CliResult<DrawRow> {
    let idx = s.cloud.index;
    let mut buf = Vec::new();
    s.cloud.write_csv(&mut buf)?;
    d.write(&format!("clouds/cloud_{idx:04}.csv"), &buf)?;
    if svg {
        let mut scene = SvgScene::from_sample(s);
        scene.title = Some(match s.cloud.source_beta {
            Some(b) => format!("entropic sample {idx}, beta = {b}, seed {}", s.cloud.seed),
            None => format!("conjugate of measure {idx}, seed {}", s.cloud.seed),
        });
        d.write(&format!("svg/cloud_{idx:04}.svg"), scene.render().as_bytes())?;
    }
    Ok(DrawRow {
        index: idx,
        seed: s.cloud.seed,
        beta: s.cloud.source_beta,
        status: "ok".into(),
        atom_count: s.cloud.atom_count,
        hole_count: s.diagram.len(),
        largest_hole_mass: s.diagram.computed_masses.iter().cloned().fold(0.0, f64::max),
        merged_mass: s.cloud.merged_mass,
        solver_residual: s.cloud.solver_residual,
        solver_iterations: s.cloud.solver_iterations,
        cloud_points: s.cloud.len(),
    })
}

/// Evaluates `f` on `indices` in parallel in bounded batches and hands the
/// results to `sink` in index order.
fn in_batches<T: Send>(
    indices: &[u64],
    f: impl Fn(u64) -> T + Sync,
    mut sink: impl FnMut(u64, T) -> CliResult<()>,
) -> CliResult<()> {
    for chunk in indices.chunks(8) {
        let done: Vec<T> = chunk.par_iter().map(|&i| f(i)).collect();
        for (&i, r) in chunk.iter().zip(done) {
            sink(i, r)?;
        }
    }
    Ok(())
}

fn sample_entropic(mut a: SampleEntropicArgs) -> CliResult<()> {
    if a.svg && a.dim != 2 {
        return Err(usage("--svg needs --dim 2"));
    }
    let cfg = a.grid.resolve(a.dim, if a.dim == 1 { 8192 } else { 512 }, 5000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("sample-entropic", &a.run, &a)?;
    let seed = d.seed;
    let indices: Vec<u64> = (0..a.n).collect();
    let mut rows = Vec::new();
    in_batches(
        &indices,
        |i| entropic_draw(a.beta, a.dim, seed, i, &cfg),
        |i, r| {
            match r {
                Ok(s) => rows.push(emit_sample(&mut d, &s, a.svg)?),
                Err(e) => {
                    eprintln!("sample {i} skipped: {e}");
                    d.failures += 1;
                    rows.push(DrawRow::failed(i, seed, Some(a.beta), &e.to_string()));
                }
            }
            Ok(())
        },
    )?;
    d.csv("report.csv", &rows)?;
    let failures = d.failures;
    summarize_draws(&rows);
    d.finish()?;
    if failures == a.n as usize {
        return Err(Error::InvalidArgument("every sample failed".into()).into());
    }
    Ok(())
}

fn summarize_draws(rows: &[DrawRow]) {
    let ok: Vec<&DrawRow> = rows.iter().filter(|r| r.status == "ok").collect();
    if ok.is_empty() {
        return;
    }
    let holes = ok.iter().map(|r| r.hole_count as f64).sum::<f64>() / ok.len() as f64;
    println!("{} of {} samples ok, mean hole count {holes:.1}", ok.len(), rows.len());
}

fn read_measures(path: &Path) -> CliResult<Vec<MeasureRecord>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| usage(format!("{} line {}: {e}", path.display(), n + 1))))
        .collect()
}

#[derive(Debug, Serialize)]
struct KnotRow {
    x: f64,
    cdf: f64,
    index: u64,
    seed: u64,
}

fn conjugate(mut a: ConjugateArgs) -> CliResult<()> {
    let mut records = read_measures(&a.input)?;
    if let Some(k) = a.index {
        records.retain(|r| r.index == k);
        if records.is_empty() {
            return Err(usage(format!("no measure with index {k} in {}", a.input.display())));
        }
    }
    let Some(first) = records.first() else {
        return Err(usage(format!("{} holds no measures", a.input.display())));
    };
    let domain = first.domain;
    if records.iter().any(|r| r.domain != domain) {
        return Err(usage("all measures of one file must share a domain"));
    }
    if a.svg && domain != Domain::Torus(2) {
        return Err(usage("--svg needs measures on the square torus"));
    }
    let dim = domain.dim();
    let cfg = a.grid.resolve(dim, if dim == 1 { 8192 } else { 512 }, 5000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("conjugate", &a.run, &a)?;
    let seed = d.seed;
    if domain == Domain::Interval {
        let mut knots = Vec::new();
        for r in &records {
            let nu = r.to_measure()?;
            let mu = QuantileMeasure1D::atomic(nu.locations(), nu.weights())?;
            let c = conjugate_1d(&mu);
            let (xs, ws) = c.atoms().expect("the conjugate of an atomic measure is atomic");
            let mut cum = 0.0;
            for (x, w) in xs.iter().zip(ws) {
                cum += w;
                knots.push(KnotRow {
                    x: *x,
                    cdf: cum,
                    index: r.index,
                    seed,
                });
            }
        }
        d.csv("conjugates.csv", &knots)?;
        return d.finish();
    }
    let cells = cfg.solve.cells(dim) as f64;
    let mut rows = Vec::new();
    let indices: Vec<u64> = (0..records.len() as u64).collect();
    in_batches(
        &indices,
        |j| -> Result<ConjugateSample> {
            let r = &records[j as usize];
            let (nu, merged) = r.to_measure()?.merge_light_atoms(10.0 / cells);
            let mut g = rng::stream(seed, r.index, Purpose::Points);
            let mut s = conjugate_sample(&nu, cfg.n_points, &cfg.solve, &mut g)?;
            s.cloud.seed = seed;
            s.cloud.index = r.index;
            s.cloud.merged_mass = merged;
            Ok(s)
        },
        |j, res| {
            let index = records[j as usize].index;
            match res {
                Ok(s) => rows.push(emit_sample(&mut d, &s, a.svg)?),
                Err(e) => {
                    eprintln!("measure {index} skipped: {e}");
                    d.failures += 1;
                    rows.push(DrawRow::failed(index, seed, None, &e.to_string()));
                }
            }
            Ok(())
        },
    )?;
    d.csv("report.csv", &rows)?;
    summarize_draws(&rows);
    let all_failed = d.failures == rows.len();
    d.finish()?;
    if all_failed {
        return Err(Error::InvalidArgument("every measure failed".into()).into());
    }
    Ok(())
}

fn mean_check(mut a: MeanCheckArgs) -> CliResult<()> {
    let partition = match a.partition {
        PartitionArg::Quadrants => {
            a.dim = 2;
            AxisBox::quadrants()
        }
        PartitionArg::Halves => AxisBox::halves(a.dim),
    };
    if a.n < 100 {
        return Err(usage("--n must be at least 100"));
    }
    let cfg = a.grid.resolve(a.dim, if a.dim == 1 { 4096 } else { 128 }, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report mean-check", &a.run, &a)?;
    let law = match a.law {
        LawArg::Entropic => Law::Entropic,
        LawArg::Df => Law::DirichletFerguson,
    };
    let check = mean_measure_check(law, a.beta, a.n, &partition, &cfg, d.seed)?;
    d.failures = check.failed_samples;
    d.csv("mean_check.csv", &check.rows)?;
    println!("max |z| = {:.3} over {} cells", check.max_abs_z(), check.rows.len());
    d.finish()
}

fn beta_limits(mut a: BetaLimitsArgs) -> CliResult<()> {
    let cfg = a.grid.resolve(a.dim, if a.dim == 1 { 4096 } else { 128 }, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report beta-limits", &a.run, &a)?;
    let rows = beta_limit_diagnostic(&a.betas, a.dim, a.n, &cfg, d.seed)?;
    d.failures = rows.iter().map(|r| r.failed).sum();
    d.csv("beta_limits.csv", &rows)?;
    for r in &rows {
        println!(
            "beta {:>8}: dirac {:.4} +- {:.4}, uniform {:.4} +- {:.4}",
            r.beta, r.dirac_proximity, r.dirac_stderr, r.uniform_proximity, r.uniform_stderr
        );
    }
    d.finish()
}

fn ldp(mut a: LdpScanArgs) -> CliResult<()> {
    let dim = if a.target == LdpTargetArg::UniformTorus { 2 } else { 1 };
    let cfg = a.grid.resolve(dim, 96, 2000);
    let target = match a.target {
        LdpTargetArg::Linear => LdpTarget::Interval(QuantileMeasure1D::from_density(|x| 0.5 + x, 10_000)?),
        LdpTargetArg::Uniform => LdpTarget::Interval(QuantileMeasure1D::uniform(10_000)),
        LdpTargetArg::UniformTorus => LdpTarget::Torus(AtomicMeasure::uniform_grid(Domain::Torus(2), UNIFORM_REFERENCE)?),
    };
    let mut betas = a.betas.clone();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    a.betas = betas;
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report ldp-scan", &a.run, &a)?;
    let r = ldp_scan(&target, a.eps, &a.betas, a.n, &cfg, d.seed)?;
    d.csv("ldp_scan.csv", &r.rows)?;
    for row in &r.rows {
        println!(
            "beta {:>6}: {}/{} hits, rate {:.4}{}",
            row.beta,
            row.hits,
            row.n,
            row.rate_estimate,
            if row.bound_only { " (bound)" } else { "" }
        );
    }
    d.finish()
}

fn probe(mut a: SupportProbeArgs) -> CliResult<()> {
    let target = match a.target {
        ProbeTargetArg::Uniform => AtomicMeasure::uniform_grid(Domain::Torus(2), UNIFORM_REFERENCE)?,
        ProbeTargetArg::Dirac => {
            if a.at.len() != 2 {
                return Err(usage("--at takes two coordinates"));
            }
            AtomicMeasure::dirac(Domain::Torus(2), &a.at)?
        }
    };
    let cfg = a.grid.resolve(2, 96, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report support-probe", &a.run, &a)?;
    let p = support_probe(&target, a.beta, a.n, &cfg, d.seed)?;
    d.failures = p.failed;
    let rows: Vec<_> = a.eps.iter().map(|&e| p.at(e)).collect();
    d.csv("support_probe.csv", &rows)?;
    for r in &rows {
        println!("eps {:>6}: {}/{} within", r.eps, r.hits, r.n);
    }
    d.finish()
}

fn energy(mut a: EnergyArgs) -> CliResult<()> {
    let cfg = a.grid.resolve(2, 96, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report energy", &a.run, &a)?;
    let ens = CloudEnsemble::draw(a.beta, 2, a.n, d.seed, &cfg)?;
    d.failures = ens.failed;
    let half = IsometryFamily::from_displacement(&[0.5, 0.0])?;
    let mut rows: Vec<EnergyEstimate> = Vec::new();
    for f in catalog() {
        rows.push(estimate_pre_energy(&f, &ens)?);
        rows.push(key_lower_bound(&f, &half, &ens)?);
    }
    let sin = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
    rows.push(antisym_lower_bound(&sin, &half, &ens)?);
    let x0 = TorusPoint::new(&[0.0, 0.0])?;
    let x1 = TorusPoint::new(&[0.5, 0.0])?;
    rows.push(lip_lower_bound(&Inner::Sawtooth { axis: 0 }, &x0, &x1, a.eps, &ens).map_err(|e| usage(e.to_string()))?);
    d.csv("energy.csv", &rows)?;
    for r in &rows {
        println!("{:?} {}: {:.5} +- {:.5}", r.estimator_tag, r.f_id, r.value, r.stderr);
    }
    d.finish()
}

#[derive(Debug, Serialize)]
struct InvarianceRow {
    f_id: String,
    t: f64,
    control: bool,
    n_a: usize,
    n_b: usize,
    statistic: f64,
    p_value: f64,
    pass: bool,
    beta: f64,
    seed: u64,
}

/// Functionals of the invariance report; paired with two values of `t` they
/// give ten configurations.
fn invariance_functions() -> Vec<CylinderFunction> {
    let mut fs = catalog();
    fs.truncate(3);
    fs.push(CylinderFunction::linear(Inner::Sin { freq: 2, axis: 0 }));
    fs.push(catalog().swap_remove(5));
    fs
}

fn invariance(mut a: InvarianceArgs) -> CliResult<()> {
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    let cfg = a.grid.resolve(2, 96, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report invariance", &a.run, &a)?;
    let n = a.n as u64;
    // every configuration gets its own pair of sample sets, so the tests are independent
    let mut next = 0u64;
    let mut pair = |failures: &mut usize| -> Result<(CloudEnsemble, CloudEnsemble)> {
        let s = next;
        next += 2 * n;
        let x = CloudEnsemble::draw_range(a.beta, 2, s..s + n, d.seed, &cfg)?;
        let y = CloudEnsemble::draw_range(a.beta, 2, s + n..s + 2 * n, d.seed, &cfg)?;
        *failures += x.failed + y.failed;
        Ok((x, y))
    };
    let family = IsometryFamily::from_displacement(&[1.0, 0.0])?;
    let mut failures = 0;
    let mut rows = Vec::new();
    let row = |o: InvarianceOutcome, control: bool| InvarianceRow {
        f_id: o.f_id,
        t: o.t,
        control,
        n_a: o.n_a,
        n_b: o.n_b,
        statistic: o.statistic,
        p_value: o.p_value,
        pass: o.pass,
        beta: a.beta,
        seed: d.seed,
    };
    for f in invariance_functions() {
        for &t in &a.t {
            let (set_a, set_b) = pair(&mut failures)?;
            let o = invariance_test(&f, |p: &[TorusPoint]| pushforward_points(p, &family, t), t, &set_a, &set_b);
            rows.push(row(o, false));
        }
    }
    let (set_a, set_b) = pair(&mut failures)?;
    let sin = CylinderFunction::linear(Inner::Sin { freq: 1, axis: 0 });
    let o = invariance_test(&sin, |p: &[TorusPoint]| half_pushforward_points(p, &family, 0.5), 0.5, &set_a, &set_b);
    rows.push(row(o, true));
    d.failures = failures;
    let passed = rows.iter().filter(|r| !r.control && r.pass).count();
    let total = rows.iter().filter(|r| !r.control).count();
    let control_pass = rows.last().is_some_and(|r| r.pass);
    d.csv("invariance.csv", &rows)?;
    println!(
        "{passed}/{total} configurations pass; negative control {}",
        if control_pass { "passes (unexpected)" } else { "fails as it should" }
    );
    d.finish()
}

fn sharp(mut a: SharpExampleArgs) -> CliResult<()> {
    let cfg = a.grid.resolve(2, 96, 2000);
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report sharp-example", &a.run, &a)?;
    let ens = CloudEnsemble::draw(a.beta, 2, a.n, d.seed, &cfg)?;
    d.failures = ens.failed;
    let rows = sharp_example_report(&a.eps, &ens).map_err(|e| usage(e.to_string()))?;
    d.csv("sharp_example.csv", &rows)?;
    for r in &rows {
        println!(
            "eps {}: strips {:.3} / {:.3} vs {:.3}, certified {}, bound {:.4}, pre-energy {:.4}",
            r.eps,
            r.p_strip,
            r.p_mirror,
            r.threshold,
            r.certified(),
            r.implied_bound,
            r.pre_energy
        );
    }
    d.finish()
}

#[derive(Debug, Serialize)]
struct QuasiRow {
    beta: f64,
    n: usize,
    h: String,
    lhs: f64,
    rhs: f64,
    lhs_stderr: f64,
    rhs_stderr: f64,
    combined_stderr: f64,
    within_band: bool,
    seed: u64,
}

fn quasi(mut a: QuasiInvarianceArgs) -> CliResult<()> {
    let h = Diffeo1D::quadratic(a.a).map_err(|e| usage(e.to_string()))?;
    if a.n < 2 {
        return Err(usage("--n must be at least 2"));
    }
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report quasi-invariance", &a.run, &a)?;
    let mut rows = Vec::new();
    for &beta in &a.beta {
        let r = quasi_invariance_test(
            &h,
            beta,
            |mu: &QuantileMeasure1D| mu.integrate(|x| (std::f64::consts::TAU * x).sin()),
            a.n,
            d.seed,
        )?;
        println!(
            "beta {beta}: lhs {:.5} rhs {:.5} (combined stderr {:.5})",
            r.lhs, r.rhs, r.combined_stderr
        );
        rows.push(QuasiRow {
            within_band: r.within(SIGMA_BAND),
            beta: r.beta,
            n: r.n,
            h: r.h,
            lhs: r.lhs,
            rhs: r.rhs,
            lhs_stderr: r.lhs_stderr,
            rhs_stderr: r.rhs_stderr,
            combined_stderr: r.combined_stderr,
            seed: r.seed,
        });
    }
    d.csv("quasi_invariance.csv", &rows)?;
    d.finish()
}

#[derive(Debug, Serialize)]
struct DualityRow {
    density: String,
    cells: usize,
    entropy: f64,
    reverse_entropy_of_conjugate: f64,
    abs_difference: f64,
    seed: u64,
}

fn duality(mut a: Duality1dArgs) -> CliResult<()> {
    if a.cells < 2 {
        return Err(usage("--cells must be at least 2"));
    }
    resolve_seed(&mut a.run);
    let mut d = RunDir::open("report duality-1d", &a.run, &a)?;
    let densities: Vec<(&str, Density)> = vec![
        ("1/2+x", Box::new(|x| 0.5 + x)),
        ("1+sin(2 pi x)/2", Box::new(|x| 1.0 + 0.5 * (std::f64::consts::TAU * x).sin())),
        ("exp(x)", Box::new(f64::exp)),
        ("2x", Box::new(|x| 2.0 * x)),
    ];
    let mut rows = Vec::new();
    for (name, f) in densities {
        let mu = QuantileMeasure1D::from_density(f, a.cells)?;
        let ent = entropy_1d(&mu);
        let rev = reverse_entropy_1d(&conjugate_1d(&mu), f64::MIN_POSITIVE)?;
        rows.push(DualityRow {
            density: name.to_string(),
            cells: a.cells,
            entropy: ent,
            reverse_entropy_of_conjugate: rev,
            abs_difference: (ent - rev).abs(),
            seed: d.seed,
        });
        println!("{name}: Ent = {ent:.8}, conjugate side {rev:.8}");
    }
    d.csv("duality_1d.csv", &rows)?;
    d.finish()
}
