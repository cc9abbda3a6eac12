//! `pdip`: command-line front end for sampling, evolution, path constructions,
//! moments, metrics, up-down chains and the statistical checks.

mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{Format, Sink};
use pdip_core::dist::RngStream;
use pdip_core::experiments::{self, ConvergenceParams};
use pdip_core::kernel::{DustCladeRate, KernelConfig};
use pdip_core::moments::{self, Composition};
use pdip_core::partition::{AnnotatedPartition, IntervalPartition};
use pdip_core::scaffold::{self, ScaffoldConfig, Skewer};
use pdip_core::stats::{self, FdConfig};
use pdip_core::updown::{self, StepOrder};
use pdip_core::{depoisson, kernel, metrics, pdip, Truncation};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pdip", version, about = "Poisson-Dirichlet interval-partition evolutions", args_override_self = true)]
struct Cli {
    /// Master seed; replica `i` uses the stream derived from `(seed, i)`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 picks the number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// JSON object whose keys mirror the flags; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample PDIP(α, θ) by stick-breaking.
    SamplePdip(SamplePdipArgs),
    /// Evolve a partition through the exact kernels.
    Evolve(EvolveArgs),
    /// De-Poissonized unit-mass evolution.
    Pdipe(PdipeArgs),
    /// Ray–Knight skewers of the scaffolding-and-spindles construction.
    RayKnight(RayKnightArgs),
    /// Moment polynomials and their generators.
    Moments(MomentsArgs),
    /// Distances between two partitions.
    Metric(MetricArgs),
    /// Up-down chain on compositions.
    Updown(UpdownArgs),
    /// Run a statistical check; exits 1 if it fails.
    Check(CheckArgs),
    /// Scaffold-versus-kernel agreement as ε and the level step are halved.
    ConvergenceStudy(ConvergenceArgs),
}

#[derive(Args, Debug, Clone)]
struct TruncArgs {
    /// Relative mass below which stick-breaking stops.
    #[arg(long, default_value_t = Truncation::default().mass)]
    trunc: f64,
    /// Maximum number of blocks per PDIP draw.
    #[arg(long, default_value_t = Truncation::default().max_blocks)]
    max_blocks: usize,
}

impl TruncArgs {
    fn get(&self) -> Truncation {
        Truncation::new(self.trunc, self.max_blocks)
    }
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    #[command(flatten)]
    trunc: TruncArgs,
    /// Absolute mass floor for PDIP draws inside kernel steps.
    #[arg(long, default_value_t = 0.0)]
    abs_mass: f64,
    #[arg(long, value_enum, default_value_t = DustRate::HalfInverseLevel)]
    dust_rate: DustRate,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum DustRate {
    HalfInverseLevel,
    AlphaOverLevel,
}

impl KernelArgs {
    fn get(&self) -> KernelConfig {
        KernelConfig {
            trunc: self.trunc.get(),
            abs_mass: self.abs_mass,
            dust_rate: match self.dust_rate {
                DustRate::HalfInverseLevel => DustCladeRate::HalfInverseLevel,
                DustRate::AlphaOverLevel => DustCladeRate::AlphaOverLevel,
            },
        }
    }
}

#[derive(Args, Debug)]
struct SamplePdipArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    theta: f64,
    #[command(flatten)]
    trunc: TruncArgs,
    /// Number of samples.
    #[arg(long, default_value_t = 1)]
    n: usize,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    theta: f64,
    /// Increasing levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<f64>,
    /// Initial partition as JSON; default is one block of mass 1.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug)]
struct PdipeArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    init: Option<PathBuf>,
    /// Increasing de-Poissonized times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    ugrid: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    level_step: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    kernel: KernelArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum RkMode {
    Dust,
    Perturbed,
    Unperturbed,
}

#[derive(Args, Debug, Clone)]
struct ScaffoldArgs {
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    level_step: f64,
    /// Disable the small-spindle mass compensation.
    #[arg(long)]
    no_compensate: bool,
}

impl ScaffoldArgs {
    fn get(&self, alpha: f64) -> ScaffoldConfig {
        let mut c = ScaffoldConfig::new(alpha, self.eps, self.level_step);
        c.compensate_small = !self.no_compensate;
        c
    }
}

#[derive(Args, Debug)]
struct RayKnightArgs {
    #[arg(long, value_enum)]
    mode: RkMode,
    #[arg(long)]
    alpha: f64,
    /// Immigration parameter (perturbed mode).
    #[arg(long)]
    theta: Option<f64>,
    /// Initial dust mass (dust mode).
    #[arg(long)]
    z: Option<f64>,
    /// Starting height (perturbed and unperturbed modes).
    #[arg(long)]
    x: Option<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<f64>,
    #[command(flatten)]
    scaffold: ScaffoldArgs,
    #[arg(long, default_value_t = 1)]
    reps: usize,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    /// Composition such as `2,1`.
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    partition: PathBuf,
    /// Evaluate `m*` instead of `m°`.
    #[arg(long)]
    star: bool,
    /// Evaluate the generator `𝒜_{α,θ}` applied to the moment.
    #[arg(long, requires_all = ["alpha", "theta"])]
    generator: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args, Debug)]
struct MetricArgs {
    #[arg(long)]
    beta: PathBuf,
    #[arg(long)]
    gamma: PathBuf,
    /// Also compute `d_α` with diversity marks estimated at `--h-grid`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3])]
    h_grid: Vec<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Order {
    DownUp,
    UpDown,
}

#[derive(Args, Debug)]
struct UpdownArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    steps: usize,
    /// Transitions discarded before output.
    #[arg(long, default_value_t = 0)]
    burnin: usize,
    #[arg(long, value_enum, default_value_t = Order::DownUp)]
    order: Order,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum CheckName {
    PseudoStationarity,
    GeneratorFd,
    ScaffoldKernel,
    TotalMass,
    DustEntrance,
    Updown,
    RayKnight,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(value_enum)]
    test: CheckName,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 0.25)]
    y: f64,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    /// Initial dust mass (dust-entrance) or block mass (scaffold-kernel).
    #[arg(long, default_value_t = 1.0)]
    z: f64,
    /// Starting height (ray-knight).
    #[arg(long, default_value_t = 0.5)]
    x: f64,
    /// Levels (ray-knight).
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
    levels: Vec<f64>,
    /// Compositions separated by `;` (generator-fd).
    #[arg(long, default_value = "(2);(1,2)")]
    sigma: String,
    /// Base partition (generator-fd, total-mass); default blocks 0.5, 0.3, 0.2.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.01, 0.005])]
    u_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    level_step: f64,
    #[arg(long, default_value_t = 0.1)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long)]
    no_compensate: bool,
    /// Chain size (updown).
    #[arg(long, default_value_t = 4)]
    n: u32,
    /// Transitions per chain (updown).
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Also write the report to this file.
    #[arg(long)]
    json_report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 0.3)]
    y: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps0: f64,
    #[arg(long, default_value_t = 1e-3)]
    level_step0: f64,
    #[arg(long, default_value_t = 1)]
    halvings: u32,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 100_000)]
    ref_reps: usize,
    #[arg(long, default_value_t = 0.02)]
    tol: f64,
    #[arg(long)]
    no_compensate: bool,
}

/// Failure of a run, mapped to an exit code.
enum Failure {
    Usage(String),
    CheckFailed,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let argv = match config::merged_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_partition(path: &PathBuf) -> Res<IntervalPartition> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(lens) = v.get("lengths") {
        let lens: Vec<f64> = serde_json::from_value(lens.clone())?;
        if lens.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(Failure::Usage(format!("{}: lengths must be positive", path.display())));
        }
        return Ok(IntervalPartition::from_lengths(&lens));
    }
    Ok(serde_json::from_value(v).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn init_or_unit(path: &Option<PathBuf>) -> Res<IntervalPartition> {
    match path {
        Some(p) => read_partition(p),
        None => Ok(IntervalPartition::from_lengths(&[1.0])),
    }
}

fn replicas<T: Send>(seed: u64, reps: usize, f: impl Fn(&mut RngStream) -> T + Sync) -> Vec<T> {
    (0..reps).into_par_iter().map(|i| f(&mut RngStream::derive(seed, &[i as u64]))).collect()
}

fn partition_fields(p: &IntervalPartition) -> Vec<(&'static str, Value)> {
    vec![
        ("mass", json!(p.mass())),
        ("dust", json!(p.dust())),
        ("n_blocks", json!(p.len())),
        ("largest", json!(p.largest())),
        ("blocks", json!(p.blocks())),
    ]
}

fn record(head: Vec<(&'static str, Value)>, p: &IntervalPartition) -> Value {
    let mut m = serde_json::Map::new();
    for (k, v) in head.into_iter().chain(partition_fields(p)) {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

fn to_value<T: Serialize>(x: &T) -> Res<Value> {
    Ok(serde_json::to_value(x)?)
}

fn run(cli: &Cli) -> Res<()> {
    let mut sink = Sink::open(cli.out.as_deref(), cli.format)?;
    let seed = cli.seed;
    match &cli.command {
        Command::SamplePdip(a) => {
            let trunc = a.trunc.get();
            let rows = replicas(seed, a.n, |rng| pdip::sample_pdip_stickbreaking(a.alpha, a.theta, trunc, rng));
            for (i, p) in rows.into_iter().enumerate() {
                sink.write(&record(vec![("rep", json!(i))], &p?))?;
            }
        }
        Command::Evolve(a) => {
            let init = init_or_unit(&a.init)?;
            let cfg = a.kernel.get();
            let rows = replicas(seed, a.reps, |rng| kernel::evolve(&init, &a.levels, a.alpha, a.theta, cfg, rng));
            for (i, path) in rows.into_iter().enumerate() {
                for (y, p) in a.levels.iter().zip(path?) {
                    sink.write(&record(vec![("rep", json!(i)), ("level", json!(y))], &p))?;
                }
            }
        }
        Command::Pdipe(a) => {
            let init = init_or_unit(&a.init)?;
            let cfg = a.kernel.get();
            let rows = replicas(seed, a.reps, |rng| depoisson::simulate_pdipe(&init, a.alpha, a.theta, &a.ugrid, a.level_step, cfg, rng));
            for (i, path) in rows.into_iter().enumerate() {
                let path = path?;
                if let Some(y) = path.absorbed_at {
                    eprintln!("replica {i}: absorbed at level {y} before the last u");
                }
                for s in path.states {
                    let head = vec![
                        ("rep", json!(i)),
                        ("u", json!(s.u)),
                        ("tau", json!(s.tau)),
                        ("level", json!(s.level)),
                        ("snap", json!(s.snap)),
                    ];
                    sink.write(&record(head, &s.state))?;
                }
            }
        }
        Command::RayKnight(a) => {
            let cfg = a.scaffold.get(a.alpha);
            let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Failure::Usage(format!("--{name} is required in this mode")));
            let rows: Vec<Result<Vec<Skewer>, _>> = match a.mode {
                RkMode::Dust => {
                    let z = need(a.z, "z")?;
                    replicas(seed, a.reps, |rng| scaffold::ray_knight_dust(z, &a.levels, cfg, rng))
                }
                RkMode::Perturbed => {
                    let (x, th) = (need(a.x, "x")?, need(a.theta, "theta")?);
                    replicas(seed, a.reps, |rng| scaffold::ray_knight_perturbed(x, th, &a.levels, cfg, rng))
                }
                RkMode::Unperturbed => {
                    let x = need(a.x, "x")?;
                    replicas(seed, a.reps, |rng| scaffold::ray_knight_unperturbed(x, &a.levels, cfg, rng))
                }
            };
            for (i, sks) in rows.into_iter().enumerate() {
                for sk in sks? {
                    let head = vec![
                        ("rep", json!(i)),
                        ("requested", json!(sk.requested)),
                        ("level", json!(sk.level)),
                        ("snap", json!(sk.snap)),
                    ];
                    sink.write(&record(head, &sk.partition))?;
                }
            }
        }
        Command::Moments(a) => {
            let sigma: Composition = a.sigma.parse().map_err(Failure::Usage)?;
            let beta = read_partition(&a.partition)?;
            let (kind, value) = match (a.generator, a.star) {
                (false, false) => ("m_circ", moments::m_circ(&sigma, &beta)),
                (false, true) => ("m_star", moments::m_star(&sigma, &beta)),
                (true, star) => {
                    let (al, th) = (a.alpha.unwrap_or_default(), a.theta.unwrap_or_default());
                    if star {
                        ("generator_star", moments::generator_star(&sigma, &beta, al, th)?)
                    } else {
                        ("generator_circ", moments::generator_circ(&sigma, &beta, al, th)?)
                    }
                }
            };
            sink.write(&json!({ "sigma": sigma.to_string(), "kind": kind, "value": value }))?;
        }
        Command::Metric(a) => {
            let (b, g) = (read_partition(&a.beta)?, read_partition(&a.gamma)?);
            let mut rec = json!({
                "hausdorff_complement": metrics::hausdorff_complement(&b, &g),
                "dprime_h": metrics::dprime_h(&b, &g),
            });
            if let Some(al) = a.alpha {
                let (ab, ag): (AnnotatedPartition, AnnotatedPartition) =
                    (pdip::annotate_diversity(&b, al, &a.h_grid), pdip::annotate_diversity(&g, al, &a.h_grid));
                rec["d_alpha"] = json!(metrics::d_alpha(&ab, &ag));
            }
            sink.write(&rec)?;
        }
        Command::Updown(a) => {
            let order = match a.order {
                Order::DownUp => StepOrder::DownThenUp,
                Order::UpDown => StepOrder::UpThenDown,
            };
            let mut rng = RngStream::derive(seed, &[0]);
            let path = updown::run_chain(a.n, a.alpha, a.theta, a.burnin + a.steps, order, &mut rng)?;
            for (step, c) in path.iter().enumerate().skip(a.burnin) {
                sink.write(&json!({ "step": step, "composition": c.to_string(), "parts": c.len() }))?;
            }
        }
        Command::Check(a) => return check(a, seed, &mut sink),
        Command::ConvergenceStudy(a) => {
            let p = ConvergenceParams {
                alpha: a.alpha,
                b: a.b,
                y: a.y,
                eps0: a.eps0,
                level_step0: a.level_step0,
                halvings: a.halvings,
                reps: a.reps,
                ref_reps: a.ref_reps,
                tol: a.tol,
                compensate_small: !a.no_compensate,
                seed,
            };
            let report = experiments::scaffold_kernel_study(&p)?;
            for row in &report.rows {
                sink.write(&json!({
                    "eps": row.eps,
                    "level_step": row.level_step,
                    "ks_mass": row.ks_mass.d,
                    "ks_mass_p": row.ks_mass.p,
                    "ks_blocks": row.ks_blocks.d,
                    "mean_mass": row.mean_mass.mean,
                    "mean_mass_se": row.mean_mass.se,
                    "p_empty": row.p_empty,
                    "kernel_p_empty": report.kernel_p_empty,
                    "mean_jumps": row.mean_jumps,
                }))?;
            }
        }
    }
    sink.finish()?;
    Ok(())
}

fn check(a: &CheckArgs, seed: u64, sink: &mut Sink) -> Res<()> {
    let kcfg = a.kernel.get();
    let base = || -> Res<IntervalPartition> {
        match &a.partition {
            Some(p) => read_partition(p),
            None => Ok(IntervalPartition::from_lengths(&[0.5, 0.3, 0.2])),
        }
    };
    let (report, pass) = match a.test {
        CheckName::PseudoStationarity => {
            let r = stats::pseudo_stationarity_test(a.alpha, a.theta, a.y, a.reps, kcfg, seed)?;
            (to_value(&r)?, r.pass)
        }
        CheckName::GeneratorFd => {
            let sigmas = a
                .sigma
                .split(';')
                .map(|s| s.parse::<Composition>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::Usage)?;
            let mut kernel = kcfg;
            if a.kernel.abs_mass == 0.0 {
                kernel.abs_mass = FdConfig::default().kernel.abs_mass;
            }
            let cfg = FdConfig { u_list: a.u_list.clone(), reps: a.reps, level_step: a.level_step, rel_tol: a.rel_tol, kernel, seed };
            let r = stats::generator_fd_test(&base()?, &sigmas, a.alpha, a.theta, &cfg)?;
            let pass = r.iter().all(|x| x.pass);
            (to_value(&r)?, pass)
        }
        CheckName::ScaffoldKernel => {
            let p = ConvergenceParams {
                alpha: a.alpha,
                b: a.z,
                y: a.y,
                eps0: a.eps,
                level_step0: a.level_step,
                reps: a.reps,
                ref_reps: 10 * a.reps,
                compensate_small: !a.no_compensate,
                seed,
                ..ConvergenceParams::default()
            };
            let r = experiments::scaffold_kernel_study(&p)?;
            (to_value(&r)?, r.pass)
        }
        CheckName::TotalMass => {
            let r = experiments::total_mass_check(&base()?, a.alpha, a.theta, a.y, a.reps, kcfg, seed)?;
            (to_value(&r)?, r.pass)
        }
        CheckName::DustEntrance => {
            let r = experiments::dust_entrance_check(a.alpha, a.z, a.y, a.reps, kcfg, seed)?;
            (to_value(&r)?, r.pass)
        }
        CheckName::Updown => {
            let r = experiments::updown_stationarity(a.n, a.alpha, a.theta, a.reps, a.steps, seed)?;
            (to_value(&r)?, r.pass)
        }
        CheckName::RayKnight => {
            let mut cfg = ScaffoldConfig::new(a.alpha, a.eps, a.level_step);
            cfg.compensate_small = !a.no_compensate;
            let r = experiments::ray_knight_mass_check(a.x, a.theta, &a.levels, cfg, a.reps, seed)?;
            (to_value(&r)?, r.pass)
        }
    };
    let full = json!({ "test": a.test.to_possible_value().map(|v| v.get_name().to_string()), "seed": seed, "pass": pass, "report": report });
    if let Some(path) = &a.json_report {
        let text = serde_json::to_string_pretty(&full)?;
        std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    sink.write(&full)?;
    sink.finish()?;
    if pass {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}
