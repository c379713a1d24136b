//! The `bqc` command line. Every subcommand is a pure function of its flags
//! and seed; output goes to stdout unless a path is given.
//!
//! Exit codes: 0 success, 1 a bound check failed, 2 bad invocation or
//! parameters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::{evaluate_attack, optimize_attack, AttackReport, AttackSpec, Coupling};
use crate::bounds::{circular_product, detection_bound, fidelity_bound};
use crate::error::{Error, Result};
use crate::protocol::{compare_to_bound, monte_carlo_with, BoundCheck, ProtocolConfig, RunStats, Variant};
use crate::rng::{stream, Stream, StreamRng};
use crate::rvf::{RvfInput, RvfInstance, RvfKind, RvfOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bqc", version, about = "Blind quantum computation with decoys: simulator and bound checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the fidelity tradeoff curve and the detection floor.
    Bounds(BoundsArgs),
    /// Monte-Carlo runs of the protocol against an attack.
    Simulate(SimulateArgs),
    /// Search for attacks near the tradeoff curve.
    Optimize(OptimizeArgs),
    /// Random checks of the circular-product inequality.
    LemmaCheck(CircularCheckArgs),
    /// Sample input/output pairs of a verifiable function.
    Rvf(RvfArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub decoys: usize,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Write tradeoff.csv and detection.csv here instead of stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AttackName {
    Honest,
    BlindGuess,
    MeasureResend,
    PartialMeasure,
    RandomKraus,
    EntanglingProbe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CouplingName {
    Identity,
    ControlledCopy,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RvfName {
    Toy,
    Factoring,
    GraphIso,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantName {
    Interactive,
    Noninteractive,
}

/// Which verifiable function to use.
#[derive(Debug, Args)]
pub struct RvfSelect {
    #[arg(long = "rvf", value_enum, default_value_t = RvfName::Toy)]
    pub rvf: RvfName,
    /// Domain size of the toy function.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Prime size for factoring.
    #[arg(long, default_value_t = 4)]
    pub bits: u32,
    #[arg(long, default_value_t = 5)]
    pub vertices: usize,
    #[arg(long, default_value_t = 4)]
    pub edges: usize,
}

impl RvfSelect {
    pub fn kind(&self) -> RvfKind {
        match self.rvf {
            RvfName::Toy => RvfKind::Toy { n: self.n },
            RvfName::Factoring => RvfKind::Factoring { bits: self.bits },
            RvfName::GraphIso => RvfKind::GraphIso {
                vertices: self.vertices,
                edges: self.edges,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = VariantName::Interactive)]
    pub variant: VariantName,
    #[arg(long, value_enum, default_value_t = AttackName::Honest)]
    pub attack: AttackName,
    /// Measurement strength in [0, 1] for partial-measure.
    #[arg(long, default_value_t = 0.5)]
    pub strength: f64,
    /// Kraus operator count for random-kraus.
    #[arg(long, default_value_t = 2)]
    pub operators: usize,
    /// Ancilla size of entangling-probe, in base-n digits.
    #[arg(long, default_value_t = 2)]
    pub ancilla_digits: usize,
    #[arg(long, value_enum, default_value_t = CouplingName::ControlledCopy)]
    pub coupling: CouplingName,
    #[command(flatten)]
    pub rvf: RvfSelect,
    #[arg(long, default_value_t = 5)]
    pub decoys: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, action = ArgAction::Set)]
    pub announce_position: Option<bool>,
    /// Defaults to true for interactive and false for noninteractive runs.
    #[arg(long, action = ArgAction::Set)]
    pub stop_on_detect: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=4))]
    pub n: u64,
    /// Uniform grid of targets on [1/n, 1].
    #[arg(long, default_value_t = 5)]
    pub grid: usize,
    /// Explicit comma-separated targets; overrides the grid.
    #[arg(long, value_delimiter = ',')]
    pub g_targets: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CircularCheckArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RvfArgs {
    #[arg(long = "instance", value_enum, default_value_t = RvfName::Factoring)]
    pub instance: RvfName,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub bits: u32,
    #[arg(long, default_value_t = 5)]
    pub vertices: usize,
    #[arg(long, default_value_t = 4)]
    pub edges: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Optimize(a) => cmd_optimize(a, out),
        Command::LemmaCheck(a) => cmd_circular_check(a, out),
        Command::Rvf(a) => cmd_rvf(a, out),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("i/o: {e}"))
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(io),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

/// Fixed-point with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (16 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// `(tradeoff.csv, detection.csv)` contents.
pub fn bounds_tables(n: usize, decoys: usize, grid: usize) -> Result<(String, String)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("--n must be at least 2, got {n}")));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter(format!("--grid must be at least 2, got {grid}")));
    }
    let mut tradeoff = String::from("G,F_bound\n");
    for g in uniform_grid(1.0 / n as f64, 1.0, grid) {
        tradeoff += &format!("{},{}\n", fmt_float(g), fmt_float(fidelity_bound(g, n)?));
    }
    let mut detection = String::from("I,D_bound\n");
    for i in uniform_grid(0.0, (n as f64).log2(), grid) {
        detection += &format!("{},{}\n", fmt_float(i), fmt_float(detection_bound(i, n, decoys)?));
    }
    Ok((tradeoff, detection))
}

fn cmd_bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<i32> {
    let (tradeoff, detection) = bounds_tables(a.n, a.decoys, a.grid)?;
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io)?;
            emit(&tradeoff, Some(&dir.join("tradeoff.csv")), out)?;
            emit(&detection, Some(&dir.join("detection.csv")), out)?;
        }
        None => emit(&format!("{tradeoff}\n{detection}"), None, out)?,
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub protocol: ProtocolConfig,
    pub attack: AttackSpec,
    pub trials: usize,
    pub n: usize,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub config: SimulateConfig,
    pub stats: RunStats,
    pub attack_report: Option<AttackReport>,
    pub bound_check: BoundCheck,
}

impl SimulateArgs {
    pub fn attack_spec(&self) -> AttackSpec {
        match self.attack {
            AttackName::Honest | AttackName::BlindGuess => AttackSpec::Honest,
            AttackName::MeasureResend => AttackSpec::MeasureResend,
            AttackName::PartialMeasure => AttackSpec::PartialMeasure {
                strength: self.strength,
            },
            AttackName::RandomKraus => AttackSpec::RandomKraus {
                operators: self.operators,
                seed: self.seed,
            },
            AttackName::EntanglingProbe => AttackSpec::EntanglingProbe {
                digits: self.ancilla_digits,
                coupling: match self.coupling {
                    CouplingName::Identity => Coupling::Identity,
                    CouplingName::ControlledCopy => Coupling::ControlledCopy,
                    CouplingName::Random => Coupling::Random { seed: self.seed },
                },
            },
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let variant = match self.variant {
            VariantName::Interactive => Variant::Interactive,
            VariantName::Noninteractive => Variant::Noninteractive,
        };
        let mut cfg = ProtocolConfig::new(self.rvf.kind(), self.decoys, variant, self.seed);
        if let Some(v) = self.announce_position {
            cfg.announce_position = v;
        }
        if let Some(v) = self.stop_on_detect {
            cfg.stop_on_detect = v;
        }
        cfg
    }
}

/// Runs the Monte-Carlo experiment described by `a`.
pub fn simulate(a: &SimulateArgs) -> Result<SimulateReport> {
    if a.trials == 0 {
        return Err(Error::InvalidParameter("--trials must be at least 1".into()));
    }
    let cfg = a.protocol_config();
    let plan = a.attack_spec();
    let instance = RvfInstance::new(cfg.rvf)?;
    let n = instance.domain_size();
    let prototype = plan.build(n)?;
    let attack_report = match evaluate_attack(prototype.as_ref()) {
        Ok(r) => Some(r),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let stats = monte_carlo_with(&cfg, &instance, prototype.as_ref(), a.trials)?;
    let bound_check = compare_to_bound(&stats, attack_report.as_ref(), plan.is_individual())?;
    Ok(SimulateReport {
        config: SimulateConfig {
            protocol: cfg,
            attack: plan,
            trials: a.trials,
            n,
        },
        stats,
        attack_report,
        bound_check,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::InvalidParameter(format!("serialization: {e}")))
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let report = simulate(a)?;
    emit(&to_json(&report)?, a.out.as_deref(), out)?;
    Ok(if report.bound_check.pass { EXIT_OK } else { EXIT_VIOLATION })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimizeRow {
    pub g_target: f64,
    pub g_achieved: f64,
    pub f_achieved: f64,
    pub f_bound: f64,
    pub gap: f64,
}

/// One optimizer run per target, each with its own stream.
pub fn optimize_rows(n: usize, targets: &[f64], budget: usize, seed: u64) -> Result<Vec<OptimizeRow>> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidParameter(format!("--n must be 2, 3 or 4, got {n}")));
    }
    targets
        .par_iter()
        .enumerate()
        .map(|(i, &g_target)| {
            let mut rng = stream(seed, i as u64, Stream::Harness);
            let best = optimize_attack(n, g_target, budget, &mut rng)?;
            let f_bound = fidelity_bound(best.report.g, n)?;
            Ok(OptimizeRow {
                g_target,
                g_achieved: best.report.g,
                f_achieved: best.report.f,
                f_bound,
                gap: f_bound - best.report.f,
            })
        })
        .collect()
}

fn cmd_optimize(a: &OptimizeArgs, out: &mut dyn Write) -> Result<i32> {
    let n = a.n as usize;
    let targets = match &a.g_targets {
        Some(t) => t.clone(),
        None => {
            if a.grid < 2 {
                return Err(Error::InvalidParameter(format!("--grid must be at least 2, got {}", a.grid)));
            }
            uniform_grid(1.0 / n as f64, 1.0, a.grid)
        }
    };
    let rows = optimize_rows(n, &targets, a.budget, a.seed)?;
    let mut csv = String::from("G_target,G_achieved,F_achieved,F_bound,gap\n");
    let mut violated = false;
    for r in &rows {
        violated |= r.f_achieved > r.f_bound + 1e-9;
        csv += &[r.g_target, r.g_achieved, r.f_achieved, r.f_bound, r.gap]
            .map(fmt_float)
            .join(",");
        csv.push('\n');
    }
    emit(&csv, a.out.as_deref(), out)?;
    Ok(if violated { EXIT_VIOLATION } else { EXIT_OK })
}

/// Concave maps of `[0, 1]` into `[0, 1]` used to exercise the
/// circular-product inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConcaveFamily {
    /// The fidelity bound, held at 1 below `1/n`.
    Fidelity { n: usize },
    /// `x(2 − x)`.
    Quadratic,
    /// `c√x` with `0 < c ≤ 1`.
    ScaledSqrt { c: f64 },
}

impl ConcaveFamily {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ConcaveFamily::Fidelity { n } => {
                fidelity_bound(x.max(1.0 / n as f64), n).expect("argument clamped into the domain")
            }
            ConcaveFamily::Quadratic => x * (2.0 - x),
            ConcaveFamily::ScaledSqrt { c } => c * x.sqrt(),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        match rng.random_range(0..3) {
            0 => ConcaveFamily::Fidelity {
                n: rng.random_range(2..=8),
            },
            1 => ConcaveFamily::Quadratic,
            _ => ConcaveFamily::ScaledSqrt {
                c: 1.0 - rng.random::<f64>(),
            },
        }
    }
}

/// `f(mean)^N − π(xs)` for `N + 1 = xs.len()`.
pub fn circular_slack(f: ConcaveFamily, xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let rhs = f.eval(mean).powi(xs.len() as i32 - 1);
    rhs - circular_product(xs, |x| f.eval(x))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircularViolation {
    pub trial: usize,
    pub function: ConcaveFamily,
    pub xs: Vec<f64>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircularSummary {
    pub trials: usize,
    pub seed: u64,
    pub pass_count: usize,
    pub violations: Vec<CircularViolation>,
    /// Smallest `f(mean)^N − π(xs)` seen.
    pub worst_margin: f64,
}

pub const CIRCULAR_TOLERANCE: f64 = 1e-12;

/// Random families and random vectors of 1 to 16 entries in `[0, 1]`.
pub fn circular_check(trials: usize, seed: u64) -> Result<CircularSummary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("--trials must be at least 1".into()));
    }
    let mut rng: StreamRng = stream(seed, 0, Stream::Harness);
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let f = ConcaveFamily::random(&mut rng);
        let len = rng.random_range(1..=16);
        let xs: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let slack = circular_slack(f, &xs);
        worst = worst.min(slack);
        if slack < -CIRCULAR_TOLERANCE {
            violations.push(CircularViolation {
                trial,
                function: f,
                xs,
                slack,
            });
        }
    }
    Ok(CircularSummary {
        trials,
        seed,
        pass_count: trials - violations.len(),
        violations,
        worst_margin: worst,
    })
}

fn cmd_circular_check(a: &CircularCheckArgs, out: &mut dyn Write) -> Result<i32> {
    let summary = circular_check(a.trials, a.seed)?;
    emit(&to_json(&summary)?, a.out.as_deref(), out)?;
    Ok(if summary.violations.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
}

#[derive(Debug, Serialize)]
pub struct RvfLine {
    pub instance: &'static str,
    pub input: RvfInput,
    pub output: RvfOutput,
    pub verified: bool,
}

pub fn rvf_lines(kind: RvfKind, count: usize, seed: u64) -> Result<Vec<RvfLine>> {
    let instance = RvfInstance::new(kind)?;
    let mut rng = stream(seed, 0, Stream::Harness);
    (0..count)
        .map(|_| {
            let pair = instance.sample(&mut rng);
            let verified = instance.verify(&pair.input, &pair.output)?;
            Ok(RvfLine {
                instance: instance.name(),
                input: pair.input,
                output: pair.output,
                verified,
            })
        })
        .collect()
}

fn cmd_rvf(a: &RvfArgs, out: &mut dyn Write) -> Result<i32> {
    let select = RvfSelect {
        rvf: a.instance,
        n: a.n,
        bits: a.bits,
        vertices: a.vertices,
        edges: a.edges,
    };
    let mut text = String::new();
    for line in rvf_lines(select.kind(), a.count, a.seed)? {
        text += &serde_json::to_string(&line).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        text.push('\n');
    }
    emit(&text, a.out.as_deref(), out)?;
    Ok(EXIT_OK)
}
