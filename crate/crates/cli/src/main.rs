//! `wfset`: synthesis, wave-front detection, sweeps and validation.
//!
//! Exit codes: 0 on success (whatever the decisions), 1 on operational
//! failures and failed validation, 2 on usage errors.

mod config;
mod validate;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use wfset_core::detector::{sigma_global, sweep, test_point, DirectionVerdict, RegularityQuery};
use wfset_core::signals::field_header;
use wfset_core::{save_field, verify_conditions, AssociatedFunction, WeightSequence};

use config::{parse_list, parse_point, RunConfig, DEFAULT_LAMBDAS, DEFAULT_SEQUENCE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(anyhow::Error),
}

impl From<wfset_core::Error> for CliError {
    fn from(e: wfset_core::Error) -> Self {
        match e {
            wfset_core::Error::Parse { .. } => CliError::Usage(e.to_string()),
            other => CliError::Run(other.into()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(e.into())
    }
}

#[derive(Parser)]
#[command(name = "wfset", version, about = "Numerical wave front set estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a catalog signal and write a field file.
    Synth(SynthArgs),
    /// Test a single (point, direction) pair.
    Detect(DetectArgs),
    /// Decide every cell of a strided point grid times a direction grid.
    Sweep(SweepArgs),
    /// Singular directions of a compactly supported field from one transform.
    Sigma(SigmaArgs),
    /// Check a weight sequence and tabulate its associated function.
    WeightsCheck(WeightsArgs),
    /// Run the built-in oracle and invariant suites.
    Validate(ValidateArgs),
}

#[derive(Args, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent, except for `synth`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Args, Default)]
struct Source {
    /// Catalog entry, e.g. `delta:x0=0` or `half_plane:n=0,b=0`.
    #[arg(long)]
    signal: Option<String>,
    /// Field file; CSV when the name ends in `.csv`.
    #[arg(long)]
    field: Option<PathBuf>,
    /// `n=<int>[x<int>],dx=<real>[,dim=<1|2>][,origin=<a[/b]>]`.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Default)]
struct Detection {
    /// `bump:R=<real>[,a=<real>]`.
    #[arg(long)]
    window: Option<String>,
    /// `sobolev:s=..`, `flq:q=..,s=..` or `ultra:q=..,s=..,h=..,t=..[,pmax=..]`.
    #[arg(long)]
    backend: Option<String>,
    /// Cone half-angle in degrees.
    #[arg(long, allow_hyphen_values = true)]
    half_angle: Option<f64>,
    /// Neighbourhood half-width `K`.
    #[arg(long)]
    k_radius: Option<f64>,
    /// Centres per axis in `K` (odd, at least 3).
    #[arg(long)]
    centers: Option<usize>,
    /// `dyadic:count=<int>,top=<fraction of the extent>`.
    #[arg(long)]
    schedule: Option<String>,
    /// Tail tolerance.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    /// Retry singular verdicts with narrower cones and other window radii.
    #[arg(long)]
    refine: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    detection: Detection,
    /// Point, `a` or `a/b`.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// `+1`, `-1`, or an angle in degrees.
    #[arg(long, allow_hyphen_values = true)]
    dir: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    detection: Detection,
    /// Number of directions (2 in one dimension).
    #[arg(long)]
    directions: Option<usize>,
    /// Cells sit on every `stride`-th node.
    #[arg(long)]
    stride: Option<usize>,
    /// Only cells within this distance of the middle node, per axis.
    #[arg(long)]
    span: Option<f64>,
    /// Also write the cells as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SigmaArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    half_angle: Option<f64>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    common: Common,
    /// `gevrey:s=<real>,pmax=<int>`.
    #[arg(long)]
    sequence: Option<String>,
    /// Comma-separated λ values for `M(λ)`.
    #[arg(long)]
    lambda: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Drop the absolute phase factor so the closed-form suite must fail.
    #[arg(long)]
    mis_phase: bool,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Common {
    fn into_config(self, command: &str, rest: RunConfig) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(c) = &base.command {
            if c != command {
                return Err(CliError::Usage(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let flags = RunConfig {
            command: Some(command.to_string()),
            out: self.out,
            parallel: self.parallel,
            ..rest
        };
        Ok(base.merge(flags))
    }
}

impl Source {
    fn apply(self, c: &mut RunConfig) {
        c.signal = self.signal;
        c.field = self.field;
        c.grid = self.grid;
    }
}

impl Detection {
    fn apply(self, c: &mut RunConfig) {
        c.window = self.window;
        c.backend = self.backend;
        c.half_angle = self.half_angle;
        c.k_radius = self.k_radius;
        c.centers = self.centers;
        c.schedule = self.schedule;
        c.epsilon = self.epsilon;
        c.refine = flag(self.refine);
    }
}

fn resolve(command: Command) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    let (name, common) = match command {
        Command::Synth(a) => {
            a.source.apply(&mut c);
            ("synth", a.common)
        }
        Command::Detect(a) => {
            a.source.apply(&mut c);
            a.detection.apply(&mut c);
            c.x0 = a.x0.as_deref().map(parse_point).transpose().map_err(CliError::Usage)?;
            c.dir = a.dir;
            ("detect", a.common)
        }
        Command::Sweep(a) => {
            a.source.apply(&mut c);
            a.detection.apply(&mut c);
            c.directions = a.directions;
            c.stride = a.stride;
            c.span = a.span;
            c.csv = a.csv;
            ("sweep", a.common)
        }
        Command::Sigma(a) => {
            a.source.apply(&mut c);
            c.backend = a.backend;
            c.directions = a.directions;
            c.half_angle = a.half_angle;
            c.schedule = a.schedule;
            c.epsilon = a.epsilon;
            ("sigma", a.common)
        }
        Command::WeightsCheck(a) => {
            c.sequence = a.sequence;
            c.lambda = a.lambda.as_deref().map(parse_list).transpose().map_err(CliError::Usage)?;
            ("weights-check", a.common)
        }
        Command::Validate(a) => {
            c.mis_phase = flag(a.mis_phase);
            c.epsilon = a.epsilon;
            ("validate", a.common)
        }
    };
    common.into_config(name, c)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("output serialises")
}

/// Runs the command; `Ok(false)` means it ran but validation failed.
fn execute(c: &RunConfig) -> Result<bool, CliError> {
    match c.command.as_deref() {
        Some("synth") => {
            let out = c.out.as_ref().ok_or_else(|| CliError::Usage("synth needs --out".into()))?;
            let field = c.field()?;
            save_field(&field, out)?;
            println!("{}", field_header(&field));
        }
        Some("detect") => {
            let f = c.field()?;
            let x0 = c.x0.clone().ok_or_else(|| CliError::Usage("missing --x0".into()))?;
            let query = RegularityQuery {
                x0,
                direction: c.direction()?,
                params: c.detector_params()?,
            };
            let cell = test_point(&f, &query)?;
            emit(c.out.as_ref(), &to_json(&cell))?;
        }
        Some("sweep") => {
            let f = c.field()?;
            let cfg = c.sweep_config(f.grid().dim)?;
            let mut report = sweep(&f, &cfg)?;
            report.config = c.echo();
            emit(c.out.as_ref(), &report.to_json())?;
            if let Some(path) = &c.csv {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
        }
        Some("sigma") => {
            #[derive(Serialize)]
            struct SigmaReport {
                config: serde_json::Value,
                directions: Vec<DirectionVerdict>,
            }
            let f = c.field()?;
            let dirs = c.direction_grid(f.grid().dim)?;
            let half_angle = c
                .half_angle_rad()
                .unwrap_or(wfset_core::detector::DEFAULT_HALF_ANGLE_DEG.to_radians());
            let verdicts = sigma_global(&f, &c.backend_spec()?, &dirs, half_angle, &c.schedule_spec()?, &c.rule())?;
            let report = SigmaReport {
                config: c.echo(),
                directions: verdicts,
            };
            emit(c.out.as_ref(), &to_json(&report))?;
        }
        Some("weights-check") => {
            #[derive(Serialize)]
            struct Row {
                lambda: f64,
                value: f64,
                argmax: usize,
                truncated: bool,
            }
            let seq: WeightSequence = c.sequence.as_deref().unwrap_or(DEFAULT_SEQUENCE).parse()?;
            let af = AssociatedFunction::new(seq.clone());
            let lambdas = c.lambda.clone().unwrap_or_else(|| DEFAULT_LAMBDAS.to_vec());
            let rows = lambdas
                .iter()
                .map(|&lambda| {
                    let v = af.evaluate(lambda)?;
                    Ok(Row {
                        lambda,
                        value: v.value,
                        argmax: v.argmax,
                        truncated: v.truncated,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let out = serde_json::json!({
                "conditions": verify_conditions(&seq),
                "associated_function": rows,
            });
            emit(c.out.as_ref(), &to_json(&out))?;
        }
        Some("validate") => {
            let opts = validate::ValidateOptions {
                mis_phase: c.mis_phase.unwrap_or(false),
                rule: c.rule(),
            };
            let suites = validate::run(&opts)?;
            let passed = suites.iter().all(|s| s.passed);
            let report = validate::ValidationReport {
                config: c.echo(),
                passed,
                suites,
            };
            emit(c.out.as_ref(), &to_json(&report))?;
            return Ok(passed);
        }
        other => return Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
    Ok(true)
}

fn run(c: &RunConfig) -> Result<bool, CliError> {
    match c.parallel {
        Some(0) => Err(CliError::Usage("--parallel must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Run(e.into()))?
            .install(|| execute(c)),
        None => execute(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|c| run(&c));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
