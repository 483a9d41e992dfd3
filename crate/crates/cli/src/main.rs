mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use mandy_core::diagnostics::BenchGrid;
use mandy_core::io::{self, CoefficientDocument, PinvDocument, TtDocument};

use crate::config::{CommandKind, DictSpec, MethodChoice, RunConfig, SamplingKind, SystemSpec};

pub const CONFIG: i32 = 2;
pub const SIMULATION: i32 = 3;
pub const SOLVE: i32 = 4;

/// An error together with the process exit code it maps to.
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

pub type Outcome<T> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "mandy", version, about = "Sparse and tensor-train identification of dynamical systems")]
struct Cli {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Largest dense array, in entries, any command may allocate.
    #[arg(long, global = true, env = "MANDY_SIZE_CAP")]
    cap: Option<usize>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample states and derivatives of a system and write them as CSV.
    Simulate(SimulateArgs),
    /// Recover coefficients from snapshot data.
    Identify(IdentifyArgs),
    /// Relative differences between coefficient files.
    Compare(CompareArgs),
    /// Time both methods over a grid of dimensions and snapshot counts.
    Bench(BenchArgs),
    /// Truncation profile of a vector or tensor train.
    Diagnose(DiagnoseArgs),
    /// Parse files of every supported kind and report which ones are valid.
    SchemaCheck(SchemaArgs),
}

#[derive(Args, Debug, Default)]
struct SystemArgs {
    /// chua, fpu or kuramoto
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, value_enum)]
    sampling: Option<SamplingKind>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    high: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    include_end: Option<bool>,
    /// Comma separated initial state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Preset name: chua-monomial, chua-abs, fpu-cubic or kuramoto-trig.
    #[arg(long)]
    dict: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Prefix of the written files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    files: Vec<PathBuf>,
    /// Also compare each file with the exact coefficients of its system.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long)]
    dict: Option<String>,
    /// JSON file holding a grid object.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Override the mode sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SchemaArgs {
    files: Vec<PathBuf>,
}

fn code<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Outcome<T> {
    r.map_err(|e| Failure {
        code: CONFIG,
        error: e.into(),
    })
}

fn flags(cmd: &Cmd) -> Outcome<RunConfig> {
    let name = |s: &Option<String>| s.clone().map(SystemSpec::Name);
    let dict = |s: &Option<String>| s.clone().map(DictSpec::Preset);
    Ok(match cmd {
        Cmd::Simulate(a) => RunConfig {
            command: Some(CommandKind::Simulate),
            system: name(&a.sys.system),
            d: a.sys.d,
            seed: a.sys.seed,
            sampling: a.sampling,
            m: a.m,
            low: a.low,
            high: a.high,
            t0: a.t0,
            t_end: a.t_end,
            dt: a.dt,
            include_end: a.include_end,
            x0: a.x0.clone(),
            output: a.out.clone(),
            ..Default::default()
        },
        Cmd::Identify(a) => RunConfig {
            command: Some(CommandKind::Identify),
            input: a.input.clone(),
            dictionary: dict(&a.dict),
            method: a.method,
            epsilon: a.epsilon,
            lambda: a.lambda,
            output: a.out.clone(),
            ..Default::default()
        },
        Cmd::Compare(a) => RunConfig {
            command: Some(CommandKind::Compare),
            inputs: (!a.files.is_empty()).then(|| a.files.clone()),
            exact: a.exact.then_some(true),
            output: a.out.clone(),
            ..Default::default()
        },
        Cmd::Bench(a) => {
            let grid = match &a.grid {
                Some(p) => Some(code(
                    io::read_json::<BenchGrid>(p).with_context(|| format!("reading grid {}", p.display())),
                )?),
                None => None,
            };
            RunConfig {
                command: Some(CommandKind::Bench),
                system: name(&a.system),
                ds: a.d.clone(),
                ms: a.m.clone(),
                epsilons: a.epsilon.clone(),
                method: a.method,
                dictionary: dict(&a.dict),
                grid,
                seed: a.seed,
                output: a.out.clone(),
                ..Default::default()
            }
        }
        Cmd::Diagnose(a) => RunConfig {
            command: Some(CommandKind::Diagnose),
            input: a.input.clone(),
            modes: a.modes.clone(),
            output: a.out.clone(),
            ..Default::default()
        },
        Cmd::SchemaCheck(_) => RunConfig::default(),
    })
}

fn schema_check(files: &[PathBuf]) -> Outcome<()> {
    if files.is_empty() {
        return Err(Failure {
            code: CONFIG,
            error: anyhow!("schema-check needs at least one file"),
        });
    }
    let mut bad = 0;
    for f in files {
        let verdict = check_one(f);
        match &verdict {
            Ok(kind) => println!("{}: ok ({kind})", f.display()),
            Err(e) => {
                bad += 1;
                println!("{}: invalid ({e:#})", f.display());
            }
        }
    }
    if bad > 0 {
        return Err(Failure {
            code: CONFIG,
            error: anyhow!("{bad} of {} files failed to parse", files.len()),
        });
    }
    Ok(())
}

fn check_one(path: &std::path::Path) -> anyhow::Result<&'static str> {
    commands::require_exists(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext == "csv" {
        let header = std::fs::read_to_string(path)?.lines().next().unwrap_or("").to_string();
        if header.starts_with("method,") {
            io::read_bench_csv(path)?;
            return Ok("benchmark table");
        }
        io::read_snapshot_csv(path)?;
        return Ok("snapshot table");
    }
    let text = std::fs::read_to_string(path)?;
    if let Ok(doc) = serde_json::from_str::<CoefficientDocument>(&text) {
        doc.to_coefficients()?;
        return Ok("coefficients");
    }
    if let Ok(doc) = serde_json::from_str::<PinvDocument>(&text) {
        doc.to_pseudoinverse()?;
        return Ok("pseudoinverse");
    }
    if let Ok(doc) = serde_json::from_str::<TtDocument>(&text) {
        doc.to_tensor_train()?;
        return Ok("tensor train");
    }
    if serde_json::from_str::<mandy_core::systems::SnapshotMeta>(&text).is_ok() {
        return Ok("snapshot metadata");
    }
    if serde_json::from_str::<commands::IdentifyReport>(&text).is_ok() {
        return Ok("identify report");
    }
    if serde_json::from_str::<commands::BenchManifest>(&text).is_ok() {
        return Ok("benchmark manifest");
    }
    if serde_json::from_str::<mandy_core::diagnostics::TruncationProfile>(&text).is_ok() {
        return Ok("truncation profile");
    }
    if serde_json::from_str::<commands::VectorDocument>(&text).is_ok() {
        return Ok("vector");
    }
    let cfg: RunConfig = serde_json::from_str(&text).context("not a recognised document")?;
    let _ = cfg;
    Ok("run configuration")
}

fn run(cli: Cli) -> Outcome<()> {
    let base = match &cli.config {
        Some(p) => {
            let text = code(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))?;
            code(serde_json::from_str::<RunConfig>(&text).with_context(|| format!("parsing {}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let (kind, mut cfg) = match &cli.command {
        Some(Cmd::SchemaCheck(a)) => return schema_check(&a.files),
        Some(cmd) => {
            let top = flags(cmd)?;
            (top.command, base.overlay(top))
        }
        None => (base.command, base),
    };
    if cli.cap.is_some() {
        cfg.cap = cli.cap;
    }
    match kind {
        Some(CommandKind::Simulate) => commands::simulate(&cfg),
        Some(CommandKind::Identify) => commands::identify(&cfg),
        Some(CommandKind::Compare) => commands::compare(&cfg),
        Some(CommandKind::Bench) => commands::bench(&cfg),
        Some(CommandKind::Diagnose) => commands::diagnose(&cfg),
        None => Err(Failure {
            code: CONFIG,
            error: anyhow!("no command given; see --help"),
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
