use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tlc_core::analysis::verify::{format_checks, run_checks};
use tlc_core::analysis::{compare, run, AnalysisError, RunConfig, RunRequest};
use tlc_core::controller::Method;
use tlc_core::scenarios::ScenarioKind;

const EXIT_FAULT: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "tlc", version, about = "Taylor-Lagrange control case studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Acc,
    Robot,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Acc => ScenarioKind::Acc,
            ScenarioArg::Robot => ScenarioKind::Robot,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hocbf,
    Tlc,
    Etlc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Hocbf => Method::Hocbf,
            MethodArg::Tlc => Method::Tlc,
            MethodArg::Etlc => Method::Etlc,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario under one method.
    Run {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// JSON configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a configuration value, e.g. `--set dt=1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run several methods on one scenario and tabulate the metrics.
    Compare {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides applied to every request.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// `scenario:method[,key=value...]`, e.g. `acc:tlc,dt=1`.
        #[arg(required = true, num_args = 1..)]
        requests: Vec<String>,
    },
    /// Check the Taylor identity and every shipped Lie chain.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn base_config(path: Option<&PathBuf>) -> Result<RunConfig, AnalysisError> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn parse_request(spec: &str, base: &RunConfig, shared: &[String]) -> Result<RunRequest, AnalysisError> {
    let mut parts = spec.split(',');
    let head = parts.next().unwrap_or_default();
    let (scenario, method) = head
        .split_once(':')
        .ok_or_else(|| AnalysisError::Config(format!("request `{spec}` is not scenario:method")))?;
    let scenario = match scenario {
        "acc" => ScenarioKind::Acc,
        "robot" => ScenarioKind::Robot,
        other => return Err(AnalysisError::Config(format!("unknown scenario `{other}`"))),
    };
    let method: Method = method.parse().map_err(AnalysisError::Config)?;
    let mut req = RunRequest::new(scenario, method);
    req.config = base.clone();
    for o in shared.iter().map(String::as_str).chain(parts) {
        req.config.apply_override(scenario, o)?;
    }
    Ok(req)
}

fn exit_for(e: &AnalysisError) -> ExitCode {
    match e {
        AnalysisError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            method,
            config,
            overrides,
            out,
            seed,
        } => run_one(scenario.into(), method.into(), config, overrides, out, seed),
        Command::Compare {
            out,
            config,
            overrides,
            requests,
        } => run_compare(out, config, overrides, requests),
        Command::Verify { seed } => match run_checks(seed) {
            Ok(checks) => {
                print!("{}", format_checks(&checks));
                Ok(if checks.iter().all(|c| c.passed) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                })
            }
            Err(e) => Err(e),
        },
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_for(&e)
    })
}

fn run_one(
    scenario: ScenarioKind,
    method: Method,
    config: Option<PathBuf>,
    overrides: Vec<String>,
    out: PathBuf,
    seed: u64,
) -> Result<ExitCode, AnalysisError> {
    let mut req = RunRequest::new(scenario, method);
    req.config = base_config(config.as_ref())?;
    for o in &overrides {
        req.config.apply_override(scenario, o)?;
    }
    req.out_dir = Some(out.clone());
    req.seed = seed;
    let outcome = run(&req)?;
    println!("{}", serde_json::to_string_pretty(&outcome.metrics)?);
    match &outcome.fault {
        Some(f) => {
            eprintln!("{f}; partial outputs and fault.json written to {}", out.display());
            Ok(ExitCode::from(EXIT_FAULT))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn run_compare(
    out: PathBuf,
    config: Option<PathBuf>,
    overrides: Vec<String>,
    requests: Vec<String>,
) -> Result<ExitCode, AnalysisError> {
    let base = base_config(config.as_ref())?;
    let reqs = requests
        .iter()
        .map(|r| parse_request(r, &base, &overrides))
        .collect::<Result<Vec<_>, _>>()?;
    let cmp = compare(&reqs, Some(&out))?;
    print!("{}", tlc_core::analysis::run::comparison_text(&cmp));
    Ok(if cmp.faulted.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAULT)
    })
}
