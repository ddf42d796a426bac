//! `uoslice`: run, check and validate micro-operator slicing scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use uo_slicing::random::{random_scenario, RandomLimits};
use uo_slicing::runner::{EXIT_EXPECTATION_MISMATCH, EXIT_OK, EXIT_PARSE_ERROR};
use uo_slicing::{
    bundled, emit_report, load_scenario, run_scenario, validate_trace, DeploymentScenario, FormationTrace, Scenario,
    ScenarioError, BUNDLED,
};

#[derive(Parser)]
#[command(name = "uoslice", version, about = "Micro-operator network slicing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or bundled scenario name) and write traces and a report.
    Run {
        scenario: String,
        #[arg(long, env = "UOSLICE_OUT_DIR", default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a trace file against the formation-sequence rules.
    Validate {
        trace: PathBuf,
        #[arg(long = "scenario")]
        kind: DeploymentScenario,
    },
    /// List the bundled scenarios.
    ListScenarios,
    /// Parse and cross-check a scenario without running it.
    Check { scenario: String },
    /// Print a random scenario as JSON.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        max_nfs: usize,
        #[arg(long, default_value_t = 6)]
        max_requests: usize,
    },
}

/// A path that exists wins over a bundled name.
fn resolve(scenario: &str) -> Result<Scenario, ScenarioError> {
    if Path::new(scenario).exists() {
        return load_scenario(scenario);
    }
    bundled(scenario).map_or_else(|| load_scenario(scenario), Ok)
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn run(scenario: &str, out: &Path, seed: Option<u64>) -> anyhow::Result<i32> {
    let mut scenario = match resolve(scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_PARSE_ERROR);
        }
    };
    if let Some(seed) = seed {
        scenario.spec.seed = seed;
    }
    let output = run_scenario(&scenario);
    emit_report(&output.report, &output.traces, out).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", output.report.summary_text());
    let exit = output.report.exit_code();
    for m in &output.report.expectation_mismatches {
        eprintln!("expectation mismatch for {}: {} expected {} got {}", m.request, m.field, m.expected, m.actual);
    }
    Ok(exit)
}

fn validate(path: &Path, kind: DeploymentScenario) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = match FormationTrace::parse(&text) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_PARSE_ERROR);
        }
    };
    let report = validate_trace(&trace, kind);
    if report.is_conformant() {
        println!("conformant: {} events, outcome {}", trace.events.len(), trace.outcome);
        Ok(EXIT_OK)
    } else {
        for v in &report.violations {
            println!("violation: {v}");
        }
        Ok(EXIT_EXPECTATION_MISMATCH)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, seed } => run(&scenario, &out, seed),
        Command::Validate { trace, kind } => validate(&trace, kind),
        Command::ListScenarios => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
        Command::Check { scenario } => match resolve(&scenario) {
            Ok(s) => {
                println!(
                    "{}: ok ({} tenants, {} requests, {} MNOs)",
                    s.spec.name,
                    s.tenant_count(),
                    s.requests.len(),
                    s.spec.mnos.len()
                );
                Ok(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(EXIT_PARSE_ERROR)
            }
        },
        Command::Generate { seed, max_nfs, max_requests } => {
            let spec = random_scenario(seed, &RandomLimits { max_nfs, max_requests });
            serde_json::to_string_pretty(&spec)
                .map(|s| {
                    println!("{s}");
                    EXIT_OK
                })
                .map_err(Into::into)
        }
    };
    match result {
        Ok(c) => code(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            code(EXIT_PARSE_ERROR)
        }
    }
}
