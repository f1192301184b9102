mod checks;
mod report;
mod scenario;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use magtrans::poly::format_rational;
use rayon::prelude::*;

use crate::checks::{Ctx, REGISTRY};
use crate::report::{CheckReport, Outcome, RunReport, Status};
use crate::scenario::{PlannedCheck, Scenario};

const EXIT_FAIL: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(
    name = "magtrans",
    about = "Verify magnetic translation and rotation identities",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check in a scenario file.
    Run {
        scenario: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV and JSON exports (overrides the scenario).
        #[arg(long)]
        export_dir: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List the available checks.
    ListChecks,
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListChecks => {
            for d in REGISTRY {
                println!(
                    "{}: {}  [tolerance {}]",
                    d.name,
                    d.summary,
                    d.tolerance.describe(None)
                );
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("magtrans {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Run {
            scenario,
            out,
            export_dir,
            jobs,
        } => {
            let loaded = match scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {}: {e}", scenario.display());
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            match run(loaded, out, export_dir, jobs) {
                Ok(Status::Fail) => ExitCode::from(EXIT_FAIL),
                Ok(_) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
    }
}

fn execute(scenario: &Scenario, plan: &PlannedCheck, export_dir: &Option<PathBuf>) -> CheckReport {
    let ctx = Ctx {
        consts: &scenario.consts,
        potential: &scenario.potential,
        seed: scenario.seed,
        export_dir: export_dir.clone(),
    };
    let started = Instant::now();
    let outcome = match catch_unwind(AssertUnwindSafe(|| (plan.def.run)(&ctx, plan))) {
        Ok(Ok(o)) => o,
        Ok(Err(e)) if e.is_not_applicable() => Outcome::not_applicable(e.to_string()),
        Ok(Err(e)) => Outcome::failed(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Outcome::failed(format!("check crashed: {msg}"))
        }
    };
    CheckReport {
        index: plan.index,
        check: plan.def.name.to_string(),
        id: plan.spec.id.clone(),
        summary: plan.def.summary.to_string(),
        tolerance: plan.def.tolerance.describe(plan.spec.tolerance),
        outcome,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    }
}

fn run(
    scenario: Scenario,
    out: Option<PathBuf>,
    export_dir: Option<PathBuf>,
    jobs: usize,
) -> anyhow::Result<Status> {
    let export_dir = export_dir.or_else(|| scenario.export_dir.clone());
    if let Some(dir) = &export_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let checks: Vec<CheckReport> = pool.install(|| {
        scenario
            .checks
            .par_iter()
            .map(|plan| execute(&scenario, plan, &export_dir))
            .collect()
    });
    let k = &scenario.consts;
    let constants = BTreeMap::from([
        ("e".to_string(), format_rational(&k.e)),
        ("c".to_string(), format_rational(&k.c)),
        ("m".to_string(), format_rational(&k.m)),
        ("hbar".to_string(), format_rational(&k.hbar)),
    ]);
    let report = RunReport::new(
        scenario.name.clone(),
        scenario.seed,
        scenario.field_label.clone(),
        constants,
        checks,
    );
    let json = serde_json::to_string_pretty(&report)?;
    match out.or_else(|| scenario.report.clone()) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, json + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            print!("{}", report.summary());
        }
        None => {
            println!("{json}");
            eprint!("{}", report.summary());
        }
    }
    std::io::stdout().flush()?;
    Ok(report.status)
}
