use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use resonator::checks::invariant_suite;
use resonator::config::{validate_scenario, Experiment, Scenario};
use resonator::presets::{find_preset, list_presets};
use resonator::run::run_scenario;

#[derive(Parser)]
#[command(name = "resonator", version, about = "Simulate and analyse minimal resonator neurons")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Run the numerical invariant suite and exit.
    #[arg(long, global = true)]
    seed_check: bool,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Relative integration tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a trajectory and report waveform metrics.
    Simulate(Common),
    /// Compute nullclines and equilibria at a fixed current.
    Nullclines(Common),
    /// Locate and classify equilibria at a fixed current.
    Equilibria(Common),
    /// Sweep the current, tracking equilibria and locating Hopf points.
    Bifurcation(Common),
    /// Sweep the current and measure steady peak-to-peak amplitude.
    Amplitude(Common),
    /// Compute a device I-V curve and its negative-differential-resistance intervals.
    Iv(Common),
    /// Drive a slow current ramp and measure the delayed onset.
    Ramp(Common),
    /// Run a figure preset.
    Preset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// List presets.
    Presets {
        /// Only presets for this system (e.g. inapik, fet_resonator).
        #[arg(long)]
        system: Option<String>,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}

fn load(common: &Common, verb: Experiment) -> Result<Scenario, String> {
    let path = common.config.as_ref().ok_or("--config <path> is required")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = validate_scenario(&text).map_err(|errs| {
        errs.iter()
            .map(|e| format!("{}: {e}", path.display()))
            .collect::<Vec<_>>()
            .join("\n")
    })?;
    for note in &parsed.notes {
        eprintln!("note: {note}");
    }
    let s = parsed.scenario;
    if s.experiment != verb {
        return Err(format!(
            "{}: configured experiment is `{}`, not `{}`",
            path.display(),
            s.experiment.name(),
            verb.name()
        ));
    }
    Ok(s)
}

fn execute(mut s: Scenario, common: &Common) -> ExitCode {
    if let Some(tol) = common.tolerance {
        s.numerics.tolerance = tol;
        let problems = s.check();
        if !problems.is_empty() {
            return fail(
                problems
                    .iter()
                    .map(|(f, m)| format!("`{f}`: {m}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
            );
        }
    }
    let out = common
        .out
        .clone()
        .or_else(|| s.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(s.name.clone().unwrap_or_else(|| "out".into())));
    match run_scenario(&s, &out, common.svg) {
        Ok(report) => {
            println!("{}", report.summary);
            ExitCode::SUCCESS
        }
        Err(e) => fail(format!("{} {}: {e}", s.system.name(), s.experiment.name())),
    }
}

fn seed_check(tolerance: f64) -> ExitCode {
    let checks = invariant_suite(tolerance);
    for c in &checks {
        eprintln!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{}", json!({"experiment": "seed_check", "checks": checks.len(), "failed": failed}));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.seed_check {
        return seed_check(1e-8);
    }
    let Some(command) = cli.command else {
        return fail("no command given; try --help");
    };
    let (verb, common) = match command {
        Command::Presets { system } => {
            for p in list_presets(system.as_deref()) {
                let flags = if p.assumptions.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", p.assumptions.join("; "))
                };
                println!(
                    "{:<6} {:<10} {:<20} {:<12} {}{flags}",
                    p.name,
                    p.figure,
                    p.scenario.system.name(),
                    p.scenario.experiment.name(),
                    p.description
                );
            }
            return ExitCode::SUCCESS;
        }
        Command::Preset { name, common } => {
            return match find_preset(&name) {
                Some(p) => execute(p.scenario, &common),
                None => fail(format!("unknown preset `{name}`; see `resonator presets`")),
            };
        }
        Command::Simulate(c) => (Experiment::Simulate, c),
        Command::Nullclines(c) => (Experiment::Nullclines, c),
        Command::Equilibria(c) => (Experiment::Equilibria, c),
        Command::Bifurcation(c) => (Experiment::Bifurcation, c),
        Command::Amplitude(c) => (Experiment::Amplitude, c),
        Command::Iv(c) => (Experiment::Iv, c),
        Command::Ramp(c) => (Experiment::Ramp, c),
    };
    match load(&common, verb) {
        Ok(s) => execute(s, &common),
        Err(e) => fail(e),
    }
}
