use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdgl_bohm::scenario::{parse_config_with, run_to_dir, verify, ConfigErrors, RunError, ScenarioConfig, ScenarioKind};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "tdgl-bohm", version, about = "Pair trajectories and quantum potentials from TDGL simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, event log and manifest.
    Run(RunArgs),
    /// Run a scenario at two resolutions and compare with its oracle.
    Verify(RunArgs),
    /// List the available scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, applied before validation. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, RunError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        RunError::Config(ConfigErrors(vec![format!("cannot read {}: {e}", args.config.display())]))
    })?;
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    Ok(parse_config_with(&text, &overrides)?)
}

fn out_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("output").join(cfg.scenario.name()))
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.exit_code() == 1 { EXIT_VALIDATION } else { EXIT_RUNTIME })
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let dir = out_dir(args, &cfg);
    match run_to_dir(&cfg, &dir) {
        Ok((outcome, _)) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: outputs written to {}", cfg.scenario.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn cmd_verify(args: &RunArgs) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let report = match verify(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    for c in &report.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let range = match (c.lower.is_finite(), c.upper.is_finite()) {
            (true, true) => format!("[{}, {}]", c.lower, c.upper),
            _ => format!("≤ {}", c.upper),
        };
        println!("{verdict} {}: {:.6e} (accepted {range})", c.name, c.value);
    }
    if let Some(dir) = args.out.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)) {
        let written = fs::create_dir_all(&dir).and_then(|_| {
            let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
            fs::write(dir.join("verify.json"), json + "\n")
        });
        if let Err(e) = written {
            return fail(&RunError::Io(e));
        }
    }
    if report.passed() {
        println!("{}: all {} checks passed", report.scenario, report.checks.len());
        ExitCode::SUCCESS
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("{}: {failed} of {} checks failed", report.scenario, report.checks.len());
        ExitCode::from(EXIT_VERIFY)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::ListScenarios => {
            for k in ScenarioKind::ALL {
                let oracle = if k.has_oracle() { "verify" } else { "      " };
                println!("{:<20} {oracle}  {}", k.name(), k.description());
            }
            ExitCode::SUCCESS
        }
    }
}
