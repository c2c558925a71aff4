//! `biofilm` command-line front end.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use biofilm::io::{default_output_path, write_trajectory_file};
use biofilm::scenarios::{parse_config, preset, serialize, ScenarioConfig, PRESET_NAMES};
use biofilm::solver::{run, Termination};
use biofilm::verification::{verification_suite, write_summary};

const USAGE_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "biofilm", version, about = "Multi-species biofilm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory as CSV.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
    Run {
        /// Built-in scenario, see `list-presets`.
        #[arg(long)]
        preset: Option<String>,
        /// Scenario config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV destination. Defaults to the config's output path, then `<name>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Time step size.
        #[arg(long, value_parser = positive_f64)]
        dt: Option<f64>,
        /// Number of time steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Print the resolved config instead of running it.
        #[arg(long)]
        dump_config: bool,
    },
    /// List the built-in scenarios.
    ListPresets,
    /// Run the verification checks.
    Verify {
        /// Fewer samples, no reference-integrator studies.
        #[arg(long)]
        quick: bool,
        /// Where to write the CSV summary of all checks.
        #[arg(long, default_value = "verify-summary.csv")]
        summary: PathBuf,
    },
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("`{s}` is not a number: {e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive finite number, got {s}"))
    }
}

fn usage_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(USAGE_ERROR)
}

fn load(preset_name: Option<String>, config: Option<PathBuf>) -> Result<ScenarioConfig, String> {
    match (preset_name, config) {
        (Some(name), _) => preset(&name).map_err(|e| format!("{e} (see `biofilm list-presets`)")),
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: [{}] {e}", path.display(), e.code()))
        }
        (None, None) => Err("one of --preset or --config is required".into()),
    }
}

fn run_command(
    preset_name: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    dt: Option<f64>,
    steps: Option<usize>,
    dump_config: bool,
) -> ExitCode {
    let mut config = match load(preset_name, config) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    if let Some(dt) = dt {
        config.solver.dt = dt;
    }
    if let Some(steps) = steps {
        config.solver.steps = steps;
    }
    if let Err(e) = config.validate() {
        return usage_error(format!("[{}] {e}", e.code()));
    }
    if dump_config {
        print!("{}", serialize(&config));
        return ExitCode::SUCCESS;
    }

    let path = out
        .or_else(|| config.output.path.clone())
        .unwrap_or_else(|| default_output_path(&config.name));
    println!(
        "running {}: {} species, {} steps at dt = {:e}",
        config.name,
        config.n(),
        config.solver.steps,
        config.solver.dt
    );
    let traj = run(&config);
    let written = write_trajectory_file(&traj, config.output.stride, &path);
    match &traj.termination {
        Termination::Completed => println!("completed {} steps", traj.last().step),
        Termination::SteadyState { step } => println!("steady state reached at step {step}"),
        Termination::Failed { step, error } => eprintln!("error: step {step} failed: {error}"),
    }
    match written {
        Ok(()) => println!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    if traj.is_complete() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn list_presets() -> ExitCode {
    for name in PRESET_NAMES {
        let config = preset(name).expect("listed presets exist");
        println!("{name:<8} {}", config.description);
    }
    ExitCode::SUCCESS
}

fn verify(quick: bool, summary: PathBuf) -> ExitCode {
    let reports = verification_suite(quick);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", reports.len());
    let written = fs::File::create(&summary)
        .map_err(|e| e.to_string())
        .and_then(|f| write_summary(&reports, f).map_err(|e| e.to_string()));
    match written {
        Ok(()) => println!("wrote {}", summary.display()),
        Err(e) => {
            eprintln!("error: cannot write {}: {e}", summary.display());
            return ExitCode::FAILURE;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            preset,
            config,
            out,
            dt,
            steps,
            dump_config,
        } => run_command(preset, config, out, dt, steps, dump_config),
        Command::ListPresets => list_presets(),
        Command::Verify { quick, summary } => verify(quick, summary),
    }
}
