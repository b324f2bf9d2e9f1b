use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use offload_core::baselines::Scheme;
use offload_core::experiment::{
    access_csv, export_results, fig7_sweep, fig8_tradeoff, generate_mission, latency_csv, run_mission,
    ExperimentConfig, ScenarioChoice,
};
use offload_core::sca::Termination;
use offload_core::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ITERATION_LIMIT: u8 = 3;
const EXIT_CONFIG: u8 = 4;

/// Energy-minimizing offloading for a UAV relay with LEO satellite edge
/// computing.
#[derive(Debug, Parser)]
#[command(name = "offload", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one experiment and export its result files.
    Run(Common),
    /// Total energy against mission time for every scheme and scenario.
    SweepLatency(Common),
    /// Energy and data usage against the LEO access fraction.
    SweepAccess(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// joint, trajectory_only, bit_only or none.
    #[arg(long, value_name = "NAME")]
    scheme: Option<String>,
    /// auto, always_on, always_off or intermediate.
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Outer stationarity tolerance.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Outer iteration limit.
    #[arg(long, value_name = "INT")]
    max_iters: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse::<Scheme>()?;
        }
        if let Some(s) = &self.scenario {
            cfg.scenario = s.parse::<ScenarioChoice>()?;
        }
        if let Some(t) = self.tol {
            cfg.stationarity_tol = t;
        }
        if let Some(m) = self.max_iters {
            cfg.max_outer_iterations = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn solve_exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::IterationLimit { .. } => EXIT_ITERATION_LIMIT,
        Error::Config(_) | Error::InvalidInput { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), u8> {
    fs::write(path, body).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_FAILURE
    })
}

fn prepare(common: &Common) -> Result<ExperimentConfig, u8> {
    let cfg = common.resolve().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    fs::create_dir_all(&common.out).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", common.out.display());
        EXIT_FAILURE
    })?;
    let echo = cfg.to_toml_string().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_FAILURE
    })?;
    write_file(&common.out.join("config.toml"), &echo)?;
    Ok(cfg)
}

fn run(common: &Common) -> Result<(), u8> {
    let cfg = prepare(common)?;
    let mission = generate_mission(&cfg, cfg.seed).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let kind = cfg.scenario_kind(&mission).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let bundle = run_mission(&mission, kind, cfg.scheme, &cfg.sca_options(), cfg.seed).map_err(|e| {
        eprintln!("error: {e}");
        solve_exit_code(&e)
    })?;
    export_results(&bundle, &common.out).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_FAILURE
    })?;
    println!(
        "{} {}: {:.6e} J after {} iterations ({:?}), data usage {:.4}",
        bundle.scheme,
        bundle.scenario.label(),
        bundle.total_energy_j(),
        bundle.iterations,
        bundle.termination,
        bundle.data_usage_rate
    );
    match bundle.termination {
        Termination::Converged => Ok(()),
        Termination::IterationLimit => Err(EXIT_ITERATION_LIMIT),
        Termination::NumericalFailure => Err(EXIT_FAILURE),
    }
}

fn sweep_latency(common: &Common) -> Result<(), u8> {
    let cfg = prepare(common)?;
    let rows = fig7_sweep(&cfg, &cfg.latency_sweep_s).map_err(|e| {
        eprintln!("error: {e}");
        solve_exit_code(&e)
    })?;
    let path = common.out.join("latency.csv");
    write_file(&path, &latency_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} cells written to {} ({failed} failed)", rows.len(), path.display());
    Ok(())
}

fn sweep_access(common: &Common) -> Result<(), u8> {
    let cfg = prepare(common)?;
    let rows = fig8_tradeoff(&cfg, &cfg.access_fractions).map_err(|e| {
        eprintln!("error: {e}");
        solve_exit_code(&e)
    })?;
    let path = common.out.join("access.csv");
    write_file(&path, &access_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} cells written to {} ({failed} failed)", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; help and version still exit 0.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::SweepLatency(c) => sweep_latency(c),
        Command::SweepAccess(c) => sweep_access(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
