//! Configuration, deployment generation, single runs, sweeps and file
//! export.

mod config;
mod deploy;
mod export;
mod run;
mod sweep;

pub use config::{ExperimentConfig, ScenarioChoice};
pub use deploy::{generate_mission, upload_limits, LOAD_HEADROOM};
pub use export::{
    bits_csv, energy_csv, energy_rows, export_results, summary_json, trajectory_csv, BITS_FILE, ENERGY_COLUMNS,
    ENERGY_FILE, SUMMARY_FILE, TRACE_FILE, TRAJECTORY_FILE,
};
pub use run::{run_experiment, run_mission, ResultBundle};
pub use sweep::{
    access_csv, access_scenario, fig7_sweep, fig7_sweep_schemes, fig8_tradeoff, latency_csv, latency_scenarios, retime,
    AccessRow, LatencyRow,
};
