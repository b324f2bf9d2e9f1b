//! Benchmark fixtures: seeded missions of a chosen size.

use offload_core::experiment::{generate_mission, ExperimentConfig};
use offload_core::plan::OffloadProblem;
use offload_core::scenario::ScenarioKind;

/// `sensors` sensors over `frames` frames of the default deployment. The
/// default endpoints need at least 24 frames.
pub fn config(sensors: usize, frames: usize) -> ExperimentConfig {
    let cfg = ExperimentConfig::default();
    ExperimentConfig {
        sensor_count: sensors,
        total_time_s: cfg.frame_s * frames as f64,
        ..cfg
    }
}

pub fn problem(sensors: usize, frames: usize, kind: ScenarioKind) -> OffloadProblem {
    let cfg = config(sensors, frames);
    let mission = generate_mission(&cfg, 1).expect("fixture mission");
    OffloadProblem::new(mission, kind).expect("fixture problem")
}
