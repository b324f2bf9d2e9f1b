use std::path::PathBuf;

use offload_core::baselines::Scheme;
use offload_core::experiment::{generate_mission, run_experiment, run_mission, ExperimentConfig, ScenarioChoice};
use offload_core::plan::OffloadProblem;
use offload_core::sca::Termination;
use offload_core::scenario::ScenarioKind;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small(loads: Option<Vec<f64>>) -> ExperimentConfig {
    ExperimentConfig {
        sensor_count: 3,
        total_time_s: 120.0,
        uav_end_x_km: 8.0,
        uav_end_y_km: 3.0,
        input_mbit: loads,
        ..ExperimentConfig::default()
    }
}

#[test]
fn default_config_file_matches_built_in_defaults() {
    let cfg = ExperimentConfig::load(&shipped("default.toml")).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}

#[test]
fn access_config_splits_sensors_by_load() {
    let cfg = ExperimentConfig::load(&shipped("access_tradeoff.toml")).unwrap();
    let mission = generate_mission(&cfg, cfg.seed).unwrap();
    let problem = OffloadProblem::new(mission, ScenarioKind::AlwaysOn).unwrap();
    let expected = [false, false, true, true, true, true, false, true, false, false];
    assert_eq!(problem.schedule.beta, expected);
}

#[test]
fn zero_load_costs_only_straight_line_flight() {
    let cfg = small(Some(vec![0.0; 3]));
    let bundle = run_experiment(&cfg).unwrap();
    // Constant speed along the chord: N frames of kappa * (D / T)^2 with
    // kappa = M * frame / 2.
    let d = ((8.0f64 - 5.0).powi(2) + 3.0f64.powi(2)).sqrt() * 1e3;
    let v = d / 120.0;
    let expected = 20.0 * 9.65 * 6.0 / 2.0 * v * v;
    let t = &bundle.breakdown.totals;
    assert!((t.flying - expected).abs() <= 1e-9 * expected, "{} vs {expected}", t.flying);
    assert!((t.objective - expected).abs() <= 1e-9 * expected);
    assert_eq!(bundle.termination, Termination::Converged);
}

#[test]
fn joint_never_worse_than_fixed_schemes() {
    let cfg = small(None);
    let mission = generate_mission(&cfg, 3).unwrap();
    let options = cfg.sca_options();
    for kind in [ScenarioKind::AlwaysOn, ScenarioKind::AlwaysOff] {
        let e = |s| run_mission(&mission, kind, s, &options, 3).unwrap().total_energy_j();
        let joint = e(Scheme::Joint);
        for other in [Scheme::TrajectoryOnly, Scheme::BitOnly, Scheme::None] {
            assert!(joint <= e(other) * (1.0 + 1e-7), "{kind:?}: joint vs {other}");
        }
    }
}

#[test]
fn scenario_choice_round_trips_through_toml() {
    let cfg = ExperimentConfig {
        scenario: ScenarioChoice::Intermediate,
        connected_frames: Some(7),
        ..small(None)
    };
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, cfg);
}
