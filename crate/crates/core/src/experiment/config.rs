use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::Scheme;
use crate::convex::SolverOptions;
use crate::error::{Error, Result};
use crate::mission::{
    db_to_linear, dbm_per_hz_to_w, reference_gain_from_snr, LeoOrbitSpec, MissionSpec, Position3, SensorSpec,
    StraightTrack,
};
use crate::sca::{ScaOptions, StoppingRule};
use crate::scenario::{classify_scenario, visible_time, ScenarioKind};
use crate::surrogate::SurrogateParams;

/// Which access scenario to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioChoice {
    /// Derived from the visible window of the LEO pass.
    Auto,
    AlwaysOn,
    AlwaysOff,
    /// Needs `connected_frames`.
    Intermediate,
}

impl ScenarioChoice {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioChoice::Auto => "auto",
            ScenarioChoice::AlwaysOn => "always_on",
            ScenarioChoice::AlwaysOff => "always_off",
            ScenarioChoice::Intermediate => "intermediate",
        }
    }
}

impl fmt::Display for ScenarioChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ScenarioChoice::Auto,
            ScenarioChoice::AlwaysOn,
            ScenarioChoice::AlwaysOff,
            ScenarioChoice::Intermediate,
        ]
        .into_iter()
        .find(|c| c.label() == s)
        .ok_or_else(|| {
            Error::invalid(
                "scenario",
                format!("unknown scenario `{s}` (auto, always_on, always_off, intermediate)"),
            )
        })
    }
}

/// One experiment, as read from a flat TOML file. Every key carries its unit;
/// omitted keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scheme: Scheme,
    pub scenario: ScenarioChoice,
    pub connected_frames: Option<usize>,

    // Deployment.
    pub sensor_count: usize,
    pub area_side_km: f64,
    /// Explicit sensor coordinates; drawn from `seed` when absent.
    pub sensor_x_km: Option<Vec<f64>>,
    pub sensor_y_km: Option<Vec<f64>>,
    /// Explicit loads; drawn from `seed` when absent.
    pub input_mbit: Option<Vec<f64>>,
    /// Drawn loads are this fraction range of the per-sensor UAV capacity.
    pub load_fraction_min: f64,
    pub load_fraction_max: f64,
    pub cycles_per_bit_uav: f64,
    pub cycles_per_bit_leo: f64,
    pub output_ratio_uav: f64,
    pub output_ratio_leo: f64,

    // UAV and timing.
    pub uav_start_x_km: f64,
    pub uav_start_y_km: f64,
    pub uav_end_x_km: f64,
    pub uav_end_y_km: f64,
    pub end_user_x_km: f64,
    pub end_user_y_km: f64,
    pub uav_altitude_m: f64,
    pub total_time_s: f64,
    pub frame_s: f64,
    pub uav_mass_kg: f64,
    pub v_max_mps: f64,
    pub uav_cpu_hz: f64,
    /// Defaults to three times `uav_cpu_hz`.
    pub leo_cpu_hz: Option<f64>,
    pub switched_cap_uav: f64,
    pub switched_cap_leo: f64,

    // Radio.
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub reference_snr_db: f64,
    pub energy_budget_j: f64,

    // LEO pass.
    pub leo_speed_mps: f64,
    pub leo_orbit_height_m: f64,
    pub leo_elevation_deg: f64,
    pub earth_radius_m: f64,
    pub leo_altitude_above_uav_m: f64,
    pub leo_antenna_gain_db: f64,
    pub leo_track_start_x_km: f64,
    pub leo_track_start_y_km: f64,
    pub leo_track_heading_deg: f64,
    pub leo_track_speed_mps: f64,
    pub visible_time_override_s: Option<f64>,

    // Solver.
    pub stationarity_tol: f64,
    pub max_outer_iterations: usize,
    pub step_gamma0: f64,
    pub step_decay: f64,
    pub inner_kkt_tol: f64,
    pub inner_complementarity_tol: f64,
    pub inner_max_iterations: usize,
    pub tau_bits: f64,
    pub tau_position: f64,

    // Sweeps.
    pub latency_sweep_s: Vec<f64>,
    pub access_fractions: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sca = ScaOptions::default();
        Self {
            seed: 1,
            scheme: Scheme::Joint,
            scenario: ScenarioChoice::Auto,
            connected_frames: None,
            sensor_count: 10,
            area_side_km: 10.0,
            sensor_x_km: None,
            sensor_y_km: None,
            input_mbit: None,
            load_fraction_min: 0.5,
            load_fraction_max: 1.5,
            cycles_per_bit_uav: 1550.7,
            cycles_per_bit_leo: 1550.7,
            output_ratio_uav: 0.5,
            output_ratio_leo: 0.5,
            uav_start_x_km: 5.0,
            uav_start_y_km: 0.0,
            uav_end_x_km: 10.0,
            uav_end_y_km: 5.0,
            end_user_x_km: 10.0,
            end_user_y_km: 5.0,
            uav_altitude_m: 1000.0,
            total_time_s: 360.0,
            frame_s: 6.0,
            uav_mass_kg: 9.65,
            v_max_mps: 50.0,
            uav_cpu_hz: 19.5e9,
            leo_cpu_hz: None,
            switched_cap_uav: 1e-28,
            switched_cap_leo: 1e-28,
            bandwidth_hz: 40e6,
            noise_dbm_per_hz: -174.0,
            reference_snr_db: 80.0,
            energy_budget_j: 0.11,
            leo_speed_mps: 7500.0,
            leo_orbit_height_m: 601e3,
            leo_elevation_deg: 10.0,
            earth_radius_m: 6371e3,
            leo_altitude_above_uav_m: 600e3,
            leo_antenna_gain_db: 10.0,
            leo_track_start_x_km: 10.0,
            leo_track_start_y_km: 10.0,
            leo_track_heading_deg: 225.0,
            leo_track_speed_mps: 40.0,
            visible_time_override_s: None,
            stationarity_tol: sca.stopping.stationarity_tol,
            max_outer_iterations: sca.stopping.max_outer_iterations,
            step_gamma0: sca.stopping.gamma0,
            step_decay: sca.stopping.decay,
            inner_kkt_tol: sca.solver.kkt_tolerance,
            inner_complementarity_tol: sca.solver.complementarity_tolerance,
            inner_max_iterations: sca.solver.max_iterations,
            tau_bits: sca.surrogate.tau_relay,
            tau_position: sca.surrogate.tau_x,
            latency_sweep_s: (0..15).map(|i| 360.0 + 90.0 * f64::from(i)).collect(),
            access_fractions: (0..=8).map(|i| f64::from(i) / 8.0).collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn frame_count(&self) -> Result<usize> {
        let n = (self.total_time_s / self.frame_s).round();
        if !(n >= 1.0) || (n * self.frame_s - self.total_time_s).abs() > 1e-9 * self.total_time_s {
            return Err(Error::invalid(
                "total_time_s",
                format!("{} s is not a whole number of {} s frames", self.total_time_s, self.frame_s),
            ));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side_km", self.area_side_km),
            ("cycles_per_bit_uav", self.cycles_per_bit_uav),
            ("cycles_per_bit_leo", self.cycles_per_bit_leo),
            ("uav_altitude_m", self.uav_altitude_m),
            ("total_time_s", self.total_time_s),
            ("frame_s", self.frame_s),
            ("uav_mass_kg", self.uav_mass_kg),
            ("v_max_mps", self.v_max_mps),
            ("uav_cpu_hz", self.uav_cpu_hz),
            ("switched_cap_uav", self.switched_cap_uav),
            ("switched_cap_leo", self.switched_cap_leo),
            ("bandwidth_hz", self.bandwidth_hz),
            ("energy_budget_j", self.energy_budget_j),
            ("leo_speed_mps", self.leo_speed_mps),
            ("leo_orbit_height_m", self.leo_orbit_height_m),
            ("earth_radius_m", self.earth_radius_m),
            ("leo_altitude_above_uav_m", self.leo_altitude_above_uav_m),
            ("stationarity_tol", self.stationarity_tol),
            ("inner_kkt_tol", self.inner_kkt_tol),
            ("inner_complementarity_tol", self.inner_complementarity_tol),
            ("tau_bits", self.tau_bits),
            ("tau_position", self.tau_position),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be a finite value > 0, got {v}")));
            }
        }
        if let Some(f) = self.leo_cpu_hz {
            if !(f > 0.0) {
                return Err(Error::invalid("leo_cpu_hz", format!("must be > 0, got {f}")));
            }
        }
        if self.sensor_count == 0 {
            return Err(Error::invalid("sensor_count", "must be >= 1"));
        }
        for (name, v) in [("sensor_x_km", &self.sensor_x_km), ("sensor_y_km", &self.sensor_y_km), ("input_mbit", &self.input_mbit)] {
            if let Some(v) = v {
                if v.len() != self.sensor_count {
                    return Err(Error::invalid(name, format!("has {} entries, expected {}", v.len(), self.sensor_count)));
                }
            }
        }
        if self.sensor_x_km.is_some() != self.sensor_y_km.is_some() {
            return Err(Error::invalid("sensor_x_km", "sensor_x_km and sensor_y_km must be given together"));
        }
        if !(0.0 <= self.load_fraction_min && self.load_fraction_min <= self.load_fraction_max) {
            return Err(Error::invalid("load_fraction_min", "need 0 <= load_fraction_min <= load_fraction_max"));
        }
        for (name, o) in [("output_ratio_uav", self.output_ratio_uav), ("output_ratio_leo", self.output_ratio_leo)] {
            if !(o > 0.0 && o <= 1.0) {
                return Err(Error::invalid(name, "must lie in (0, 1]"));
            }
        }
        let n = self.frame_count()?;
        match (self.scenario, self.connected_frames) {
            (ScenarioChoice::Intermediate, None) => {
                return Err(Error::invalid("connected_frames", "required when scenario = \"intermediate\""));
            }
            (ScenarioChoice::Intermediate, Some(nt)) if nt == 0 || nt >= n => {
                return Err(Error::invalid("connected_frames", format!("must lie in 1..{n} for an intermediate scenario")));
            }
            _ => {}
        }
        if self.latency_sweep_s.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::invalid("latency_sweep_s", "entries must be > 0"));
        }
        if self.access_fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
            return Err(Error::invalid("access_fractions", "entries must lie in [0, 1]"));
        }
        self.sca_options().stopping.validate()?;
        self.sca_options().solver.validate()?;
        self.sca_options().surrogate.validate()
    }

    pub fn sca_options(&self) -> ScaOptions {
        ScaOptions {
            stopping: StoppingRule {
                stationarity_tol: self.stationarity_tol,
                max_outer_iterations: self.max_outer_iterations,
                gamma0: self.step_gamma0,
                decay: self.step_decay,
            },
            solver: SolverOptions {
                kkt_tolerance: self.inner_kkt_tol,
                complementarity_tolerance: self.inner_complementarity_tol,
                max_iterations: self.inner_max_iterations,
                ..SolverOptions::default()
            },
            surrogate: SurrogateParams {
                tau_relay: self.tau_bits,
                tau_uav_compute: self.tau_bits,
                tau_pipeline: self.tau_bits,
                tau_x: self.tau_position,
                tau_y: self.tau_position,
                ..SurrogateParams::default()
            },
        }
    }

    pub fn leo_track(&self) -> StraightTrack {
        StraightTrack {
            start: Position3::from_km(self.leo_track_start_x_km, self.leo_track_start_y_km, 0.0),
            heading_rad: self.leo_track_heading_deg.to_radians(),
            ground_speed_mps: self.leo_track_speed_mps,
        }
    }

    /// Mission with the given sensors and this configuration's timing,
    /// radio, UAV and orbit parameters.
    pub fn mission_with(&self, sensors: Vec<SensorSpec>) -> Result<MissionSpec> {
        let n = self.frame_count()?;
        let noise = dbm_per_hz_to_w(self.noise_dbm_per_hz);
        let h = self.uav_altitude_m;
        let leo_z = h + self.leo_altitude_above_uav_m;
        let m = MissionSpec {
            sensors,
            end_user: Position3::from_km(self.end_user_x_km, self.end_user_y_km, 0.0),
            uav_start: Position3::from_km(self.uav_start_x_km, self.uav_start_y_km, h),
            uav_end: Position3::from_km(self.uav_end_x_km, self.uav_end_y_km, h),
            uav_altitude_m: h,
            total_time_s: self.total_time_s,
            frame_s: self.frame_s,
            frame_count: n,
            bandwidth_hz: self.bandwidth_hz,
            noise_density_w_per_hz: noise,
            reference_gain: reference_gain_from_snr(self.reference_snr_db, noise, self.bandwidth_hz),
            energy_budget_j: self.energy_budget_j,
            uav_mass_kg: self.uav_mass_kg,
            v_max_mps: self.v_max_mps,
            uav_cpu_hz: self.uav_cpu_hz,
            leo_cpu_hz: self.leo_cpu_hz.unwrap_or(3.0 * self.uav_cpu_hz),
            switched_cap_uav: self.switched_cap_uav,
            switched_cap_leo: self.switched_cap_leo,
            orbit: LeoOrbitSpec {
                speed_mps: self.leo_speed_mps,
                orbit_height_m: self.leo_orbit_height_m,
                elevation_rad: self.leo_elevation_deg.to_radians(),
                earth_radius_m: self.earth_radius_m,
                altitude_above_uav_m: self.leo_altitude_above_uav_m,
                ground_track: self.leo_track().sample(self.frame_s, n, leo_z),
                antenna_gain: db_to_linear(self.leo_antenna_gain_db),
                visible_time_override_s: self.visible_time_override_s,
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn sensor_template(&self, x_km: f64, y_km: f64, input_bits: f64) -> SensorSpec {
        SensorSpec {
            position: Position3::from_km(x_km, y_km, 0.0),
            input_bits,
            cycles_per_bit_uav: self.cycles_per_bit_uav,
            cycles_per_bit_leo: self.cycles_per_bit_leo,
            output_ratio_uav: self.output_ratio_uav,
            output_ratio_leo: self.output_ratio_leo,
        }
    }

    /// Scenario for `mission` under this configuration's choice.
    pub fn scenario_kind(&self, mission: &MissionSpec) -> Result<ScenarioKind> {
        Ok(match self.scenario {
            ScenarioChoice::Auto => classify_scenario(mission, &visible_time(mission)?),
            ScenarioChoice::AlwaysOn => ScenarioKind::AlwaysOn,
            ScenarioChoice::AlwaysOff => ScenarioKind::AlwaysOff,
            ScenarioChoice::Intermediate => ScenarioKind::Intermediate {
                connected_frames: self.connected_frames.unwrap_or(0),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.sensor_count, 10);
        assert_eq!(cfg.bandwidth_hz, 40e6);
        assert_eq!(cfg.uav_mass_kg, 9.65);
        assert_eq!(cfg.v_max_mps, 50.0);
        assert_eq!(cfg.energy_budget_j, 0.11);
        assert_eq!(cfg.frame_count().unwrap(), 60);
    }

    #[test]
    fn frame_count_follows_horizon() {
        let cfg = ExperimentConfig::from_toml_str("total_time_s = 720\nframe_s = 6").unwrap();
        assert_eq!(cfg.frame_count().unwrap(), 120);
        let err = ExperimentConfig::from_toml_str("total_time_s = 361").unwrap_err();
        assert!(matches!(err, Error::InvalidInput { field, .. } if field == "total_time_s"));
    }

    #[test]
    fn negative_bandwidth_names_the_field() {
        let err = ExperimentConfig::from_toml_str("bandwidth_hz = -40e6").unwrap_err();
        assert!(matches!(err, Error::InvalidInput { ref field, .. } if field == "bandwidth_hz"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_types_are_reported_with_location() {
        let err = ExperimentConfig::from_toml_str("seed = 3\nbandwidth = 1").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("bandwidth") && msg.contains("line 2"), "{msg}");
        let err = ExperimentConfig::from_toml_str("frame_s = \"six\"").unwrap_err();
        assert!(err.to_string().contains("frame_s"), "{err}");
    }

    #[test]
    fn intermediate_needs_connected_frames() {
        assert!(ExperimentConfig::from_toml_str("scenario = \"intermediate\"").is_err());
        assert!(ExperimentConfig::from_toml_str("scenario = \"intermediate\"\nconnected_frames = 60").is_err());
        let cfg = ExperimentConfig::from_toml_str("scenario = \"intermediate\"\nconnected_frames = 30").unwrap();
        let m = cfg.mission_with(vec![cfg.sensor_template(1.0, 1.0, 0.0)]).unwrap();
        assert_eq!(cfg.scenario_kind(&m).unwrap(), ScenarioKind::Intermediate { connected_frames: 30 });
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.input_mbit = Some(vec![100.0; 10]);
        cfg.scheme = Scheme::BitOnly;
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn mission_carries_table_values() {
        let cfg = ExperimentConfig::default();
        let m = cfg.mission_with(vec![cfg.sensor_template(2.0, 3.0, 1e8)]).unwrap();
        assert_eq!(m.frame_count, 60);
        assert_eq!(m.leo_cpu_hz, 3.0 * 19.5e9);
        assert!((m.reference_gain - 1.5924e-5).abs() < 1e-8);
        assert_eq!(m.uav_start, Position3::new(5e3, 0.0, 1000.0));
        assert_eq!(m.orbit.ground_track.len(), 60);
    }
}
