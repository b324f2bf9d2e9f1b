//! Link geometry, LEO coverage, scenario classification and offloading schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mission::{LeoOrbitSpec, MissionSpec, Position3};

/// LoS gain between sensor `sensor_index` (1-based; `K+1` is the end user) and
/// a UAV at `uav`.
pub fn sensor_uav_gain(mission: &MissionSpec, sensor_index: usize, uav: &Position3) -> Result<f64> {
    let k = mission.sensor_count();
    let target = match sensor_index {
        i if i >= 1 && i <= k => mission.sensors[i - 1].position,
        i if i == k + 1 => mission.end_user,
        i => {
            return Err(Error::IndexOutOfRange {
                what: "sensor",
                index: i,
                max: k + 1,
            })
        }
    };
    let h = mission.uav_altitude_m;
    Ok(mission.reference_gain / (uav.horizontal_sq(&target) + h * h))
}

/// UAV-to-LEO gain at `frame` (1-based).
pub fn uav_leo_gain(mission: &MissionSpec, frame: usize, uav: &Position3) -> Result<f64> {
    let leo = leo_position_at(&mission.orbit, frame)?;
    let hl = mission.orbit.altitude_above_uav_m;
    Ok(mission.reference_gain * mission.orbit.antenna_gain / (leo.horizontal_sq(uav) + hl * hl))
}

/// Earth-central coverage angle of the satellite beam.
pub fn coverage_angle(orbit: &LeoOrbitSpec) -> Result<f64> {
    let theta = orbit.elevation_rad;
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::invalid("elevation_rad", "must lie in [0, pi/2)"));
    }
    let arg = orbit.earth_radius_m / (orbit.earth_radius_m + orbit.orbit_height_m) * theta.cos();
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::invalid("orbit", format!("arccos argument {arg} outside [-1, 1]")));
    }
    Ok((arg.acos() - theta).clamp(0.0, std::f64::consts::PI))
}

/// Geometric length of the visible window, ignoring any override.
pub fn geometric_visible_time(orbit: &LeoOrbitSpec) -> Result<f64> {
    if !(orbit.speed_mps > 0.0) {
        return Err(Error::invalid("speed_mps", "must be > 0"));
    }
    let gamma = coverage_angle(orbit)?;
    Ok(2.0 * (orbit.earth_radius_m + orbit.orbit_height_m) * gamma / orbit.speed_mps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityWindow {
    pub visible_time_s: f64,
    pub coverage_angle_rad: f64,
    /// Last frame inside the window.
    pub last_connected_frame: usize,
}

/// Visible window for the mission's LEO pass. The configured override, when
/// present, replaces the geometric length.
pub fn visible_time(mission: &MissionSpec) -> Result<VisibilityWindow> {
    let orbit = &mission.orbit;
    let gamma = coverage_angle(orbit)?;
    let tv = match orbit.visible_time_override_s {
        Some(tv) => tv,
        None => geometric_visible_time(orbit)?,
    };
    let connected = (tv.min(mission.total_time_s) / mission.frame_s + 1e-9).floor() as usize;
    Ok(VisibilityWindow {
        visible_time_s: tv,
        coverage_angle_rad: gamma,
        last_connected_frame: connected.min(mission.frame_count),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    AlwaysOn,
    AlwaysOff,
    /// LEO reachable for frames `1..=connected_frames`.
    Intermediate { connected_frames: usize },
}

impl ScenarioKind {
    pub fn label(&self) -> String {
        match self {
            ScenarioKind::AlwaysOn => "always_on".into(),
            ScenarioKind::AlwaysOff => "always_off".into(),
            ScenarioKind::Intermediate { connected_frames } => {
                format!("intermediate({connected_frames})")
            }
        }
    }

    /// Number of leading frames with LEO access.
    pub fn connected_frames(&self, frames: usize) -> usize {
        match *self {
            ScenarioKind::AlwaysOn => frames,
            ScenarioKind::AlwaysOff => 0,
            ScenarioKind::Intermediate { connected_frames } => connected_frames,
        }
    }
}

pub fn classify_scenario(mission: &MissionSpec, window: &VisibilityWindow) -> ScenarioKind {
    if mission.total_time_s <= window.visible_time_s {
        ScenarioKind::AlwaysOn
    } else if window.visible_time_s <= 0.0 || window.last_connected_frame == 0 {
        // A window shorter than one frame carries no usable access.
        ScenarioKind::AlwaysOff
    } else {
        ScenarioKind::Intermediate {
            connected_frames: window.last_connected_frame,
        }
    }
}

/// Per-sensor, per-frame LEO availability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessProfile {
    /// `alpha[k][n]`, frames 0-based.
    pub alpha: Vec<Vec<bool>>,
}

impl AccessProfile {
    pub fn connected_frames(&self, k: usize) -> usize {
        self.alpha[k].iter().take_while(|&&a| a).count()
    }
}

pub fn build_access_profile(kind: ScenarioKind, mission: &MissionSpec) -> AccessProfile {
    let n = mission.frame_count;
    let connected = kind.connected_frames(n).min(n);
    let row: Vec<bool> = (0..n).map(|i| i < connected).collect();
    AccessProfile {
        alpha: vec![row; mission.sensor_count()],
    }
}

/// Per-sensor LEO-vs-UAV computing selection (`true` = LEO computing).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleProfile {
    pub beta: Vec<bool>,
}

pub fn schedule_offloading(mission: &MissionSpec, profile: &AccessProfile) -> ScheduleProfile {
    let beta = mission
        .sensors
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let reachable = profile.alpha[k].iter().any(|&a| a);
            reachable && s.input_bits > mission.uav_capacity_bits(k)
        })
        .collect();
    ScheduleProfile { beta }
}

/// Constant-velocity straight path, `N+1` waypoints from start to end.
pub fn constant_velocity_path(mission: &MissionSpec) -> Result<Vec<Position3>> {
    let n = mission.frame_count;
    let dist = mission.uav_start.horizontal_dist(&mission.uav_end);
    if dist > mission.max_step_m() * n as f64 * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "endpoints are {dist:.1} m apart but at most {:.1} m can be flown",
            mission.max_step_m() * n as f64
        )));
    }
    Ok((0..=n)
        .map(|i| {
            let mut p = mission.uav_start.lerp(&mission.uav_end, i as f64 / n as f64);
            p.z = mission.uav_altitude_m;
            p
        })
        .collect())
}

pub fn leo_position_at(orbit: &LeoOrbitSpec, frame: usize) -> Result<Position3> {
    if frame == 0 || frame > orbit.ground_track.len() {
        return Err(Error::IndexOutOfRange {
            what: "frame",
            index: frame,
            max: orbit.ground_track.len(),
        });
    }
    Ok(orbit.ground_track[frame - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{SensorSpec, StraightTrack};

    fn mission() -> MissionSpec {
        MissionSpec::with_defaults(vec![SensorSpec::new(0.0, 0.0, 3e8)])
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gain_directly_above_sensor() {
        let mut m = mission();
        m.reference_gain = 1.5924e-5;
        let g = sensor_uav_gain(&m, 1, &Position3::new(0.0, 0.0, 1000.0)).unwrap();
        assert!(rel(g, 1.5924e-11) < 1e-12);
        m.uav_altitude_m = 2000.0;
        let g2 = sensor_uav_gain(&m, 1, &Position3::new(0.0, 0.0, 2000.0)).unwrap();
        assert!(rel(g / g2, 4.0) < 1e-12);
    }

    #[test]
    fn gain_with_offset() {
        let m = mission();
        let g = sensor_uav_gain(&m, 1, &Position3::new(3000.0, 4000.0, 1000.0)).unwrap();
        assert!(rel(g, m.reference_gain / 2.6e7) < 1e-12);
    }

    #[test]
    fn end_user_index_and_out_of_range() {
        let m = mission();
        let above = Position3::new(m.end_user.x, m.end_user.y, 1000.0);
        let g = sensor_uav_gain(&m, 2, &above).unwrap();
        assert!(rel(g, m.reference_gain / 1e6) < 1e-12);
        assert!(matches!(
            sensor_uav_gain(&m, 3, &above),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(sensor_uav_gain(&m, 0, &above).is_err());
    }

    #[test]
    fn leo_gain_at_nadir() {
        let mut m = mission();
        m.reference_gain = 1.5924e-5;
        let leo = m.orbit.ground_track[0];
        let uav = Position3::new(leo.x, leo.y, 1000.0);
        let g = uav_leo_gain(&m, 1, &uav).unwrap();
        assert!(rel(g, 10.0 * 1.5924e-5 / 3.6e11) < 1e-12);
        assert!(rel(g, 4.42e-16) < 1e-3);
        // 600 km horizontal offset doubles the denominator.
        let far = Position3::new(leo.x + 600e3, leo.y, 1000.0);
        assert!(rel(uav_leo_gain(&m, 1, &far).unwrap(), g / 2.0) < 1e-12);
        m.orbit.antenna_gain = 1.0;
        assert!(rel(uav_leo_gain(&m, 1, &uav).unwrap(), g / 10.0) < 1e-12);
        assert!(uav_leo_gain(&m, 61, &uav).is_err());
    }

    #[test]
    fn coverage_geometry() {
        let m = mission();
        let gamma = coverage_angle(&m.orbit).unwrap();
        // arccos(6371/6972 * cos 10deg) - 10deg
        let oracle = ((6371.0 / 6972.0) * 10f64.to_radians().cos()).acos() - 10f64.to_radians();
        assert!(rel(gamma, oracle) < 1e-12);
        assert!((gamma - 0.2767).abs() < 5e-4, "gamma = {gamma}");

        let mut low = m.orbit.clone();
        low.elevation_rad = 0.0;
        low.orbit_height_m = 1e-3;
        assert!(coverage_angle(&low).unwrap() < 1e-4);

        let mut high = m.orbit.clone();
        high.orbit_height_m = 1e15;
        let g = coverage_angle(&high).unwrap();
        assert!((g - (std::f64::consts::FRAC_PI_2 - high.elevation_rad)).abs() < 1e-6);
    }

    #[test]
    fn visible_time_geometry_and_override() {
        let mut m = mission();
        let w = visible_time(&m).unwrap();
        assert!((w.visible_time_s - 514.5).abs() < 1.0, "T_v = {}", w.visible_time_s);
        assert_eq!(w.last_connected_frame, 60);

        let full = 2.0 * std::f64::consts::PI * (6371e3 + 601e3) / 7500.0;
        assert!((full - 5840.0).abs() < 1.0);

        m.orbit.visible_time_override_s = Some(830.0);
        assert_eq!(visible_time(&m).unwrap().visible_time_s, 830.0);

        m.orbit.visible_time_override_s = None;
        m.orbit.speed_mps = 1e12;
        assert!(visible_time(&m).unwrap().visible_time_s < 1e-3);
    }

    #[test]
    fn classification() {
        let mut m = mission();
        m.orbit.visible_time_override_s = Some(830.0);
        let w = visible_time(&m).unwrap();
        assert_eq!(classify_scenario(&m, &w), ScenarioKind::AlwaysOn);

        m.orbit.visible_time_override_s = Some(0.0);
        let w = visible_time(&m).unwrap();
        assert_eq!(classify_scenario(&m, &w), ScenarioKind::AlwaysOff);

        m.orbit.visible_time_override_s = Some(180.0);
        let w = visible_time(&m).unwrap();
        assert_eq!(
            classify_scenario(&m, &w),
            ScenarioKind::Intermediate { connected_frames: 30 }
        );
    }

    #[test]
    fn access_profiles() {
        let m = mission();
        let on = build_access_profile(ScenarioKind::AlwaysOn, &m);
        assert!(on.alpha[0].iter().all(|&a| a));
        let off = build_access_profile(ScenarioKind::AlwaysOff, &m);
        assert!(off.alpha[0].iter().all(|&a| !a));
        let mid = build_access_profile(ScenarioKind::Intermediate { connected_frames: 30 }, &m);
        assert_eq!(mid.connected_frames(0), 30);
        assert!(mid.alpha[0][30..].iter().all(|&a| !a));
    }

    #[test]
    fn capacity_and_schedule() {
        let mut sensors: Vec<SensorSpec> = (0..10).map(|_| SensorSpec::new(0.0, 0.0, 3e8)).collect();
        let mut m = MissionSpec::with_defaults(sensors.clone());
        m.uav_cpu_hz = 9.75e9;
        assert!(rel(m.uav_capacity_bits(0), 226.35e6) < 1e-4);
        let on = build_access_profile(ScenarioKind::AlwaysOn, &m);
        assert!(schedule_offloading(&m, &on).beta.iter().all(|&b| b));
        let off = build_access_profile(ScenarioKind::AlwaysOff, &m);
        assert!(schedule_offloading(&m, &off).beta.iter().all(|&b| !b));

        sensors[0].input_bits = 0.0;
        sensors[1].input_bits = 4e8;
        let mut m = MissionSpec::with_defaults(sensors);
        m.uav_cpu_hz = 19.5e9;
        assert!(rel(m.uav_capacity_bits(1), 452.7e6) < 1e-4);
        let beta = schedule_offloading(&m, &on).beta;
        assert!(!beta[0]);
        assert!(!beta[1]);
    }

    #[test]
    fn straight_path() {
        let m = mission();
        let p = constant_velocity_path(&m).unwrap();
        assert_eq!(p.len(), 61);
        assert!((p[30].x - 7500.0).abs() < 1e-9 && (p[30].y - 2500.0).abs() < 1e-9);
        assert_eq!(p[0], m.uav_start);
        let speed = p[0].horizontal_dist(&p[1]) / m.frame_s;
        assert!((speed - 19.64).abs() < 0.01);

        let mut still = m.clone();
        still.uav_end = still.uav_start;
        assert!(constant_velocity_path(&still).unwrap().iter().all(|q| *q == still.uav_start));

        let mut far = m.clone();
        far.uav_end = Position3::from_km(100.0, 0.0, 1000.0);
        assert!(matches!(constant_velocity_path(&far), Err(Error::Infeasible(_))));
    }

    #[test]
    fn track_length_matches_ground_speed() {
        let m = mission();
        let track = StraightTrack {
            start: Position3::from_km(10.0, 10.0, 0.0),
            heading_rad: 225f64.to_radians(),
            ground_speed_mps: 40.0,
        };
        let pts = track.sample(m.frame_s, m.frame_count, 0.0);
        let walked: f64 = pts.windows(2).map(|w| w[0].horizontal_dist(&w[1])).sum();
        // N-1 steps between frame starts plus the last frame's advance.
        let total = walked + 40.0 * m.frame_s;
        assert!(rel(total, 40.0 * m.total_time_s) < 1e-12);
        assert_eq!(leo_position_at(&m.orbit, 1).unwrap().x, 10e3);
        assert!(leo_position_at(&m.orbit, 0).is_err());
    }
}
