//! Immutable mission description: sensors, LEO pass, UAV endpoints, timing and
//! radio/compute constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cartesian position in meters. `z` is measured from the average sea level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_km(x_km: f64, y_km: f64, z_m: f64) -> Self {
        Self::new(x_km * 1e3, y_km * 1e3, z_m)
    }

    pub fn horizontal_sq(&self, other: &Position3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn horizontal_dist(&self, other: &Position3) -> f64 {
        self.horizontal_sq(other).sqrt()
    }

    pub fn lerp(&self, other: &Position3, t: f64) -> Position3 {
        Position3::new(
            self.x + t * (other.x - self.x),
            self.y + t * (other.y - self.y),
            self.z + t * (other.z - self.z),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub position: Position3,
    pub input_bits: f64,
    pub cycles_per_bit_uav: f64,
    pub cycles_per_bit_leo: f64,
    pub output_ratio_uav: f64,
    pub output_ratio_leo: f64,
}

impl SensorSpec {
    /// Sensor with the default compute profile (1550.7 cycles/bit, output ratio 0.5).
    pub fn new(x_m: f64, y_m: f64, input_bits: f64) -> Self {
        Self {
            position: Position3::new(x_m, y_m, 0.0),
            input_bits,
            cycles_per_bit_uav: 1550.7,
            cycles_per_bit_leo: 1550.7,
            output_ratio_uav: 0.5,
            output_ratio_leo: 0.5,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        let field = |name: &str| format!("sensors[{k}].{name}");
        if !self.position.is_finite() {
            return Err(Error::invalid(field("position"), "non-finite coordinate"));
        }
        if !(self.input_bits >= 0.0) || !self.input_bits.is_finite() {
            return Err(Error::invalid(field("input_bits"), "must be >= 0"));
        }
        if !(self.cycles_per_bit_uav > 0.0) {
            return Err(Error::invalid(field("cycles_per_bit_uav"), "must be > 0"));
        }
        if !(self.cycles_per_bit_leo > 0.0) {
            return Err(Error::invalid(field("cycles_per_bit_leo"), "must be > 0"));
        }
        for (name, o) in [
            ("output_ratio_uav", self.output_ratio_uav),
            ("output_ratio_leo", self.output_ratio_leo),
        ] {
            if !(o > 0.0 && o <= 1.0) {
                return Err(Error::invalid(field(name), "must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Single LEO pass over the mission area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeoOrbitSpec {
    pub speed_mps: f64,
    pub orbit_height_m: f64,
    pub elevation_rad: f64,
    pub earth_radius_m: f64,
    /// Altitude of the satellite above the UAV (`h_L`).
    pub altitude_above_uav_m: f64,
    /// Sub-satellite point per frame, `z = h_U + h_L`.
    pub ground_track: Vec<Position3>,
    /// Linear antenna gain `G`.
    pub antenna_gain: f64,
    /// Replaces the geometric visible time when set.
    pub visible_time_override_s: Option<f64>,
}

impl LeoOrbitSpec {
    fn validate(&self, frames: usize) -> Result<()> {
        if !(self.speed_mps > 0.0) {
            return Err(Error::invalid("orbit.speed_mps", "must be > 0"));
        }
        if !(self.orbit_height_m > 0.0) {
            return Err(Error::invalid("orbit.orbit_height_m", "must be > 0"));
        }
        if !(self.elevation_rad >= 0.0 && self.elevation_rad < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid("orbit.elevation_rad", "must lie in [0, pi/2)"));
        }
        if !(self.earth_radius_m > 0.0) {
            return Err(Error::invalid("orbit.earth_radius_m", "must be > 0"));
        }
        if !(self.altitude_above_uav_m > 0.0) {
            return Err(Error::invalid("orbit.altitude_above_uav_m", "must be > 0"));
        }
        if !(self.antenna_gain > 0.0) {
            return Err(Error::invalid("orbit.antenna_gain", "must be > 0"));
        }
        if self.ground_track.len() != frames {
            return Err(Error::invalid(
                "orbit.ground_track",
                format!("has {} entries, expected {frames}", self.ground_track.len()),
            ));
        }
        if let Some(tv) = self.visible_time_override_s {
            if !(tv >= 0.0) {
                return Err(Error::invalid("orbit.visible_time_override_s", "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Straight sub-satellite track in the local plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightTrack {
    pub start: Position3,
    /// Heading of travel, radians counter-clockwise from +x.
    pub heading_rad: f64,
    pub ground_speed_mps: f64,
}

impl StraightTrack {
    /// Positions for frames `1..=frames`; frame 1 sits at `start`.
    pub fn sample(&self, frame_s: f64, frames: usize, z: f64) -> Vec<Position3> {
        let (s, c) = self.heading_rad.sin_cos();
        let step = self.ground_speed_mps * frame_s;
        (0..frames)
            .map(|i| {
                let d = step * i as f64;
                Position3::new(self.start.x + d * c, self.start.y + d * s, z)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub sensors: Vec<SensorSpec>,
    /// Sensor index `K+1`; receives only.
    pub end_user: Position3,
    pub uav_start: Position3,
    pub uav_end: Position3,
    pub uav_altitude_m: f64,
    pub total_time_s: f64,
    pub frame_s: f64,
    pub frame_count: usize,
    pub bandwidth_hz: f64,
    pub noise_density_w_per_hz: f64,
    pub reference_gain: f64,
    pub energy_budget_j: f64,
    pub uav_mass_kg: f64,
    pub v_max_mps: f64,
    pub uav_cpu_hz: f64,
    pub leo_cpu_hz: f64,
    pub switched_cap_uav: f64,
    pub switched_cap_leo: f64,
    pub orbit: LeoOrbitSpec,
}

pub fn dbm_per_hz_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Reference gain at 1 m from a reference SNR: `g0 = snr * N0 * B`.
pub fn reference_gain_from_snr(snr_db: f64, noise_w_per_hz: f64, bandwidth_hz: f64) -> f64 {
    db_to_linear(snr_db) * noise_w_per_hz * bandwidth_hz
}

impl MissionSpec {
    /// Default simulation constants with the given sensors: 360 s mission of 6 s
    /// frames, UAV from (5,0) km to (10,5) km at 1 km altitude, LEO pass crossing
    /// the area diagonally from (10,10) km.
    pub fn with_defaults(sensors: Vec<SensorSpec>) -> Self {
        let frame_s = 6.0;
        let frame_count = 60;
        let uav_altitude_m = 1000.0;
        let altitude_above_uav_m = 600e3;
        let noise = dbm_per_hz_to_w(-174.0);
        let bandwidth = 40e6;
        let track = StraightTrack {
            start: Position3::from_km(10.0, 10.0, 0.0),
            heading_rad: 225f64.to_radians(),
            ground_speed_mps: 40.0,
        };
        let orbit = LeoOrbitSpec {
            speed_mps: 7500.0,
            orbit_height_m: 601e3,
            elevation_rad: 10f64.to_radians(),
            earth_radius_m: 6371e3,
            altitude_above_uav_m,
            ground_track: track.sample(frame_s, frame_count, uav_altitude_m + altitude_above_uav_m),
            antenna_gain: db_to_linear(10.0),
            visible_time_override_s: None,
        };
        let end = Position3::from_km(10.0, 5.0, uav_altitude_m);
        Self {
            sensors,
            end_user: Position3::new(end.x, end.y, 0.0),
            uav_start: Position3::from_km(5.0, 0.0, uav_altitude_m),
            uav_end: end,
            uav_altitude_m,
            total_time_s: frame_s * frame_count as f64,
            frame_s,
            frame_count,
            bandwidth_hz: bandwidth,
            noise_density_w_per_hz: noise,
            reference_gain: reference_gain_from_snr(80.0, noise, bandwidth),
            energy_budget_j: 0.11,
            uav_mass_kg: 9.65,
            v_max_mps: 50.0,
            uav_cpu_hz: 19.5e9,
            leo_cpu_hz: 3.0 * 19.5e9,
            switched_cap_uav: 1e-28,
            switched_cap_leo: 1e-28,
            orbit,
        }
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// `B * Delta / K`: bits-per-slot normalizer in the rate exponent.
    pub fn slot_bandwidth(&self) -> f64 {
        self.bandwidth_hz * self.frame_s / self.sensor_count() as f64
    }

    /// `N0 * B * Delta / K`.
    pub fn slot_noise_energy(&self) -> f64 {
        self.noise_density_w_per_hz * self.slot_bandwidth()
    }

    /// `kappa = 0.5 * M * Delta`.
    pub fn flying_coefficient(&self) -> f64 {
        0.5 * self.uav_mass_kg * self.frame_s
    }

    /// Bits the UAV cloudlet can process for sensor `k` (0-based) over the mission.
    pub fn uav_capacity_bits(&self, k: usize) -> f64 {
        let per_frame = self.uav_cpu_hz * self.frame_s / self.sensor_count() as f64;
        per_frame * self.frame_count as f64 / self.sensors[k].cycles_per_bit_uav
    }

    pub fn max_step_m(&self) -> f64 {
        self.v_max_mps * self.frame_s
    }

    /// Rebuilds timing for a new mission length, resampling a straight LEO track.
    pub fn with_timing(&self, total_time_s: f64, track: &StraightTrack) -> Result<Self> {
        let n = (total_time_s / self.frame_s).round();
        if (n * self.frame_s - total_time_s).abs() > 1e-9 * total_time_s.max(1.0) {
            return Err(Error::invalid(
                "total_time_s",
                format!("{total_time_s} is not a multiple of frame {}", self.frame_s),
            ));
        }
        let mut m = self.clone();
        m.total_time_s = total_time_s;
        m.frame_count = n as usize;
        m.orbit.ground_track = track.sample(
            m.frame_s,
            m.frame_count,
            m.uav_altitude_m + m.orbit.altitude_above_uav_m,
        );
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::invalid("sensors", "at least one sensor is required"));
        }
        for (k, s) in self.sensors.iter().enumerate() {
            s.validate(k)?;
        }
        if self.frame_count < 3 {
            return Err(Error::invalid("frame_count", "must be >= 3"));
        }
        let positives = [
            ("uav_altitude_m", self.uav_altitude_m),
            ("total_time_s", self.total_time_s),
            ("frame_s", self.frame_s),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("reference_gain", self.reference_gain),
            ("energy_budget_j", self.energy_budget_j),
            ("uav_mass_kg", self.uav_mass_kg),
            ("v_max_mps", self.v_max_mps),
            ("uav_cpu_hz", self.uav_cpu_hz),
            ("leo_cpu_hz", self.leo_cpu_hz),
            ("switched_cap_uav", self.switched_cap_uav),
            ("switched_cap_leo", self.switched_cap_leo),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be a finite value > 0, got {v}")));
            }
        }
        let expected = self.frame_s * self.frame_count as f64;
        if (expected - self.total_time_s).abs() > 1e-9 * self.total_time_s {
            return Err(Error::invalid(
                "total_time_s",
                format!("T = {} but N * Delta = {expected}", self.total_time_s),
            ));
        }
        for (name, p) in [
            ("end_user", self.end_user),
            ("uav_start", self.uav_start),
            ("uav_end", self.uav_end),
        ] {
            if !p.is_finite() {
                return Err(Error::invalid(name, "non-finite coordinate"));
            }
        }
        self.orbit.validate(self.frame_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_gain_from_table_values() {
        let n0 = dbm_per_hz_to_w(-174.0);
        let g0 = reference_gain_from_snr(80.0, n0, 40e6);
        assert!((g0 - 1.5924e-5).abs() / 1.5924e-5 < 1e-3, "g0 = {g0}");
    }

    #[test]
    fn defaults_validate() {
        let m = MissionSpec::with_defaults(vec![SensorSpec::new(1e3, 2e3, 1e8)]);
        m.validate().unwrap();
        assert_eq!(m.frame_count, 60);
        assert!((m.flying_coefficient() - 28.95).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_timing() {
        let mut m = MissionSpec::with_defaults(vec![SensorSpec::new(0.0, 0.0, 0.0)]);
        m.total_time_s = 361.0;
        assert!(matches!(m.validate(), Err(Error::InvalidInput { field, .. }) if field == "total_time_s"));
    }

    #[test]
    fn rejects_bad_output_ratio() {
        let mut s = SensorSpec::new(0.0, 0.0, 1.0);
        s.output_ratio_leo = 1.5;
        let m = MissionSpec::with_defaults(vec![s]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn track_frame_one_is_start() {
        let t = StraightTrack {
            start: Position3::from_km(10.0, 10.0, 0.0),
            heading_rad: 225f64.to_radians(),
            ground_speed_mps: 40.0,
        };
        let pts = t.sample(6.0, 60, 601e3);
        assert_eq!(pts[0].x, 10e3);
        let step = 40.0 * 6.0 / 2f64.sqrt();
        assert!((pts[1].x - (10e3 - step)).abs() < 1e-9);
        assert!((pts[1].y - (10e3 - step)).abs() < 1e-9);
    }
}
