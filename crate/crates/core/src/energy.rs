//! Per-frame computation, communication and flying energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mission::{MissionSpec, Position3};
use crate::scenario::{sensor_uav_gain, uav_leo_gain};

/// Allocations below this are treated as rounding noise and clamped to zero.
pub const NEGATIVE_BITS_TOLERANCE: f64 = 1e-3;

fn check_bits(bits: f64) -> Result<f64> {
    if !bits.is_finite() || bits < -NEGATIVE_BITS_TOLERANCE {
        return Err(Error::invalid("bits", format!("negative or non-finite allocation {bits}")));
    }
    Ok(bits.max(0.0))
}

/// Cloudlet computation energy for every sensor at one frame.
///
/// `bits[k]` and `cycles_per_bit[k]` describe sensor `k`; the squared total
/// cycle load couples all sensors sharing the cloudlet.
pub fn computation_energy(
    bits: &[f64],
    cycles_per_bit: &[f64],
    switched_cap: f64,
    frame_s: f64,
) -> Result<Vec<f64>> {
    if bits.len() != cycles_per_bit.len() {
        return Err(Error::DimensionMismatch {
            expected: cycles_per_bit.len(),
            got: bits.len(),
        });
    }
    let bits: Vec<f64> = bits.iter().map(|&b| check_bits(b)).collect::<Result<_>>()?;
    let load: f64 = bits.iter().zip(cycles_per_bit).map(|(l, c)| l * c).sum();
    let scale = switched_cap * load * load / (frame_s * frame_s);
    Ok(bits.iter().zip(cycles_per_bit).map(|(l, c)| scale * c * l).collect())
}

/// Transmit energy to push `bits` through one `Delta/K` slot over a link of
/// power gain `gain`.
pub fn link_energy(bits: f64, gain: f64, slot_noise_energy: f64, slot_bandwidth: f64) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::invalid("gain", format!("must be > 0, got {gain}")));
    }
    let bits = check_bits(bits)?;
    Ok(slot_noise_energy / gain * (bits / slot_bandwidth * std::f64::consts::LN_2).exp_m1())
}

pub fn uav_to_leo_energy(mission: &MissionSpec, bits: f64, gain: f64) -> Result<f64> {
    link_energy(bits, gain, mission.slot_noise_energy(), mission.slot_bandwidth())
}

pub fn leo_to_uav_energy(mission: &MissionSpec, bits: f64, gain: f64) -> Result<f64> {
    link_energy(bits, gain, mission.slot_noise_energy(), mission.slot_bandwidth())
}

pub fn sensor_to_uav_energy(mission: &MissionSpec, bits: f64, gain: f64) -> Result<f64> {
    link_energy(bits, gain, mission.slot_noise_energy(), mission.slot_bandwidth())
}

/// Largest uplink that keeps `sensor_to_uav_energy` within `budget` at `gain`.
pub fn max_bits_within(mission: &MissionSpec, gain: f64, budget: f64) -> f64 {
    mission.slot_bandwidth() * (1.0 + budget * gain / mission.slot_noise_energy()).log2()
}

/// `E = kappa * |v|^2` with `kappa = M * Delta / 2`.
pub fn flying_energy(mission: &MissionSpec, vx: f64, vy: f64) -> f64 {
    mission.flying_coefficient() * (vx * vx + vy * vy)
}

/// Bit families of one decision, indexed `[k][frame - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitAllocation {
    pub uplink_sensor_uav: Vec<Vec<f64>>,
    pub uplink_uav_leo: Vec<Vec<f64>>,
    pub downlink_leo_uav: Vec<Vec<f64>>,
    pub compute_uav: Vec<Vec<f64>>,
    pub compute_leo: Vec<Vec<f64>>,
}

impl BitAllocation {
    pub fn zeros(sensors: usize, frames: usize) -> Self {
        let z = vec![vec![0.0; frames]; sensors];
        Self {
            uplink_sensor_uav: z.clone(),
            uplink_uav_leo: z.clone(),
            downlink_leo_uav: z.clone(),
            compute_uav: z.clone(),
            compute_leo: z,
        }
    }

    /// Bits delivered to the end user: output of both cloudlets.
    pub fn downlink_end_bits(&self, mission: &MissionSpec) -> f64 {
        mission
            .sensors
            .iter()
            .enumerate()
            .map(|(k, s)| {
                s.output_ratio_uav * self.compute_uav[k].iter().sum::<f64>()
                    + s.output_ratio_leo * self.compute_leo[k].iter().sum::<f64>()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `N+1` waypoints at the UAV altitude.
    pub waypoints: Vec<Position3>,
}

impl Trajectory {
    /// Velocity during frame `n` (1-based).
    pub fn velocity(&self, frame: usize, frame_s: f64) -> (f64, f64) {
        let a = self.waypoints[frame - 1];
        let b = self.waypoints[frame];
        ((b.x - a.x) / frame_s, (b.y - a.y) / frame_s)
    }
}

/// UAV-to-end-user downlink energy at the final waypoint.
pub fn uav_to_end_energy(
    mission: &MissionSpec,
    alloc: &BitAllocation,
    trajectory: &Trajectory,
) -> Result<f64> {
    let bits = alloc.downlink_end_bits(mission);
    let last = trajectory
        .waypoints
        .last()
        .ok_or_else(|| Error::invalid("trajectory", "no waypoints"))?;
    let gain = sensor_uav_gain(mission, mission.sensor_count() + 1, last)?;
    link_energy(bits, gain, mission.slot_noise_energy(), mission.slot_bandwidth())
}

/// Terms of the UAV energy for one sensor at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTerms {
    pub uav_to_leo: f64,
    pub uav_compute: f64,
    pub flying: f64,
}

/// `alpha * (beta * E_UL + (1 - beta) * E_U) + (1 - alpha)(1 - beta) * E_U + E_F`.
pub fn total_frame_energy(terms: FrameTerms, alpha: bool, beta: bool) -> f64 {
    let a = f64::from(u8::from(alpha));
    let b = f64::from(u8::from(beta));
    a * (b * terms.uav_to_leo + (1.0 - b) * terms.uav_compute)
        + (1.0 - a) * (1.0 - b) * terms.uav_compute
        + terms.flying
}

/// Full energy accounting of a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `[k][frame - 1]` joules.
    pub comp_uav: Vec<Vec<f64>>,
    pub comp_leo: Vec<Vec<f64>>,
    pub tx_sensor_uav: Vec<Vec<f64>>,
    pub tx_uav_leo: Vec<Vec<f64>>,
    pub tx_leo_uav: Vec<Vec<f64>>,
    /// `[frame - 1]` joules.
    pub flying: Vec<f64>,
    pub downlink_end: f64,
    pub totals: EnergyTotals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyTotals {
    pub comp_uav: f64,
    pub comp_leo: f64,
    pub tx_sensor_uav: f64,
    pub tx_uav_leo: f64,
    pub tx_leo_uav: f64,
    pub flying: f64,
    pub downlink_end: f64,
    /// UAV computing + UAV-to-LEO uplink + flying.
    pub objective: f64,
    pub report: f64,
}

impl EnergyBreakdown {
    pub fn evaluate(mission: &MissionSpec, alloc: &BitAllocation, trajectory: &Trajectory) -> Result<Self> {
        let k_count = mission.sensor_count();
        let n_count = mission.frame_count;
        if trajectory.waypoints.len() != n_count + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_count + 1,
                got: trajectory.waypoints.len(),
            });
        }
        let cu: Vec<f64> = mission.sensors.iter().map(|s| s.cycles_per_bit_uav).collect();
        let cl: Vec<f64> = mission.sensors.iter().map(|s| s.cycles_per_bit_leo).collect();
        let mut comp_uav = vec![vec![0.0; n_count]; k_count];
        let mut comp_leo = vec![vec![0.0; n_count]; k_count];
        let mut tx_su = vec![vec![0.0; n_count]; k_count];
        let mut tx_ul = vec![vec![0.0; n_count]; k_count];
        let mut tx_lu = vec![vec![0.0; n_count]; k_count];
        let mut flying = vec![0.0; n_count];
        for n in 0..n_count {
            let p = trajectory.waypoints[n];
            let lu: Vec<f64> = (0..k_count).map(|k| alloc.compute_uav[k][n]).collect();
            let ll: Vec<f64> = (0..k_count).map(|k| alloc.compute_leo[k][n]).collect();
            let eu = computation_energy(&lu, &cu, mission.switched_cap_uav, mission.frame_s)?;
            let el = computation_energy(&ll, &cl, mission.switched_cap_leo, mission.frame_s)?;
            let h = uav_leo_gain(mission, n + 1, &p)?;
            for k in 0..k_count {
                comp_uav[k][n] = eu[k];
                comp_leo[k][n] = el[k];
                let g = sensor_uav_gain(mission, k + 1, &p)?;
                tx_su[k][n] = sensor_to_uav_energy(mission, alloc.uplink_sensor_uav[k][n], g)?;
                tx_ul[k][n] = uav_to_leo_energy(mission, alloc.uplink_uav_leo[k][n], h)?;
                tx_lu[k][n] = leo_to_uav_energy(mission, alloc.downlink_leo_uav[k][n], h)?;
            }
            let (vx, vy) = trajectory.velocity(n + 1, mission.frame_s);
            flying[n] = flying_energy(mission, vx, vy);
        }
        let downlink_end = uav_to_end_energy(mission, alloc, trajectory)?;
        let sum2 = |m: &Vec<Vec<f64>>| m.iter().flatten().sum::<f64>();
        let mut totals = EnergyTotals {
            comp_uav: sum2(&comp_uav),
            comp_leo: sum2(&comp_leo),
            tx_sensor_uav: sum2(&tx_su),
            tx_uav_leo: sum2(&tx_ul),
            tx_leo_uav: sum2(&tx_lu),
            flying: flying.iter().sum(),
            downlink_end,
            objective: 0.0,
            report: 0.0,
        };
        totals.objective = totals.comp_uav + totals.tx_uav_leo + totals.flying;
        totals.report = totals.objective + downlink_end;
        Ok(Self {
            comp_uav,
            comp_leo,
            tx_sensor_uav: tx_su,
            tx_uav_leo: tx_ul,
            tx_leo_uav: tx_lu,
            flying,
            downlink_end,
            totals,
        })
    }

    /// Objective contribution of frame `n` (0-based), summed over sensors.
    pub fn frame_objective(&self, n: usize) -> f64 {
        let s: f64 = (0..self.comp_uav.len())
            .map(|k| self.comp_uav[k][n] + self.tx_uav_leo[k][n])
            .sum();
        s + self.flying[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::SensorSpec;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn mission(k: usize) -> MissionSpec {
        let mut m = MissionSpec::with_defaults(vec![SensorSpec::new(0.0, 0.0, 0.0); k]);
        m.reference_gain = 1.5924e-5;
        m
    }

    #[test]
    fn computation_single_sensor() {
        let e = computation_energy(&[1e6], &[1550.7], 1e-28, 6.0).unwrap();
        let oracle = 1e-28 * 1550.7 * 1e6 / 36.0 * (1550.7e6f64).powi(2);
        assert!(rel(e[0], oracle) < 1e-12);
        assert!(rel(e[0], 1.036e-2) < 1e-3, "E = {}", e[0]);
        assert_eq!(computation_energy(&[0.0, 0.0], &[1.0, 2.0], 1e-28, 6.0).unwrap(), vec![0.0, 0.0]);
        assert!(computation_energy(&[-1.0], &[1.0], 1e-28, 6.0).is_err());
    }

    #[test]
    fn computation_cubic_homogeneity() {
        let bits = [1.3e6, 0.4e6, 2.2e6];
        let c = [1500.0, 1550.7, 1700.0];
        let a = computation_energy(&bits, &c, 1e-28, 6.0).unwrap();
        let doubled: Vec<f64> = bits.iter().map(|b| 2.0 * b).collect();
        let b = computation_energy(&doubled, &c, 1e-28, 6.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(rel(*y, 8.0 * x) < 1e-12);
        }
    }

    #[test]
    fn uav_leo_link_at_nadir() {
        let m = mission(10);
        assert!(rel(m.slot_bandwidth(), 24e6) < 1e-12);
        let h = 10.0 * 1.5924e-5 / 3.6e11;
        let e = uav_to_leo_energy(&m, 1e6, h).unwrap();
        let oracle = m.slot_noise_energy() / h * ((1.0f64 / 24.0).exp2() - 1.0);
        assert!(rel(e, oracle) < 1e-12);
        assert!(rel(e, 6.33) < 2e-3, "E = {e}");
        assert_eq!(uav_to_leo_energy(&m, 0.0, h).unwrap(), 0.0);
        assert!(uav_to_leo_energy(&m, 1e6, 0.0).is_err());
        assert_eq!(leo_to_uav_energy(&m, 1e6, h).unwrap(), e);
    }

    #[test]
    fn splitting_over_frames_is_cheaper() {
        let m = mission(10);
        let h = 1e-16;
        for bits in [1e5, 1e7, 5e7] {
            let one = uav_to_leo_energy(&m, bits, h).unwrap();
            let two = 2.0 * uav_to_leo_energy(&m, bits / 2.0, h).unwrap();
            assert!(two <= one);
        }
    }

    #[test]
    fn sensor_uplink_overhead() {
        let m = mission(10);
        let g = 1.5924e-11;
        let e = sensor_to_uav_energy(&m, 1e6, g).unwrap();
        assert!(rel(e, 1.76e-4) < 5e-3, "E = {e}");
        assert!(e <= m.energy_budget_j);
        assert!(rel(sensor_to_uav_energy(&m, 1e6, g / 2.0).unwrap(), 2.0 * e) < 1e-12);
        let cap = max_bits_within(&m, g, m.energy_budget_j);
        assert!(rel(sensor_to_uav_energy(&m, cap, g).unwrap(), m.energy_budget_j) < 1e-10);
    }

    #[test]
    fn wider_slot_relieves_rate() {
        let mut m = mission(10);
        let h = 4.42e-16;
        let narrow = leo_to_uav_energy(&m, 1e6, h).unwrap();
        m.bandwidth_hz *= 2.0;
        let wide = leo_to_uav_energy(&m, 1e6, h).unwrap();
        assert!(wide < narrow);
    }

    #[test]
    fn flying() {
        let m = mission(1);
        assert!(rel(flying_energy(&m, 10.0, 0.0), 2895.0) < 1e-12);
        assert_eq!(flying_energy(&m, 0.0, 0.0), 0.0);
        assert!(rel(flying_energy(&m, 50.0, 0.0), 72375.0) < 1e-12);
    }

    #[test]
    fn downlink_to_end_user() {
        let m = mission(2);
        let mut a = BitAllocation::zeros(2, m.frame_count);
        let traj = Trajectory {
            waypoints: vec![Position3::new(m.end_user.x, m.end_user.y, 1000.0); m.frame_count + 1],
        };
        assert_eq!(uav_to_end_energy(&m, &a, &traj).unwrap(), 0.0);
        a.compute_uav[0][3] = 1e8;
        a.compute_leo[1][5] = 1e8;
        assert!(rel(a.downlink_end_bits(&m), 1e8) < 1e-12);

        let mut single = mission(10);
        single.sensors.truncate(10);
        let mut b = BitAllocation::zeros(10, single.frame_count);
        b.compute_uav[0][1] = 2e6;
        let e = uav_to_end_energy(&single, &b, &traj).unwrap();
        assert!(rel(e, 1.76e-4) < 5e-3);
    }

    #[test]
    fn mask_algebra() {
        let t = FrameTerms {
            uav_to_leo: 3.0,
            uav_compute: 5.0,
            flying: 7.0,
        };
        assert_eq!(total_frame_energy(t, true, true), 10.0);
        assert_eq!(total_frame_energy(t, true, false), 12.0);
        assert_eq!(total_frame_energy(t, false, false), 12.0);
        let zero = FrameTerms {
            uav_to_leo: 0.0,
            uav_compute: 0.0,
            flying: 0.0,
        };
        assert_eq!(total_frame_energy(zero, true, true), 0.0);
        let eu = computation_energy(&[1e6], &[1550.7], 1e-28, 6.0).unwrap()[0];
        let m = mission(1);
        let terms = FrameTerms {
            uav_to_leo: 0.0,
            uav_compute: eu,
            flying: flying_energy(&m, 10.0, 0.0),
        };
        assert!(rel(total_frame_energy(terms, true, false), 1.036e-2 + 2895.0) < 1e-6);
    }

    #[test]
    fn breakdown_report_minus_objective_is_downlink() {
        let m = mission(2);
        let mut a = BitAllocation::zeros(2, m.frame_count);
        a.compute_uav[0][2] = 3e6;
        a.uplink_uav_leo[1][4] = 2e6;
        a.compute_leo[1][5] = 2e6;
        let traj = Trajectory {
            waypoints: crate::scenario::constant_velocity_path(&m).unwrap(),
        };
        let b = EnergyBreakdown::evaluate(&m, &a, &traj).unwrap();
        assert!((b.totals.report - b.totals.objective - b.downlink_end).abs() <= 1e-9 * b.totals.report);
        assert!(b.totals.objective > b.totals.flying);
        let by_frame: f64 = (0..m.frame_count).map(|n| b.frame_objective(n)).sum();
        assert!(rel(by_frame, b.totals.objective) < 1e-12);
    }
}
