//! Strictly feasible starting point: constant-velocity path with evenly
//! spread bits.

use crate::energy::max_bits_within;
use crate::error::{Error, Result};
use crate::plan::{prefix_sums, DecisionVector, Family, OffloadProblem, Window};
use crate::scenario::sensor_uav_gain;

/// Fraction of the per-frame budget kept in reserve so the start is interior.
pub const BUDGET_MARGIN: f64 = 1e-3;

/// How far each downstream stage trails its upstream stage, in frames.
pub const STAGE_LAG: f64 = 0.5;

/// Splits `total` as evenly as the per-frame `caps` allow.
pub fn water_fill(total: f64, caps: &[f64]) -> Result<Vec<f64>> {
    let capacity: f64 = caps.iter().sum();
    if total > capacity {
        return Err(Error::Infeasible(format!(
            "{total:.6e} bits requested but only {capacity:.6e} fit within the budget"
        )));
    }
    let mut out = vec![0.0; caps.len()];
    let mut open: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0.0).collect();
    let mut remaining = total;
    while remaining > 0.0 && !open.is_empty() {
        let share = remaining / open.len() as f64;
        let (clamped, free): (Vec<usize>, Vec<usize>) = open.iter().partition(|&&i| caps[i] - out[i] <= share);
        if clamped.is_empty() {
            for &i in &free {
                out[i] += share;
            }
            break;
        }
        for &i in &clamped {
            remaining -= caps[i] - out[i];
            out[i] = caps[i];
        }
        open = free;
    }
    Ok(out)
}

/// Downstream per-frame bits trailing `upstream` by [`STAGE_LAG`] frames,
/// confined to `window` and summing to `ratio` times the upstream total.
fn trail(upstream: &[f64], window: Window, ratio: f64) -> Vec<f64> {
    let n = upstream.len();
    let c = prefix_sums(upstream);
    let total = ratio * c[n];
    let cum = |m: usize| -> f64 {
        if m < window.first {
            0.0
        } else if m >= window.last {
            total
        } else {
            ratio * (c[m - 1] - STAGE_LAG * upstream[m - 2])
        }
    };
    (1..=n).map(|m| (cum(m) - cum(m - 1)).max(0.0)).collect()
}

/// Constant-velocity path with bits spread evenly over each window, water-
/// filled under the sensor budget and staggered so every pipeline stage
/// trails the one feeding it.
pub fn feasible_initialization(problem: &OffloadProblem) -> Result<DecisionVector> {
    let mission = &problem.mission;
    let n = mission.frame_count;
    let mut z = DecisionVector::idle(mission)?;
    for (k, plan) in problem.plans.iter().enumerate() {
        let Some(up) = plan.family(Family::Uplink) else {
            continue;
        };
        let mut caps = vec![0.0; n];
        for frame in up.window.frames() {
            let g = sensor_uav_gain(mission, k + 1, &z.trajectory.waypoints[frame - 1])?;
            caps[frame - 1] = max_bits_within(mission, g, mission.energy_budget_j) * (1.0 - BUDGET_MARGIN);
        }
        let fill = |total: f64, last_upload: usize, caps: &[f64]| -> Result<Vec<f64>> {
            let mut bounded = caps.to_vec();
            bounded.iter_mut().skip(last_upload).for_each(|c| *c = 0.0);
            water_fill(total, &bounded).map_err(|e| match e {
                Error::Infeasible(msg) => Error::Infeasible(format!("sensor {}: {msg}", k + 1)),
                other => other,
            })
        };
        let mut to_leo = vec![0.0; n];
        if let Some(relay) = plan.family(Family::Relay) {
            // Leave half of the spare headroom in every frame so a UAV share
            // can still be uploaded alongside.
            let room: f64 = caps[..relay.window.last - 1].iter().sum();
            let keep = if room > 0.0 { 0.5 * (1.0 - relay.total_bits / room).max(0.0) } else { 0.0 };
            let leo_caps: Vec<f64> = caps.iter().map(|c| c * (1.0 - keep)).collect();
            to_leo = fill(relay.total_bits, relay.window.last - 1, &leo_caps)?;
        }
        let mut to_uav = vec![0.0; n];
        if let Some(uc) = plan.family(Family::UavCompute) {
            let rest: Vec<f64> = caps.iter().zip(&to_leo).map(|(c, l)| c - l).collect();
            to_uav = fill(uc.total_bits, uc.window.last - 1, &rest)?;
            z.alloc.compute_uav[k] = trail(&to_uav, uc.window, 1.0);
        }
        z.alloc.uplink_sensor_uav[k] = to_leo.iter().zip(&to_uav).map(|(a, b)| a + b).collect();
        if let Some(relay) = plan.family(Family::Relay) {
            let relayed = trail(&to_leo, relay.window, 1.0);
            let lc = plan.family(Family::LeoCompute).expect("relay implies LEO computing");
            let computed = trail(&relayed, lc.window, 1.0);
            let down = plan.family(Family::LeoDownlink);
            if let Some(d) = down {
                z.alloc.downlink_leo_uav[k] = trail(&computed, d.window, mission.sensors[k].output_ratio_leo);
            }
            z.alloc.uplink_uav_leo[k] = relayed;
            z.alloc.compute_leo[k] = computed;
        }
    }
    let violation = problem.max_violation(&z)?;
    if violation > 1e-8 {
        return Err(Error::Infeasible(format!(
            "initial allocation violates constraints by {violation:.3e}"
        )));
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{MissionSpec, SensorSpec};
    use crate::scenario::ScenarioKind;

    fn short_mission(n: usize, sensors: Vec<SensorSpec>) -> MissionSpec {
        let mut m = MissionSpec::with_defaults(sensors);
        m.frame_count = n;
        m.total_time_s = m.frame_s * n as f64;
        m.orbit.ground_track.truncate(n);
        m.uav_start = m.sensors[0].position;
        m.uav_start.z = m.uav_altitude_m;
        m.uav_end = m.uav_start;
        m.uav_end.x += 500.0;
        m
    }

    #[test]
    fn water_fill_respects_caps() {
        let out = water_fill(10.0, &[1.0, 5.0, 5.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 4.5, 4.5, 0.0]);
        assert_eq!(water_fill(4.0, &[2.0; 4]).unwrap(), vec![1.0; 4]);
        assert!(water_fill(9.0, &[2.0; 4]).is_err());
    }

    #[test]
    fn trailing_stage_stays_behind() {
        let up = [0.0, 6.0, 6.0, 6.0, 6.0, 0.0];
        let d = trail(&up, Window::new(3, 6), 1.0);
        assert!((d.iter().sum::<f64>() - 24.0).abs() < 1e-12);
        let cu = prefix_sums(&up);
        let cd = prefix_sums(&d);
        for m in 0..6 {
            assert!(cd[m + 1] <= cu[m] + 1e-12);
        }
    }

    #[test]
    fn uav_only_split() {
        let m = short_mission(6, vec![SensorSpec::new(5e3, 0.0, 24e6)]);
        let p = OffloadProblem::new(m, ScenarioKind::AlwaysOff).unwrap();
        let z = feasible_initialization(&p).unwrap();
        assert_eq!(&z.alloc.uplink_sensor_uav[0][..4], &[6e6; 4]);
        assert_eq!(z.alloc.uplink_sensor_uav[0][4], 0.0);
        assert_eq!(z.alloc.compute_uav[0][0], 0.0);
        assert!(z.alloc.compute_uav[0][1] > 0.0);
        assert!(p.max_violation(&z).unwrap() <= 0.0);
    }

    #[test]
    fn zero_load_is_idle() {
        let m = short_mission(8, vec![SensorSpec::new(5e3, 0.0, 0.0)]);
        let p = OffloadProblem::new(m.clone(), ScenarioKind::AlwaysOn).unwrap();
        let z = feasible_initialization(&p).unwrap();
        assert_eq!(z, DecisionVector::idle(&m).unwrap());
    }

    #[test]
    fn distant_sensor_is_budget_limited() {
        let mut m = short_mission(10, vec![SensorSpec::new(5e3, 0.0, 0.0)]);
        m.sensors[0].position.x += 40e3;
        let path = crate::scenario::constant_velocity_path(&m).unwrap();
        let cap: f64 = path[..8]
            .iter()
            .map(|w| max_bits_within(&m, sensor_uav_gain(&m, 1, w).unwrap(), m.energy_budget_j))
            .sum();
        m.sensors[0].input_bits = 0.9985 * cap;
        let p = OffloadProblem::new(m.clone(), ScenarioKind::AlwaysOff).unwrap();
        let z = feasible_initialization(&p).unwrap();
        assert!(p.violations(&z).unwrap().budget <= 0.0);
        let worst = (0..8)
            .map(|n| {
                let g = sensor_uav_gain(&m, 1, &z.trajectory.waypoints[n]).unwrap();
                crate::energy::sensor_to_uav_energy(&m, z.alloc.uplink_sensor_uav[0][n], g).unwrap()
            })
            .fold(0.0, f64::max);
        assert!(worst > 0.99 * m.energy_budget_j && worst < m.energy_budget_j);
        m.sensors[0].input_bits = 1.001 * cap;
        let p = OffloadProblem::new(m, ScenarioKind::AlwaysOff).unwrap();
        assert!(matches!(feasible_initialization(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn leo_pipeline_is_staggered() {
        let mut m = short_mission(12, vec![SensorSpec::new(5e3, 0.0, 2e8)]);
        m.uav_cpu_hz = 1e9;
        let p = OffloadProblem::new(m, ScenarioKind::AlwaysOn).unwrap();
        assert!(p.plans[0].beta);
        let z = feasible_initialization(&p).unwrap();
        assert!(p.max_violation(&z).unwrap() <= 1e-12);
        let total: f64 = z.alloc.downlink_leo_uav[0].iter().sum();
        assert!((total - 1e8).abs() < 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn water_fill_respects_caps_and_total(
            caps in proptest::collection::vec(0.0f64..10.0, 1..20),
            share in 0.0f64..1.0,
        ) {
            let total = share * caps.iter().sum::<f64>();
            let out = water_fill(total, &caps).unwrap();
            let sum: f64 = out.iter().sum();
            proptest::prop_assert!((sum - total).abs() <= 1e-9 * (1.0 + total));
            for (o, c) in out.iter().zip(&caps) {
                proptest::prop_assert!(*o >= 0.0 && *o <= c + 1e-12);
            }
            // Unsaturated frames share one common level.
            let open: Vec<f64> = out.iter().zip(&caps).filter(|(o, c)| **o < **c - 1e-9).map(|(o, _)| *o).collect();
            if let Some(first) = open.first() {
                proptest::prop_assert!(open.iter().all(|o| (o - first).abs() <= 1e-9 * (1.0 + first)));
            }
        }
    }
}
