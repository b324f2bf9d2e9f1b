//! Per-sensor pipeline plans (active frame windows and totals) and the
//! decision vector they constrain.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::energy::{sensor_to_uav_energy, BitAllocation, EnergyBreakdown, Trajectory};
use crate::error::{Error, Result};
use crate::mission::MissionSpec;
use crate::scenario::{
    build_access_profile, constant_velocity_path, schedule_offloading, sensor_uav_gain, AccessProfile,
    ScenarioKind, ScheduleProfile,
};

/// Working units of the solver: bits in Mbit, positions in km, energy in kJ.
pub mod scale {
    pub const BITS: f64 = 1e6;
    pub const POSITION: f64 = 1e3;
    pub const ENERGY: f64 = 1e3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Sensor to UAV.
    Uplink,
    /// UAV to LEO.
    Relay,
    LeoCompute,
    /// LEO results back to the UAV.
    LeoDownlink,
    UavCompute,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Uplink,
        Family::Relay,
        Family::LeoCompute,
        Family::LeoDownlink,
        Family::UavCompute,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Uplink => "L_IU",
            Family::Relay => "L_UL",
            Family::LeoCompute => "l_L",
            Family::LeoDownlink => "L_LU",
            Family::UavCompute => "l_U",
        }
    }

    pub fn column(self, alloc: &BitAllocation) -> &Vec<Vec<f64>> {
        match self {
            Family::Uplink => &alloc.uplink_sensor_uav,
            Family::Relay => &alloc.uplink_uav_leo,
            Family::LeoCompute => &alloc.compute_leo,
            Family::LeoDownlink => &alloc.downlink_leo_uav,
            Family::UavCompute => &alloc.compute_uav,
        }
    }

    pub fn column_mut(self, alloc: &mut BitAllocation) -> &mut Vec<Vec<f64>> {
        match self {
            Family::Uplink => &mut alloc.uplink_sensor_uav,
            Family::Relay => &mut alloc.uplink_uav_leo,
            Family::LeoCompute => &mut alloc.compute_leo,
            Family::LeoDownlink => &mut alloc.downlink_leo_uav,
            Family::UavCompute => &mut alloc.compute_uav,
        }
    }
}

/// Inclusive range of 1-based frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

impl Window {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        (self.last + 1).saturating_sub(self.first)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, frame: usize) -> bool {
        frame >= self.first && frame <= self.last
    }

    pub fn frames(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyPlan {
    pub window: Window,
    pub total_bits: f64,
}

/// Causality between pipeline stages in cumulative form:
/// `sum_d C_d(n + 1) <= ratio * C_upstream(n)` for every frame `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub upstream: Family,
    pub downstream: Vec<Family>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlan {
    pub beta: bool,
    pub input_bits: f64,
    /// Bits that exceed the UAV cloudlet and are never processed.
    pub unprocessed_bits: f64,
    families: [Option<FamilyPlan>; 5],
    pub links: Vec<Link>,
}

impl SensorPlan {
    pub fn family(&self, f: Family) -> Option<&FamilyPlan> {
        self.families[f.index()].as_ref()
    }

    pub fn active_families(&self) -> impl Iterator<Item = (Family, &FamilyPlan)> + '_ {
        Family::ALL
            .into_iter()
            .filter_map(move |f| self.family(f).map(|p| (f, p)))
    }

    pub fn processed_bits(&self) -> f64 {
        self.input_bits - self.unprocessed_bits
    }
}

/// Builds the window plan of one sensor.
pub fn plan_sensor(mission: &MissionSpec, k: usize, kind: ScenarioKind, beta: bool) -> Result<SensorPlan> {
    let n = mission.frame_count;
    let sensor = &mission.sensors[k];
    let input = sensor.input_bits;
    let cap = mission.uav_capacity_bits(k);
    let mut families = [None; 5];
    let mut set = |f: Family, first: usize, last: usize, total: f64| -> Result<()> {
        if total <= 0.0 {
            return Ok(());
        }
        let window = Window::new(first, last);
        if window.is_empty() || first == 0 || last > n {
            return Err(Error::Infeasible(format!(
                "sensor {} has no frames for {} (window {first}..={last}, N = {n})",
                k + 1,
                f.label()
            )));
        }
        families[f.index()] = Some(FamilyPlan {
            window,
            total_bits: total,
        });
        Ok(())
    };
    let unprocessed;
    match (beta, kind) {
        (false, _) => {
            let uav = input.min(cap);
            set(Family::Uplink, 1, n.saturating_sub(2), uav)?;
            set(Family::UavCompute, 2, n.saturating_sub(1), uav)?;
            unprocessed = input - uav;
        }
        (true, ScenarioKind::AlwaysOn) => {
            set(Family::Uplink, 1, n.saturating_sub(4), input)?;
            set(Family::Relay, 2, n.saturating_sub(3), input)?;
            set(Family::LeoCompute, 3, n.saturating_sub(2), input)?;
            set(Family::LeoDownlink, 4, n.saturating_sub(1), sensor.output_ratio_leo * input)?;
            unprocessed = 0.0;
        }
        (true, ScenarioKind::Intermediate { connected_frames }) => {
            if connected_frames == 0 || connected_frames >= n || n < 5 {
                return Err(Error::invalid(
                    "connected_frames",
                    format!("need 0 < N_t < N and N >= 5, got N_t = {connected_frames}, N = {n}"),
                ));
            }
            let m = connected_frames.min(n - 4);
            let leo = input * connected_frames as f64 / n as f64;
            let uav = (input - leo).min(cap);
            set(Family::Uplink, 1, n - 2, leo + uav)?;
            set(Family::Relay, 2, m + 1, leo)?;
            set(Family::LeoCompute, 3, m + 2, leo)?;
            set(Family::LeoDownlink, 4, m + 3, sensor.output_ratio_leo * leo)?;
            set(Family::UavCompute, m + 2, n - 1, uav)?;
            unprocessed = input - leo - uav;
        }
        (true, ScenarioKind::AlwaysOff) => {
            return Err(Error::invalid("beta", "LEO computing selected without LEO access"));
        }
    }
    let has = |f: Family| families[f.index()].is_some();
    let mut links = Vec::new();
    if has(Family::Uplink) {
        let downstream: Vec<Family> = [Family::Relay, Family::UavCompute]
            .into_iter()
            .filter(|&f| has(f))
            .collect();
        links.push(Link {
            upstream: Family::Uplink,
            downstream,
            ratio: 1.0,
        });
    }
    if has(Family::Relay) {
        links.push(Link {
            upstream: Family::Relay,
            downstream: vec![Family::LeoCompute],
            ratio: 1.0,
        });
        links.push(Link {
            upstream: Family::LeoCompute,
            downstream: vec![Family::LeoDownlink],
            ratio: sensor.output_ratio_leo,
        });
    }
    Ok(SensorPlan {
        beta,
        input_bits: input,
        unprocessed_bits: unprocessed.max(0.0),
        families,
        links,
    })
}

/// A fully specified planning instance: mission, scenario, profiles and windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadProblem {
    pub mission: MissionSpec,
    pub kind: ScenarioKind,
    pub access: AccessProfile,
    pub schedule: ScheduleProfile,
    pub plans: Vec<SensorPlan>,
}

impl OffloadProblem {
    /// Builds the instance with the default offloading schedule.
    pub fn new(mission: MissionSpec, kind: ScenarioKind) -> Result<Self> {
        mission.validate()?;
        let access = build_access_profile(kind, &mission);
        let schedule = schedule_offloading(&mission, &access);
        Self::with_schedule(mission, kind, schedule)
    }

    pub fn with_schedule(mission: MissionSpec, kind: ScenarioKind, schedule: ScheduleProfile) -> Result<Self> {
        mission.validate()?;
        if schedule.beta.len() != mission.sensor_count() {
            return Err(Error::DimensionMismatch {
                expected: mission.sensor_count(),
                got: schedule.beta.len(),
            });
        }
        let access = build_access_profile(kind, &mission);
        let plans = (0..mission.sensor_count())
            .map(|k| plan_sensor(&mission, k, kind, schedule.beta[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mission,
            kind,
            access,
            schedule,
            plans,
        })
    }

    pub fn sensor_count(&self) -> usize {
        self.mission.sensor_count()
    }

    pub fn frame_count(&self) -> usize {
        self.mission.frame_count
    }

    /// Fraction of collected bits that get processed by some cloudlet.
    pub fn data_usage_rate(&self) -> f64 {
        let total: f64 = self.plans.iter().map(|p| p.input_bits).sum();
        if total <= 0.0 {
            return 1.0;
        }
        self.plans.iter().map(SensorPlan::processed_bits).sum::<f64>() / total
    }

    pub fn evaluate(&self, z: &DecisionVector) -> Result<EnergyBreakdown> {
        EnergyBreakdown::evaluate(&self.mission, &z.alloc, &z.trajectory)
    }

    pub fn objective(&self, z: &DecisionVector) -> Result<f64> {
        Ok(self.evaluate(z)?.totals.objective)
    }

    /// Residuals of every original constraint, in working units.
    pub fn violations(&self, z: &DecisionVector) -> Result<ViolationReport> {
        let m = &self.mission;
        let n_frames = m.frame_count;
        z.check_dims(self.sensor_count(), n_frames)?;
        let mut r = ViolationReport::default();
        let wp = &z.trajectory.waypoints;
        r.endpoints = (wp[0].horizontal_dist(&m.uav_start))
            .max(wp[n_frames].horizontal_dist(&m.uav_end))
            / scale::POSITION;
        let step = m.max_step_m();
        for n in 0..n_frames {
            let d2 = wp[n].horizontal_sq(&wp[n + 1]);
            r.speed = r.speed.max((d2 - step * step) / (step * step));
        }
        for (k, plan) in self.plans.iter().enumerate() {
            for f in Family::ALL {
                let bits = &f.column(&z.alloc)[k];
                let fp = plan.family(f);
                let mut sum = 0.0;
                for (i, &b) in bits.iter().enumerate() {
                    let inside = fp.is_some_and(|p| p.window.contains(i + 1));
                    if inside {
                        r.nonnegativity = r.nonnegativity.max(-b / scale::BITS);
                        sum += b;
                    } else {
                        r.windows = r.windows.max(b.abs() / scale::BITS);
                    }
                }
                let total = fp.map_or(0.0, |p| p.total_bits);
                r.totals = r.totals.max((sum - total).abs() / scale::BITS);
            }
            for link in &plan.links {
                let up = prefix_sums(&link.upstream.column(&z.alloc)[k]);
                let downs: Vec<Vec<f64>> = link
                    .downstream
                    .iter()
                    .map(|f| prefix_sums(&f.column(&z.alloc)[k]))
                    .collect();
                for n in 0..n_frames {
                    let lhs: f64 = downs.iter().map(|d| d[n + 1]).sum();
                    r.causality = r.causality.max((lhs - link.ratio * up[n]) / scale::BITS);
                }
            }
            if let Some(up) = plan.family(Family::Uplink) {
                for frame in up.window.frames() {
                    let g = sensor_uav_gain(m, k + 1, &wp[frame - 1])?;
                    let bits = z.alloc.uplink_sensor_uav[k][frame - 1].max(0.0);
                    let e = sensor_to_uav_energy(m, bits, g)?;
                    r.budget = r.budget.max((e - m.energy_budget_j) / m.energy_budget_j);
                }
            }
        }
        Ok(r)
    }

    pub fn max_violation(&self, z: &DecisionVector) -> Result<f64> {
        Ok(self.violations(z)?.max())
    }
}

/// `C(0) = 0, C(n) = sum of the first n entries`.
pub fn prefix_sums(bits: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(bits.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for b in bits {
        acc += b;
        out.push(acc);
    }
    out
}

/// Worst residual per constraint group; each is positive only when violated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Relative excess of sensor transmit energy over the per-frame budget.
    pub budget: f64,
    /// Relative excess of squared step length over its limit.
    pub speed: f64,
    pub causality: f64,
    pub nonnegativity: f64,
    pub totals: f64,
    pub windows: f64,
    pub endpoints: f64,
}

impl ViolationReport {
    pub fn max(&self) -> f64 {
        [
            self.budget,
            self.speed,
            self.causality,
            self.nonnegativity,
            self.totals,
            self.windows,
            self.endpoints,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Bits and trajectory of one candidate plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub alloc: BitAllocation,
    pub trajectory: Trajectory,
}

impl DecisionVector {
    /// All bits zero on the constant-velocity path.
    pub fn idle(mission: &MissionSpec) -> Result<Self> {
        Ok(Self {
            alloc: BitAllocation::zeros(mission.sensor_count(), mission.frame_count),
            trajectory: Trajectory {
                waypoints: constant_velocity_path(mission)?,
            },
        })
    }

    pub fn check_dims(&self, sensors: usize, frames: usize) -> Result<()> {
        for f in Family::ALL {
            let col = f.column(&self.alloc);
            if col.len() != sensors {
                return Err(Error::DimensionMismatch {
                    expected: sensors,
                    got: col.len(),
                });
            }
            if let Some(row) = col.iter().find(|r| r.len() != frames) {
                return Err(Error::DimensionMismatch {
                    expected: frames,
                    got: row.len(),
                });
            }
        }
        if self.trajectory.waypoints.len() != frames + 1 {
            return Err(Error::DimensionMismatch {
                expected: frames + 1,
                got: self.trajectory.waypoints.len(),
            });
        }
        Ok(())
    }

    /// Flattened coordinates in working units: every bit family, then waypoints.
    pub fn scaled_coordinates(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for f in Family::ALL {
            for row in f.column(&self.alloc) {
                out.extend(row.iter().map(|b| b / scale::BITS));
            }
        }
        for p in &self.trajectory.waypoints {
            out.push(p.x / scale::POSITION);
            out.push(p.y / scale::POSITION);
        }
        out
    }

    /// `self + gamma * (target - self)`, componentwise.
    pub fn step_toward(&self, target: &DecisionVector, gamma: f64) -> Result<DecisionVector> {
        let sensors = self.alloc.uplink_sensor_uav.len();
        let frames = self.trajectory.waypoints.len().saturating_sub(1);
        target.check_dims(sensors, frames)?;
        let mut out = self.clone();
        for f in Family::ALL {
            let t = f.column(&target.alloc);
            for (row, trow) in f.column_mut(&mut out.alloc).iter_mut().zip(t) {
                for (a, b) in row.iter_mut().zip(trow) {
                    *a += gamma * (b - *a);
                }
            }
        }
        for (p, q) in out.trajectory.waypoints.iter_mut().zip(&target.trajectory.waypoints) {
            p.x += gamma * (q.x - p.x);
            p.y += gamma * (q.y - p.y);
        }
        Ok(out)
    }
}

/// `||z_hat - z||_2` over working-unit coordinates.
pub fn stationarity_residual(z: &DecisionVector, z_hat: &DecisionVector) -> Result<f64> {
    let a = z.scaled_coordinates();
    let b = z_hat.scaled_coordinates();
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}
