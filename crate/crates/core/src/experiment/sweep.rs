use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::deploy::generate_mission;
use super::run::run_mission;
use crate::baselines::Scheme;
use crate::error::{Error, Result};
use crate::mission::MissionSpec;
use crate::sca::Termination;
use crate::scenario::ScenarioKind;

/// The three access scenarios compared per horizon. The intermediate one
/// loses the LEO halfway through the mission.
pub fn latency_scenarios(frames: usize) -> [ScenarioKind; 3] {
    [
        ScenarioKind::AlwaysOn,
        ScenarioKind::AlwaysOff,
        ScenarioKind::Intermediate {
            connected_frames: frames / 2,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub scheme: Scheme,
    /// `always_on`, `always_off` or `intermediate`.
    pub scenario: String,
    pub total_time_s: f64,
    pub frames: usize,
    /// `None` when the cell failed; see `error`.
    pub total_energy_j: Option<f64>,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessRow {
    pub fraction: f64,
    pub connected_frames: usize,
    pub scenario: String,
    pub total_energy_j: Option<f64>,
    pub data_usage_rate: Option<f64>,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

fn scenario_family(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::AlwaysOn => "always_on",
        ScenarioKind::AlwaysOff => "always_off",
        ScenarioKind::Intermediate { .. } => "intermediate",
    }
}

/// `mission` stretched to `total_time_s`, with the same sensors and loads.
pub fn retime(cfg: &ExperimentConfig, mission: &MissionSpec, total_time_s: f64) -> Result<MissionSpec> {
    let m = mission.with_timing(total_time_s, &cfg.leo_track())?;
    m.validate()?;
    Ok(m)
}

/// Every scheme and scenario at every horizon in `horizons_s`, on the
/// deployment drawn for the configured horizon. Failed cells are recorded
/// and the sweep continues.
pub fn fig7_sweep(cfg: &ExperimentConfig, horizons_s: &[f64]) -> Result<Vec<LatencyRow>> {
    fig7_sweep_schemes(cfg, horizons_s, &Scheme::ALL)
}

pub fn fig7_sweep_schemes(cfg: &ExperimentConfig, horizons_s: &[f64], schemes: &[Scheme]) -> Result<Vec<LatencyRow>> {
    cfg.validate()?;
    let base = generate_mission(cfg, cfg.seed)?;
    let options = cfg.sca_options();
    let mut rows = Vec::new();
    for &t in horizons_s {
        let mission = retime(cfg, &base, t);
        let frames = mission.as_ref().map_or(0, |m| m.frame_count);
        for &scheme in schemes {
            for kind in latency_scenarios(frames) {
                let mut row = LatencyRow {
                    scheme,
                    scenario: scenario_family(kind).into(),
                    total_time_s: t,
                    frames,
                    total_energy_j: None,
                    termination: None,
                    error: None,
                };
                match &mission {
                    Ok(m) => match run_mission(m, kind, scheme, &options, cfg.seed) {
                        Ok(b) => {
                            row.total_energy_j = Some(b.total_energy_j());
                            row.termination = Some(b.termination);
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    },
                    Err(e) => row.error = Some(e.to_string()),
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Scenario for an access fraction: the endpoints are the always-off and
/// always-on cases, anything between keeps the LEO for `round(f N)` frames.
pub fn access_scenario(fraction: f64, frames: usize) -> Result<ScenarioKind> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("access_fractions", format!("{fraction} is outside [0, 1]")));
    }
    let nt = (fraction * frames as f64).round() as usize;
    Ok(if nt == 0 {
        ScenarioKind::AlwaysOff
    } else if nt >= frames {
        ScenarioKind::AlwaysOn
    } else {
        ScenarioKind::Intermediate { connected_frames: nt }
    })
}

/// Energy and data usage as the LEO access fraction grows.
pub fn fig8_tradeoff(cfg: &ExperimentConfig, fractions: &[f64]) -> Result<Vec<AccessRow>> {
    cfg.validate()?;
    let mission = generate_mission(cfg, cfg.seed)?;
    let options = cfg.sca_options();
    let n = mission.frame_count;
    let mut rows = Vec::new();
    for &f in fractions {
        let kind = access_scenario(f, n)?;
        let mut row = AccessRow {
            fraction: f,
            connected_frames: kind.connected_frames(n),
            scenario: scenario_family(kind).into(),
            total_energy_j: None,
            data_usage_rate: None,
            termination: None,
            error: None,
        };
        match run_mission(&mission, kind, cfg.scheme, &options, cfg.seed) {
            Ok(b) => {
                row.total_energy_j = Some(b.total_energy_j());
                row.data_usage_rate = Some(b.data_usage_rate);
                row.termination = Some(b.termination);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.8e}"))
}

fn termination_label(t: Option<Termination>) -> &'static str {
    match t {
        Some(Termination::Converged) => "converged",
        Some(Termination::IterationLimit) => "iteration_limit",
        Some(Termination::NumericalFailure) => "numerical_failure",
        None => "",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn latency_csv(rows: &[LatencyRow]) -> String {
    let mut s = String::from("scheme,scenario,total_time_s,frames,total_energy_J,termination,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.scheme,
            r.scenario,
            r.total_time_s,
            r.frames,
            opt(r.total_energy_j),
            termination_label(r.termination),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    s
}

pub fn access_csv(rows: &[AccessRow]) -> String {
    let mut s = String::from("fraction,connected_frames,scenario,total_energy_J,data_usage_rate,termination,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.fraction,
            r.connected_frames,
            r.scenario,
            opt(r.total_energy_j),
            opt(r.data_usage_rate),
            termination_label(r.termination),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    s
}
