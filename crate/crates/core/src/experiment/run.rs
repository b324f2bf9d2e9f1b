use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::deploy::generate_mission;
use crate::baselines::{run_scheme, Scheme};
use crate::energy::EnergyBreakdown;
use crate::error::Result;
use crate::mission::MissionSpec;
use crate::plan::{DecisionVector, OffloadProblem};
use crate::sca::{IterateTrace, ScaOptions, Termination};
use crate::scenario::ScenarioKind;

/// Everything one run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub seed: u64,
    pub scheme: Scheme,
    pub scenario: ScenarioKind,
    pub mission: MissionSpec,
    pub beta: Vec<bool>,
    pub decision: DecisionVector,
    pub breakdown: EnergyBreakdown,
    pub trace: IterateTrace,
    pub termination: Termination,
    pub iterations: usize,
    pub data_usage_rate: f64,
    pub max_violation: f64,
    /// Wall-clock seconds; informational and never exported.
    pub runtime_s: f64,
}

impl ResultBundle {
    /// Objective of the optimization, joules.
    pub fn total_energy_j(&self) -> f64 {
        self.breakdown.totals.objective
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.trace.rows.last().map(|r| r.residual)
    }
}

/// Solves one mission under one scheme.
pub fn run_mission(
    mission: &MissionSpec,
    kind: ScenarioKind,
    scheme: Scheme,
    options: &ScaOptions,
    seed: u64,
) -> Result<ResultBundle> {
    let start = Instant::now();
    let problem = OffloadProblem::new(mission.clone(), kind)?;
    let out = run_scheme(&problem, scheme, options)?;
    let max_violation = problem.max_violation(&out.decision)?;
    Ok(ResultBundle {
        seed,
        scheme,
        scenario: kind,
        mission: problem.mission.clone(),
        beta: problem.schedule.beta.clone(),
        decision: out.decision,
        breakdown: out.breakdown,
        trace: out.trace,
        termination: out.termination,
        iterations: out.iterations,
        data_usage_rate: problem.data_usage_rate(),
        max_violation,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Deployment from the configured seed, then the configured scheme and
/// scenario.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let mission = generate_mission(cfg, cfg.seed)?;
    let kind = cfg.scenario_kind(&mission)?;
    run_mission(&mission, kind, cfg.scheme, &cfg.sca_options(), cfg.seed)
}
