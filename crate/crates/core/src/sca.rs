//! Successive convex approximation driver shared by all scenarios.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::convex::assemble::{assemble_for, Freedom};
use crate::convex::{solve_convex, SolveStatus, SolverOptions};
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::init::feasible_initialization;
use crate::plan::{stationarity_residual, DecisionVector, OffloadProblem};
use crate::surrogate::SurrogateParams;

/// Diminishing step `gamma(v) = gamma0 / (1 + decay * v)` and stop test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub stationarity_tol: f64,
    pub max_outer_iterations: usize,
    pub gamma0: f64,
    pub decay: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-4,
            max_outer_iterations: 500,
            gamma0: 1.0,
            decay: 0.1,
        }
    }
}

impl StoppingRule {
    pub fn gamma(&self, v: usize) -> f64 {
        self.gamma0 / (1.0 + self.decay * v as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stationarity_tol > 0.0) {
            return Err(Error::invalid("stationarity_tol", "must be > 0"));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::invalid("gamma0", "must lie in (0, 1]"));
        }
        if !(self.decay >= 0.0) {
            return Err(Error::invalid("decay", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    pub stopping: StoppingRule,
    pub solver: SolverOptions,
    pub surrogate: SurrogateParams,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            stopping: StoppingRule::default(),
            solver: SolverOptions {
                kkt_tolerance: 1e-10,
                complementarity_tolerance: 1e-15,
                max_iterations: 300,
                ..SolverOptions::default()
            },
            surrogate: SurrogateParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub v: usize,
    /// Objective at `z(v)`, joules.
    pub objective_j: f64,
    /// `||z_hat(z(v)) - z(v)||`.
    pub residual: f64,
    pub gamma: f64,
    pub inner_status: SolveStatus,
    /// Worst original-constraint residual at `z(v)`.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterateTrace {
    pub rows: Vec<TraceRow>,
}

impl IterateTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("v,objective_J,residual,gamma,inner_status,max_violation\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.9e},{:.9e},{:.9e},{},{:.9e}",
                r.v,
                r.objective_j,
                r.residual,
                r.gamma,
                r.inner_status.label(),
                r.max_violation
            );
        }
        s
    }

    /// Smallest objective seen up to each iteration.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.min(r.objective_j);
                best
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaOutcome {
    /// Lowest-objective iterate.
    pub decision: DecisionVector,
    pub breakdown: EnergyBreakdown,
    pub trace: IterateTrace,
    pub termination: Termination,
    pub iterations: usize,
}

/// One surrogate solve and convex-combination step from `z`.
pub fn sca_step(
    problem: &OffloadProblem,
    z: &DecisionVector,
    v: usize,
    freedom: Freedom,
    options: &ScaOptions,
) -> Result<(DecisionVector, TraceRow)> {
    let (z_hat, status) = surrogate_minimizer(problem, z, freedom, options)?;
    let residual = stationarity_residual(z, &z_hat)?;
    let gamma = options.stopping.gamma(v);
    let row = TraceRow {
        v,
        objective_j: problem.objective(z)?,
        residual,
        gamma,
        inner_status: status,
        max_violation: problem.max_violation(z)?,
    };
    Ok((z.step_toward(&z_hat, gamma)?, row))
}

/// Minimizer of the inner program built at `z`.
pub fn surrogate_minimizer(
    problem: &OffloadProblem,
    z: &DecisionVector,
    freedom: Freedom,
    options: &ScaOptions,
) -> Result<(DecisionVector, SolveStatus)> {
    let inner = assemble_for(problem, z, &options.surrogate, freedom)?;
    let result = solve_convex(&inner.program, &options.solver)?;
    if result.status == SolveStatus::NumericalFailure {
        return Err(Error::NumericalFailure(format!(
            "inner solve failed after {} iterations (KKT residual {:.3e})",
            result.iterations, result.residual
        )));
    }
    Ok((inner.decode(&result.x)?, result.status))
}

/// Joint optimization from the feasible initializer.
pub fn run(problem: &OffloadProblem, options: &ScaOptions) -> Result<ScaOutcome> {
    let z0 = feasible_initialization(problem)?;
    run_from(problem, z0, Freedom::JOINT, options)
}

/// SCA iterations from `z0`, optimizing the parts selected by `freedom`.
pub fn run_from(
    problem: &OffloadProblem,
    z0: DecisionVector,
    freedom: Freedom,
    options: &ScaOptions,
) -> Result<ScaOutcome> {
    options.stopping.validate()?;
    let mut z = z0;
    let mut best = (problem.objective(&z)?, z.clone());
    let mut trace = IterateTrace::default();
    let mut termination = Termination::IterationLimit;
    let mut iterations = 0;
    if !freedom.bits && !freedom.trajectory {
        termination = Termination::Converged;
    }
    while termination == Termination::IterationLimit && iterations < options.stopping.max_outer_iterations {
        let v = iterations;
        let step = sca_step(problem, &z, v, freedom, options);
        let (next, row) = match step {
            Ok(s) => s,
            Err(Error::NumericalFailure(_)) => {
                termination = Termination::NumericalFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        let converged = row.residual <= options.stopping.stationarity_tol;
        trace.rows.push(row);
        if converged {
            termination = Termination::Converged;
            break;
        }
        z = next;
        let obj = problem.objective(&z)?;
        if obj < best.0 {
            best = (obj, z.clone());
        }
    }
    let breakdown = problem.evaluate(&best.1)?;
    Ok(ScaOutcome {
        decision: best.1,
        breakdown,
        trace,
        termination,
        iterations,
    })
}
