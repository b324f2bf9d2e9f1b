//! Reference schemes: no optimization, bits only, trajectory only, and the
//! joint optimization they are compared against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::convex::assemble::Freedom;
use crate::error::{Error, Result};
use crate::init::feasible_initialization;
use crate::mission::MissionSpec;
use crate::plan::OffloadProblem;
use crate::sca::{run_from, IterateTrace, ScaOptions, ScaOutcome, Termination};
use crate::scenario::ScenarioKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Joint,
    TrajectoryOnly,
    BitOnly,
    None,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Joint, Scheme::TrajectoryOnly, Scheme::BitOnly, Scheme::None];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Joint => "joint",
            Scheme::TrajectoryOnly => "trajectory_only",
            Scheme::BitOnly => "bit_only",
            Scheme::None => "none",
        }
    }

    /// Which parts of the decision the scheme optimizes.
    pub fn freedom(self) -> Freedom {
        match self {
            Scheme::Joint => Freedom::JOINT,
            Scheme::TrajectoryOnly => Freedom {
                bits: false,
                trajectory: true,
            },
            Scheme::BitOnly => Freedom {
                bits: true,
                trajectory: false,
            },
            Scheme::None => Freedom {
                bits: false,
                trajectory: false,
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::invalid("scheme", format!("unknown scheme `{s}` (joint, trajectory_only, bit_only, none)")))
    }
}

/// Runs `scheme` from the shared feasible start, so every scheme sees the
/// same fixed bits or fixed path.
pub fn run_scheme(problem: &OffloadProblem, scheme: Scheme, options: &ScaOptions) -> Result<ScaOutcome> {
    let z0 = feasible_initialization(problem)?;
    if scheme == Scheme::None {
        let breakdown = problem.evaluate(&z0)?;
        return Ok(ScaOutcome {
            decision: z0,
            breakdown,
            trace: IterateTrace::default(),
            termination: Termination::Converged,
            iterations: 0,
        });
    }
    run_from(problem, z0, scheme.freedom(), options)
}

/// Constant-velocity path with evenly spread (budget-repaired) bits.
pub fn run_no_optimization(mission: &MissionSpec, kind: ScenarioKind) -> Result<ScaOutcome> {
    let problem = OffloadProblem::new(mission.clone(), kind)?;
    run_scheme(&problem, Scheme::None, &ScaOptions::default())
}

/// Bits optimized on the constant-velocity path.
pub fn run_bit_only(mission: &MissionSpec, kind: ScenarioKind, options: &ScaOptions) -> Result<ScaOutcome> {
    let problem = OffloadProblem::new(mission.clone(), kind)?;
    run_scheme(&problem, Scheme::BitOnly, options)
}

/// Path optimized with the bits of the no-optimization scheme held fixed.
pub fn run_trajectory_only(mission: &MissionSpec, kind: ScenarioKind, options: &ScaOptions) -> Result<ScaOutcome> {
    let problem = OffloadProblem::new(mission.clone(), kind)?;
    run_scheme(&problem, Scheme::TrajectoryOnly, options)
}
