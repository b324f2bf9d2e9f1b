//! Builds the inner convex program of one SCA iteration.
//!
//! Bits enter through cumulative sums `C(n)` over each family's window, so
//! totals hold by construction and every term couples at most two adjacent
//! frames. Variables of frame `n` (the sums `C(n)` and waypoint `p_n`) form
//! block `n` of the Hessian.

use super::expr::{Expr, Lin};
use super::program::ConvexProgram;
use crate::energy::{BitAllocation, Trajectory};
use crate::error::{Error, Result};
use crate::mission::Position3;
use crate::plan::{prefix_sums, scale, DecisionVector, Family, OffloadProblem};
use crate::scenario::ScenarioKind;
use crate::surrogate::{
    proximal, surrogate_budget_constraint, surrogate_uav_comp_energy, surrogate_uav_leo_energy, LinkPoint,
    SurrogateParams,
};

/// Which parts of the decision are optimized; the rest stay at the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Freedom {
    pub bits: bool,
    pub trajectory: bool,
}

impl Freedom {
    pub const JOINT: Freedom = Freedom {
        bits: true,
        trajectory: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Var(usize),
    Fixed(f64),
}

impl Slot {
    fn lin(self) -> Lin {
        match self {
            Slot::Var(i) => Lin::var(i, 1.0),
            Slot::Fixed(v) => Lin::constant(v),
        }
    }

    fn value(self, x: &[f64]) -> f64 {
        match self {
            Slot::Var(i) => x[i],
            Slot::Fixed(v) => v,
        }
    }
}

/// An assembled program plus the map back to a decision vector.
#[derive(Debug, Clone)]
pub struct InnerProgram {
    pub program: ConvexProgram,
    /// `cum[k][family][n]` for `n = 0..=N`, in Mbit.
    cum: Vec<Vec<Vec<Slot>>>,
    /// `(x, y)` of waypoints `1..=N+1`, in km.
    waypoints: Vec<(Slot, Slot)>,
    altitude_m: f64,
}

impl InnerProgram {
    pub fn decode(&self, x: &[f64]) -> Result<DecisionVector> {
        self.program.check_dim(x)?;
        let k_count = self.cum.len();
        let n_frames = self.waypoints.len() - 1;
        let mut alloc = BitAllocation::zeros(k_count, n_frames);
        for (k, fams) in self.cum.iter().enumerate() {
            for f in Family::ALL {
                let c = &fams[f.index()];
                let row = &mut f.column_mut(&mut alloc)[k];
                for n in 1..=n_frames {
                    row[n - 1] = (c[n].value(x) - c[n - 1].value(x)) * scale::BITS;
                }
            }
        }
        let waypoints = self
            .waypoints
            .iter()
            .map(|&(px, py)| {
                Position3::new(
                    px.value(x) * scale::POSITION,
                    py.value(x) * scale::POSITION,
                    self.altitude_m,
                )
            })
            .collect();
        Ok(DecisionVector {
            alloc,
            trajectory: Trajectory { waypoints },
        })
    }

    fn bits_lin(&self, k: usize, f: Family, frame: usize) -> Lin {
        let c = &self.cum[k][f.index()];
        c[frame].lin().plus(&c[frame - 1].lin().scaled(-1.0))
    }

    fn pos_lin(&self, n: usize) -> (Lin, Lin) {
        let (x, y) = self.waypoints[n - 1];
        (x.lin(), y.lin())
    }
}

/// Generic assembly shared by all scenarios; windows and families come from
/// the problem's sensor plans.
pub fn assemble(
    problem: &OffloadProblem,
    expansion: &DecisionVector,
    params: &SurrogateParams,
    freedom: Freedom,
) -> Result<InnerProgram> {
    params.validate()?;
    let mission = &problem.mission;
    let n_frames = mission.frame_count;
    let k_count = mission.sensor_count();
    expansion.check_dims(k_count, n_frames)?;

    let mut blocks = Vec::new();
    let mut names = Vec::new();
    let mut start = Vec::new();
    let mut new_var = |block: usize, name: String, value: f64| {
        blocks.push(block);
        names.push(name);
        start.push(value);
        Slot::Var(blocks.len() - 1)
    };

    let mut cum = Vec::with_capacity(k_count);
    for (k, plan) in problem.plans.iter().enumerate() {
        let mut fams = Vec::with_capacity(Family::ALL.len());
        for f in Family::ALL {
            let exp_cum: Vec<f64> = prefix_sums(&f.column(&expansion.alloc)[k])
                .into_iter()
                .map(|v| v / scale::BITS)
                .collect();
            let slots: Vec<Slot> = match plan.family(f) {
                None => vec![Slot::Fixed(0.0); n_frames + 1],
                Some(fp) => {
                    let total = fp.total_bits / scale::BITS;
                    (0..=n_frames)
                        .map(|n| {
                            if n < fp.window.first {
                                Slot::Fixed(0.0)
                            } else if n >= fp.window.last {
                                Slot::Fixed(total)
                            } else if freedom.bits {
                                new_var(n, format!("C[{}][{}][{n}]", k + 1, f.label()), exp_cum[n])
                            } else {
                                Slot::Fixed(exp_cum[n])
                            }
                        })
                        .collect()
                }
            };
            fams.push(slots);
        }
        cum.push(fams);
    }

    let wp = &expansion.trajectory.waypoints;
    let waypoints: Vec<(Slot, Slot)> = (1..=n_frames + 1)
        .map(|n| {
            let p = wp[n - 1];
            let (x, y) = (p.x / scale::POSITION, p.y / scale::POSITION);
            if freedom.trajectory && n > 1 && n <= n_frames {
                (new_var(n, format!("x[{n}]"), x), new_var(n, format!("y[{n}]"), y))
            } else {
                (Slot::Fixed(x), Slot::Fixed(y))
            }
        })
        .collect();

    let program = ConvexProgram::new(blocks, names, start)?;
    let mut inner = InnerProgram {
        program,
        cum,
        waypoints,
        altitude_m: mission.uav_altitude_m,
    };
    let km = |n: usize| (wp[n - 1].x / scale::POSITION, wp[n - 1].y / scale::POSITION);
    let exp_bits = |k: usize, f: Family, n: usize| f.column(&expansion.alloc)[k][n - 1] / scale::BITS;

    let mut objective = Vec::new();
    let mut constraints: Vec<(Expr, String)> = Vec::new();

    for (k, plan) in problem.plans.iter().enumerate() {
        for (f, fp) in plan.active_families() {
            for n in fp.window.frames() {
                let bits = inner.bits_lin(k, f, n);
                constraints.push((Expr::Lin(bits.clone().scaled(-1.0)), format!("bits[{}][{}][{n}] >= 0", k + 1, f.label())));
                match f {
                    Family::Relay => {
                        let (x, y) = inner.pos_lin(n);
                        let (px, py) = km(n);
                        let at = LinkPoint {
                            bits: exp_bits(k, f, n),
                            x: px,
                            y: py,
                        };
                        objective.push(surrogate_uav_leo_energy(
                            mission,
                            n,
                            &bits,
                            &x,
                            &y,
                            at,
                            params.tau_relay,
                            0.0,
                            0.0,
                        )?);
                    }
                    Family::UavCompute => {}
                    _ => {
                        if !bits.is_constant() {
                            objective.push(proximal(&bits, exp_bits(k, f, n), params.tau_pipeline));
                        }
                    }
                }
                if f == Family::Uplink {
                    let (x, y) = inner.pos_lin(n);
                    let (px, py) = km(n);
                    let at = LinkPoint {
                        bits: exp_bits(k, f, n),
                        x: px,
                        y: py,
                    };
                    constraints.push((
                        surrogate_budget_constraint(mission, k, &bits, &x, &y, at, params.budget_balance_floor),
                        format!("budget[{}][{n}]", k + 1),
                    ));
                }
            }
        }
        for link in &plan.links {
            let up = &inner.cum[k][link.upstream.index()];
            for n in 0..n_frames {
                let mut row = up[n].lin().scaled(-link.ratio);
                for d in &link.downstream {
                    row = row.plus(&inner.cum[k][d.index()][n + 1].lin());
                }
                constraints.push((
                    Expr::Lin(row),
                    format!("causality[{}][{}->{}][{n}]", k + 1, link.upstream.label(), link.downstream[0].label()),
                ));
            }
        }
    }

    for n in 1..=n_frames {
        let active: Vec<usize> = (0..k_count)
            .filter(|&k| {
                problem.plans[k]
                    .family(Family::UavCompute)
                    .is_some_and(|fp| fp.window.contains(n))
            })
            .collect();
        if active.is_empty() {
            continue;
        }
        let bits: Vec<Lin> = (0..k_count).map(|k| inner.bits_lin(k, Family::UavCompute, n)).collect();
        let at: Vec<f64> = (0..k_count).map(|k| exp_bits(k, Family::UavCompute, n)).collect();
        objective.push(surrogate_uav_comp_energy(mission, &bits, &at, params.tau_uav_compute)?);
    }

    let fly = mission.flying_coefficient() * scale::POSITION * scale::POSITION
        / (mission.frame_s * mission.frame_s)
        / scale::ENERGY;
    let step = mission.max_step_m() / scale::POSITION;
    for n in 1..=n_frames {
        let (x0, y0) = inner.pos_lin(n);
        let (x1, y1) = inner.pos_lin(n + 1);
        let dx = x1.plus(&x0.scaled(-1.0));
        let dy = y1.plus(&y0.scaled(-1.0));
        objective.push(Expr::Sum(vec![
            Expr::Square {
                weight: fly,
                arg: dx.clone(),
            },
            Expr::Square {
                weight: fly,
                arg: dy.clone(),
            },
        ]));
        let w = 1.0 / (step * step);
        constraints.push((
            Expr::Sum(vec![
                Expr::Square { weight: w, arg: dx },
                Expr::Square { weight: w, arg: dy },
                Expr::Lin(Lin::constant(-1.0)),
            ]),
            format!("speed[{n}]"),
        ));
    }
    if freedom.trajectory {
        for n in 2..=n_frames {
            let (x, y) = inner.pos_lin(n);
            let (px, py) = km(n);
            objective.push(proximal(&x, px, params.tau_x));
            objective.push(proximal(&y, py, params.tau_y));
        }
    }

    for e in objective {
        inner.program.add_objective(e)?;
    }
    for (e, label) in constraints {
        inner.program.add_constraint(e, label)?;
    }
    Ok(inner)
}

fn require(problem: &OffloadProblem, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid("scenario", format!("expected {what}, got {}", problem.kind.label())))
    }
}

pub fn assemble_always_on(
    problem: &OffloadProblem,
    expansion: &DecisionVector,
    params: &SurrogateParams,
    freedom: Freedom,
) -> Result<InnerProgram> {
    require(problem, problem.kind == ScenarioKind::AlwaysOn, "always_on")?;
    assemble(problem, expansion, params, freedom)
}

pub fn assemble_always_off(
    problem: &OffloadProblem,
    expansion: &DecisionVector,
    params: &SurrogateParams,
    freedom: Freedom,
) -> Result<InnerProgram> {
    require(problem, problem.kind == ScenarioKind::AlwaysOff, "always_off")?;
    assemble(problem, expansion, params, freedom)
}

pub fn assemble_intermediate(
    problem: &OffloadProblem,
    expansion: &DecisionVector,
    params: &SurrogateParams,
    freedom: Freedom,
) -> Result<InnerProgram> {
    let ok = matches!(problem.kind, ScenarioKind::Intermediate { connected_frames }
        if connected_frames > 0 && connected_frames < problem.frame_count());
    require(problem, ok, "intermediate with 0 < N_t < N")?;
    assemble(problem, expansion, params, freedom)
}

/// Dispatches on the problem's scenario.
pub fn assemble_for(
    problem: &OffloadProblem,
    expansion: &DecisionVector,
    params: &SurrogateParams,
    freedom: Freedom,
) -> Result<InnerProgram> {
    match problem.kind {
        ScenarioKind::AlwaysOn => assemble_always_on(problem, expansion, params, freedom),
        ScenarioKind::AlwaysOff => assemble_always_off(problem, expansion, params, freedom),
        ScenarioKind::Intermediate { .. } => assemble_intermediate(problem, expansion, params, freedom),
    }
}
