//! Feasible primal-dual interior-point method.
//!
//! Slacks are kept equal to `-c(x)` so every iterate is strictly feasible;
//! the primal step is a Newton step on the log-barrier function, globalized
//! by backtracking, and the multipliers follow the primal-dual update.

use serde::{Deserialize, Serialize};

use super::blocktri::BlockTri;
use super::kkt::{check_kkt, lagrangian_gradient, KktReport};
use super::program::ConvexProgram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on stationarity and feasibility, in working units.
    pub kkt_tolerance: f64,
    /// Bound on `max |lambda_i c_i|`. Degenerate active rows leave the
    /// iterate roughly `sqrt(mu / curvature)` off the boundary, so this is
    /// usually set well below `kkt_tolerance`.
    pub complementarity_tolerance: f64,
    pub max_iterations: usize,
    /// Barrier reduction per iteration.
    pub centering: f64,
    /// Fraction-to-boundary factor.
    pub boundary_fraction: f64,
    /// Barrier parameter of the first iteration.
    pub initial_barrier: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-6,
            complementarity_tolerance: 1e-6,
            max_iterations: 200,
            centering: 0.1,
            boundary_fraction: 0.995,
            initial_barrier: 1e-2,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::invalid("kkt_tolerance", "must be > 0"));
        }
        if !(self.complementarity_tolerance > 0.0) {
            return Err(Error::invalid("complementarity_tolerance", "must be > 0"));
        }
        if !(self.centering > 0.0 && self.centering < 1.0) {
            return Err(Error::invalid("centering", "must lie in (0, 1)"));
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return Err(Error::invalid("boundary_fraction", "must lie in (0, 1)"));
        }
        if !(self.initial_barrier > 0.0) {
            return Err(Error::invalid("initial_barrier", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt: KktReport,
    pub residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Keeps multipliers within this factor of the central-path value `mu / s`.
const CENTRAL_SPREAD: f64 = 1e10;
const ARMIJO: f64 = 1e-4;
/// Largest start residual accepted as rounding on a boundary.
const START_TOLERANCE: f64 = 1e-9;
/// Slack given to rows that start on the boundary.
const START_SLACK: f64 = 1e-12;

fn barrier(program: &ConvexProgram, x: &[f64], mu: f64, shift: &[f64]) -> Option<(f64, Vec<f64>)> {
    let mut c = program.constraint_values(x);
    c.iter_mut().zip(shift).for_each(|(v, s)| *v -= s);
    let mut log_sum = 0.0;
    for &v in &c {
        if !(v < 0.0) {
            return None;
        }
        log_sum += (-v).ln();
    }
    let f = program.objective_value(x);
    let phi = f - mu * log_sum;
    phi.is_finite().then_some((phi, c))
}

/// Minimizes the program from its stored start point, which must be strictly
/// interior.
pub fn solve_convex(program: &ConvexProgram, options: &SolverOptions) -> Result<SolverResult> {
    options.validate()?;
    let n = program.dim();
    let m = program.constraint_count();
    let mut x = program.start().to_vec();
    let c0 = program.constraint_values(&x);
    if let Some((i, v)) = c0.iter().enumerate().find(|(_, &v)| !(v <= START_TOLERANCE)) {
        return Err(Error::Infeasible(format!(
            "start point violates `{}` by {v:.3e}",
            program.constraints()[i].label
        )));
    }
    // Rows at (or within rounding of) the boundary are relaxed by a tiny
    // slack so the barrier is defined at the start.
    let shift: Vec<f64> = c0
        .iter()
        .map(|&v| if v > -START_SLACK { v.max(0.0) + START_SLACK } else { 0.0 })
        .collect();
    let mut c: Vec<f64> = c0.iter().zip(&shift).map(|(v, s)| v - s).collect();
    let mut lambda: Vec<f64> = c.iter().map(|&v| options.initial_barrier / -v).collect();
    let mut hess = BlockTri::zeros(program.block_sizes());
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    let tol = options.kkt_tolerance;
    let comp_tol = options.complementarity_tolerance;

    for it in 0..=options.max_iterations {
        iterations = it;
        let grad_l = lagrangian_gradient(program, &x, &lambda);
        let stat = grad_l.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let comp = lambda.iter().zip(&c).fold(0.0f64, |a, (l, v)| a.max(-l * v));
        if stat <= tol && comp <= comp_tol {
            status = SolveStatus::Optimal;
            break;
        }
        if it == options.max_iterations {
            break;
        }
        let mu_avg = if m > 0 {
            lambda.iter().zip(&c).map(|(l, v)| -l * v).sum::<f64>() / m as f64
        } else {
            0.0
        };
        let mu = (options.centering * mu_avg).max(0.01 * comp_tol);

        // Newton system on the barrier: (H_L + J^T S^-1 Lambda J) dx = -grad phi.
        hess.clear();
        for t in program.objective_terms() {
            program.add_term_hessian(t, &x, 1.0, &mut hess);
        }
        let mut rhs = program.objective_gradient(&x);
        let mut grads = Vec::with_capacity(m);
        for (i, row) in program.constraints().iter().enumerate() {
            let s = -c[i];
            if !row.linear {
                program.add_term_hessian(&row.term, &x, lambda[i], &mut hess);
            }
            let g = program.constraint_gradient(i, &x);
            let w = lambda[i] / s;
            let sup = &row.term.support;
            for (a, &p) in sup.iter().enumerate() {
                rhs[p] += mu / s * g[a];
                for (b, &q) in sup.iter().enumerate() {
                    hess.add(program.coord(p), program.coord(q), w * g[a] * g[b]);
                }
            }
            grads.push(g);
        }
        rhs.iter_mut().for_each(|v| *v = -*v);
        let Some(dx) = regularized_solve(&mut hess, &program.to_block_order(&rhs)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let dx = program.from_block_order(&dx);
        let slope: f64 = -rhs.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();

        let mut ds = vec![0.0; m];
        let mut dl = vec![0.0; m];
        for (i, row) in program.constraints().iter().enumerate() {
            let s = -c[i];
            let jdx: f64 = row.term.support.iter().zip(&grads[i]).map(|(&p, g)| g * dx[p]).sum();
            ds[i] = -jdx;
            dl[i] = mu / s - lambda[i] - lambda[i] / s * ds[i];
        }
        let frac = options.boundary_fraction;
        let mut alpha = 1.0f64;
        for i in 0..m {
            if ds[i] < 0.0 {
                alpha = alpha.min(frac * -c[i] / -ds[i]);
            }
        }
        let mut alpha_d = 1.0f64;
        for i in 0..m {
            if dl[i] < 0.0 {
                alpha_d = alpha_d.min(frac * lambda[i] / -dl[i]);
            }
        }

        let Some((phi0, _)) = barrier(program, &x, mu, &shift) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let mut accepted = None;
        while alpha > 1e-16 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + alpha * d).collect();
            if let Some((phi, ct)) = barrier(program, &xt, mu, &shift) {
                if phi <= phi0 + ARMIJO * alpha * slope.min(0.0) || slope.abs() <= 1e-300 {
                    accepted = Some((xt, ct));
                    break;
                }
                // Near convergence the barrier difference is dominated by rounding.
                if (phi - phi0).abs() <= 1e-14 * phi0.abs().max(1.0) && alpha < 1e-3 {
                    accepted = Some((xt, ct));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xt, ct)) = accepted else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        x = xt;
        c = ct;
        for i in 0..m {
            let s = -c[i];
            let l = lambda[i] + alpha_d * dl[i];
            let central = mu / s;
            lambda[i] = l.clamp(central / CENTRAL_SPREAD, central * CENTRAL_SPREAD);
        }
        if x.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
    }

    let _ = n;
    let kkt = check_kkt(program, &x, Some(&lambda))?;
    let residual = kkt.max();
    let within = kkt.stationarity.max(kkt.primal).max(kkt.dual) <= tol && kkt.complementarity <= comp_tol;
    if status == SolveStatus::Optimal && !within {
        status = SolveStatus::IterationLimit;
    }
    Ok(SolverResult {
        objective: program.objective_value(&x),
        x,
        multipliers: lambda,
        kkt,
        residual,
        status,
        iterations,
    })
}

/// Solves `M d = rhs`, shifting the diagonal when `M` is not numerically
/// positive definite.
fn regularized_solve(m: &mut BlockTri, rhs: &[f64]) -> Option<Vec<f64>> {
    if let Some(f) = m.factor() {
        return Some(f.solve(rhs));
    }
    let base = m.max_abs_diagonal().max(1.0);
    let mut delta = 1e-12 * base;
    let mut applied = 0.0;
    for _ in 0..12 {
        m.add_diagonal(delta - applied);
        applied = delta;
        if let Some(f) = m.factor() {
            return Some(f.solve(rhs));
        }
        delta *= 100.0;
    }
    None
}
