use serde::{Deserialize, Serialize};

use super::program::{scatter_grad, ConvexProgram};
use crate::error::{Error, Result};

/// Largest residual of each KKT block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    /// `|grad f + sum lambda_i grad c_i|_inf`
    pub stationarity: f64,
    /// `max(0, max c_i)`
    pub primal: f64,
    /// `max(0, -min lambda_i)`
    pub dual: f64,
    /// `max |lambda_i c_i|`
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

/// Rows within this distance of zero take part in multiplier estimation.
const NEAR_ACTIVE: f64 = 1e-6;

/// KKT residuals at `x`. Without multipliers, nonnegative least-squares
/// estimates are fitted on the near-active rows.
pub fn check_kkt(program: &ConvexProgram, x: &[f64], multipliers: Option<&[f64]>) -> Result<KktReport> {
    program.check_dim(x)?;
    let m = program.constraint_count();
    let c = program.constraint_values(x);
    let grads: Vec<Vec<f64>> = (0..m).map(|i| program.constraint_gradient(i, x)).collect();
    let g = program.objective_gradient(x);
    let lambda = match multipliers {
        Some(l) => {
            if l.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: l.len() });
            }
            l.to_vec()
        }
        None => estimate_multipliers(program, &g, &c, &grads),
    };
    let mut r = g;
    for (i, gi) in grads.iter().enumerate() {
        if lambda[i] != 0.0 {
            for (&j, v) in program.constraints()[i].term.support.iter().zip(gi) {
                r[j] += lambda[i] * v;
            }
        }
    }
    Ok(KktReport {
        stationarity: r.iter().fold(0.0, |a, v| a.max(v.abs())),
        primal: c.iter().fold(0.0, |a, &v| a.max(v)),
        dual: lambda.iter().fold(0.0, |a, &v| a.max(-v)),
        complementarity: lambda.iter().zip(&c).fold(0.0, |a, (l, c)| a.max((l * c).abs())),
    })
}

/// Cyclic coordinate descent on `min_{lambda >= 0} |g + J_A^T lambda|^2`.
fn estimate_multipliers(program: &ConvexProgram, g: &[f64], c: &[f64], grads: &[Vec<f64>]) -> Vec<f64> {
    let active: Vec<usize> = (0..c.len()).filter(|&i| c[i] >= -NEAR_ACTIVE).collect();
    let mut lambda = vec![0.0; c.len()];
    if active.is_empty() {
        return lambda;
    }
    let rows = program.constraints();
    let mut r = g.to_vec();
    let norms: Vec<f64> = active.iter().map(|&i| grads[i].iter().map(|v| v * v).sum()).collect();
    for _sweep in 0..2000 {
        let mut change: f64 = 0.0;
        for (a, &i) in active.iter().enumerate() {
            if norms[a] == 0.0 {
                continue;
            }
            let sup = &rows[i].term.support;
            let dot: f64 = sup.iter().zip(&grads[i]).map(|(&j, v)| r[j] * v).sum();
            let new = (lambda[i] - dot / norms[a]).max(0.0);
            let d = new - lambda[i];
            if d != 0.0 {
                for (&j, v) in sup.iter().zip(&grads[i]) {
                    r[j] += d * v;
                }
                lambda[i] = new;
                change = change.max(d.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    lambda
}

/// Gradient of the Lagrangian; used by the solver's termination test.
pub(crate) fn lagrangian_gradient(program: &ConvexProgram, x: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut g = program.objective_gradient(x);
    for (c, &l) in program.constraints().iter().zip(lambda) {
        if l != 0.0 {
            scatter_grad(&c.term, x, l, &mut g);
        }
    }
    g
}
