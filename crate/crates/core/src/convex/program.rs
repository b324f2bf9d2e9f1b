use std::fmt::Write as _;

use super::blocktri::BlockTri;
use super::expr::Expr;
use crate::error::{Error, Result};

/// A smooth term with its variable support cached.
#[derive(Debug, Clone)]
pub struct Term {
    pub expr: Expr,
    pub support: Vec<usize>,
}

impl Term {
    fn new(expr: Expr) -> Self {
        let support = expr.support();
        Self { expr, support }
    }
}

/// Inequality `expr(x) <= 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub term: Term,
    pub linear: bool,
    pub label: String,
}

/// Smooth convex program `min sum f_j(x) s.t. c_i(x) <= 0` whose Hessian is
/// block-tridiagonal: every term may only touch variables of two adjacent
/// blocks.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    var_block: Vec<usize>,
    var_pos: Vec<usize>,
    /// Position of each variable in block-major order.
    block_order: Vec<usize>,
    block_sizes: Vec<usize>,
    var_names: Vec<String>,
    objective: Vec<Term>,
    constraints: Vec<Constraint>,
    start: Vec<f64>,
}

impl ConvexProgram {
    /// Declares variables by block; `names` label them in diagnostics.
    pub fn new(var_block: Vec<usize>, var_names: Vec<String>, start: Vec<f64>) -> Result<Self> {
        if var_names.len() != var_block.len() {
            return Err(Error::DimensionMismatch {
                expected: var_block.len(),
                got: var_names.len(),
            });
        }
        if start.len() != var_block.len() {
            return Err(Error::DimensionMismatch {
                expected: var_block.len(),
                got: start.len(),
            });
        }
        let blocks = var_block.iter().map(|b| b + 1).max().unwrap_or(0);
        let mut block_sizes = vec![0; blocks];
        let var_pos = var_block
            .iter()
            .map(|&b| {
                block_sizes[b] += 1;
                block_sizes[b] - 1
            })
            .collect();
        let mut offsets = vec![0; blocks];
        for b in 1..blocks {
            offsets[b] = offsets[b - 1] + block_sizes[b - 1];
        }
        let block_order = var_block
            .iter()
            .zip(&var_pos)
            .map(|(&b, &p): (&usize, &usize)| offsets[b] + p)
            .collect();
        Ok(Self {
            var_block,
            var_pos,
            block_order,
            block_sizes,
            var_names,
            objective: Vec::new(),
            constraints: Vec::new(),
            start,
        })
    }

    /// Single-block program; convenient for small dense problems.
    pub fn dense(n: usize, start: Vec<f64>) -> Result<Self> {
        Self::new(vec![0; n], (0..n).map(|i| format!("x{i}")).collect(), start)
    }

    fn check_support(&self, support: &[usize]) -> Result<()> {
        if let Some(&i) = support.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::IndexOutOfRange {
                what: "variable",
                index: i,
                max: self.dim(),
            });
        }
        let lo = support.iter().map(|&i| self.var_block[i]).min().unwrap_or(0);
        let hi = support.iter().map(|&i| self.var_block[i]).max().unwrap_or(0);
        if hi > lo + 1 {
            return Err(Error::invalid(
                "term",
                format!("couples blocks {lo} and {hi}; only adjacent blocks may interact"),
            ));
        }
        Ok(())
    }

    pub fn add_objective(&mut self, expr: Expr) -> Result<()> {
        let t = Term::new(expr);
        self.check_support(&t.support)?;
        self.objective.push(t);
        Ok(())
    }

    /// Adds `expr(x) <= 0`. Rows without variables are checked and dropped.
    pub fn add_constraint(&mut self, expr: Expr, label: impl Into<String>) -> Result<()> {
        let t = Term::new(expr);
        let label = label.into();
        if t.support.is_empty() {
            let v = t.expr.eval(&[]);
            if v > 1e-9 {
                return Err(Error::Infeasible(format!("constant row `{label}` evaluates to {v:.3e} > 0")));
            }
            return Ok(());
        }
        self.check_support(&t.support)?;
        let linear = t.expr.is_linear();
        self.constraints.push(Constraint { term: t, linear, label });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.var_block.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective_terms(&self) -> &[Term] {
        &self.objective
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|t| t.expr.eval(x)).sum()
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for t in &self.objective {
            scatter_grad(t, x, 1.0, &mut g);
        }
        g
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.term.expr.eval(x)).collect()
    }

    /// Local gradient of constraint `i` over its support.
    pub fn constraint_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let t = &self.constraints[i].term;
        let mut g = vec![0.0; t.support.len()];
        t.expr.accumulate(x, &t.support, 1.0, &mut g, None);
        g
    }

    /// Permutes a variable-indexed vector into block-major order.
    pub(crate) fn to_block_order(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, &j) in self.block_order.iter().enumerate() {
            out[j] = v[i];
        }
        out
    }

    /// Inverse of [`Self::to_block_order`].
    pub(crate) fn from_block_order(&self, v: &[f64]) -> Vec<f64> {
        self.block_order.iter().map(|&j| v[j]).collect()
    }

    pub(crate) fn coord(&self, i: usize) -> (usize, usize) {
        (self.var_block[i], self.var_pos[i])
    }

    /// Adds `scale * hess(term)` into `m`.
    pub(crate) fn add_term_hessian(&self, t: &Term, x: &[f64], scale: f64, m: &mut BlockTri) {
        if scale == 0.0 || t.expr.is_linear() {
            return;
        }
        let k = t.support.len();
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        t.expr.accumulate(x, &t.support, scale, &mut g, Some(&mut h));
        for (a, &i) in t.support.iter().enumerate() {
            for (b, &j) in t.support.iter().enumerate() {
                let v = h[a * k + b];
                if v != 0.0 {
                    m.add(self.coord(i), self.coord(j), v);
                }
            }
        }
    }

    /// Plain-text summary: sizes, block structure and constraint residuals at `x`.
    pub fn debug_report(&self, x: &[f64]) -> String {
        let mut s = String::new();
        let c = self.constraint_values(x);
        let linear = self.constraints.iter().filter(|c| c.linear).count();
        let _ = writeln!(s, "variables: {}", self.dim());
        let _ = writeln!(s, "blocks: {} (largest {})", self.block_sizes.len(), self.block_sizes.iter().max().unwrap_or(&0));
        let _ = writeln!(s, "objective terms: {}", self.objective.len());
        let _ = writeln!(s, "constraints: {} ({} linear)", c.len(), linear);
        let _ = writeln!(s, "objective: {:.12e}", self.objective_value(x));
        if let Some((i, v)) = c.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
            let _ = writeln!(s, "max constraint value: {v:.3e} ({})", self.constraints[i].label);
        }
        s
    }
}

pub(crate) fn scatter_grad(t: &Term, x: &[f64], scale: f64, g: &mut [f64]) {
    let mut local = vec![0.0; t.support.len()];
    t.expr.accumulate(x, &t.support, scale, &mut local, None);
    for (&i, v) in t.support.iter().zip(local) {
        g[i] += v;
    }
}
