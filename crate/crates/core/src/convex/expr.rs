//! Smooth convex building blocks with exact local derivatives.

use std::f64::consts::LN_2;

/// Affine form `sum a_i x_i + c`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize, coef: f64) -> Self {
        Self {
            terms: vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, a)| a == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, a)| acc + a * x[i])
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn plus(mut self, other: &Lin) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn shifted(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lin(Lin),
    /// `weight * (2^arg - 1)`
    Exp2 { weight: f64, arg: Lin },
    /// `weight * arg^2`
    Square { weight: f64, arg: Lin },
    Sum(Vec<Expr>),
    /// `(weight / 2) * inner^2`; convex when `inner` is convex and nonnegative.
    HalfSquare { weight: f64, inner: Box<Expr> },
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Lin(l) => l.eval(x),
            Expr::Exp2 { weight, arg } => weight * (arg.eval(x) * LN_2).exp_m1(),
            Expr::Square { weight, arg } => {
                let a = arg.eval(x);
                weight * a * a
            }
            Expr::Sum(v) => v.iter().map(|e| e.eval(x)).sum(),
            Expr::HalfSquare { weight, inner } => {
                let e = inner.eval(x);
                0.5 * weight * e * e
            }
        }
    }

    /// Sorted, deduplicated variable indices.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_support(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_support(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Lin(l) | Expr::Exp2 { arg: l, .. } | Expr::Square { arg: l, .. } => {
                out.extend(l.terms.iter().filter(|t| t.1 != 0.0).map(|t| t.0))
            }
            Expr::Sum(v) => v.iter().for_each(|e| e.collect_support(out)),
            Expr::HalfSquare { inner, .. } => inner.collect_support(out),
        }
    }

    pub fn is_linear(&self) -> bool {
        match self {
            Expr::Lin(_) => true,
            Expr::Exp2 { weight, arg } | Expr::Square { weight, arg } => *weight == 0.0 || arg.is_constant(),
            Expr::Sum(v) => v.iter().all(Expr::is_linear),
            Expr::HalfSquare { weight, inner } => *weight == 0.0 || inner.support().is_empty(),
        }
    }

    /// Adds `scale * grad` into `g` and `scale * hess` into the row-major
    /// `h`, both indexed by position in `support`. Returns the value.
    pub fn accumulate(&self, x: &[f64], support: &[usize], scale: f64, g: &mut [f64], h: Option<&mut [f64]>) -> f64 {
        let m = support.len();
        let pos = |i: usize| support.binary_search(&i).expect("index outside declared support");
        match self {
            Expr::Lin(l) => {
                for &(i, a) in &l.terms {
                    if a != 0.0 {
                        g[pos(i)] += scale * a;
                    }
                }
                l.eval(x)
            }
            Expr::Exp2 { weight, arg } => {
                let t = arg.eval(x);
                let v = t.exp2();
                let d1 = weight * LN_2 * v;
                for &(i, a) in &arg.terms {
                    g[pos(i)] += scale * d1 * a;
                }
                if let Some(h) = h {
                    rank_one(h, m, &arg.terms, &pos, scale * d1 * LN_2);
                }
                weight * (t * LN_2).exp_m1()
            }
            Expr::Square { weight, arg } => {
                let t = arg.eval(x);
                for &(i, a) in &arg.terms {
                    g[pos(i)] += scale * 2.0 * weight * t * a;
                }
                if let Some(h) = h {
                    rank_one(h, m, &arg.terms, &pos, scale * 2.0 * weight);
                }
                weight * t * t
            }
            Expr::Sum(v) => match h {
                Some(h) => v.iter().map(|e| e.accumulate(x, support, scale, g, Some(&mut *h))).sum(),
                None => v.iter().map(|e| e.accumulate(x, support, scale, g, None)).sum(),
            },
            Expr::HalfSquare { weight, inner } => {
                let mut gi = vec![0.0; m];
                let want_h = h.is_some();
                let mut hi = if want_h { vec![0.0; m * m] } else { Vec::new() };
                let e = inner.accumulate(x, support, 1.0, &mut gi, want_h.then_some(&mut hi[..]));
                for (gk, gik) in g.iter_mut().zip(&gi) {
                    *gk += scale * weight * e * gik;
                }
                if let Some(h) = h {
                    for r in 0..m {
                        for c in 0..m {
                            h[r * m + c] += scale * weight * (gi[r] * gi[c] + e * hi[r * m + c]);
                        }
                    }
                }
                0.5 * weight * e * e
            }
        }
    }
}

fn rank_one(h: &mut [f64], m: usize, terms: &[(usize, f64)], pos: &dyn Fn(usize) -> usize, w: f64) {
    for &(i, a) in terms {
        if a == 0.0 {
            continue;
        }
        let pi = pos(i);
        for &(j, b) in terms {
            if b != 0.0 {
                h[pi * m + pos(j)] += w * a * b;
            }
        }
    }
}
