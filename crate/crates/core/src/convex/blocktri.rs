//! Symmetric block-tridiagonal matrices and their Cholesky factorization.

/// Lower half of a symmetric block-tridiagonal matrix. `diag[b]` is the full
/// (symmetric) `n_b x n_b` block; `sub[b]` couples block `b + 1` to block `b`
/// and is `n_{b+1} x n_b`, row-major.
#[derive(Debug, Clone)]
pub struct BlockTri {
    sizes: Vec<usize>,
    diag: Vec<Vec<f64>>,
    sub: Vec<Vec<f64>>,
}

impl BlockTri {
    pub fn zeros(sizes: &[usize]) -> Self {
        let diag = sizes.iter().map(|&n| vec![0.0; n * n]).collect();
        let sub = sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        Self {
            sizes: sizes.to_vec(),
            diag,
            sub,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn clear(&mut self) {
        self.diag.iter_mut().chain(self.sub.iter_mut()).for_each(|v| v.fill(0.0));
    }

    /// Adds `v` at entry `(i, j)` where `i` is row `ri` of block `bi`. Only
    /// blocks with `|bi - bj| <= 1` are representable; the mirror entry is
    /// implied.
    pub fn add(&mut self, (bi, ri): (usize, usize), (bj, rj): (usize, usize), v: f64) {
        if bi == bj {
            let n = self.sizes[bi];
            self.diag[bi][ri * n + rj] += v;
        } else if bi == bj + 1 {
            let n = self.sizes[bj];
            self.sub[bj][ri * n + rj] += v;
        } else if bj == bi + 1 {
            // Upper entry; stored through its transpose only once per pair.
        } else {
            panic!("entry couples non-adjacent blocks {bi} and {bj}");
        }
    }

    pub fn add_diagonal(&mut self, delta: f64) {
        for (b, &n) in self.sizes.iter().enumerate() {
            for i in 0..n {
                self.diag[b][i * n + i] += delta;
            }
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (b, &n) in self.sizes.iter().enumerate() {
            for i in 0..n {
                m = m.max(self.diag[b][i * n + i].abs());
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        let offs = offsets(&self.sizes);
        for (b, &n) in self.sizes.iter().enumerate() {
            let o = offs[b];
            for i in 0..n {
                for j in 0..n {
                    y[o + i] += self.diag[b][i * n + j] * x[o + j];
                }
            }
            if b + 1 < self.sizes.len() {
                let m = self.sizes[b + 1];
                let o2 = offs[b + 1];
                for i in 0..m {
                    for j in 0..n {
                        let v = self.sub[b][i * n + j];
                        y[o2 + i] += v * x[o + j];
                        y[o + j] += v * x[o2 + i];
                    }
                }
            }
        }
        y
    }

    /// Cholesky factorization; `None` when a pivot is not positive.
    pub fn factor(&self) -> Option<BlockCholesky> {
        let nb = self.sizes.len();
        let mut chol: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut coupling: Vec<Vec<f64>> = Vec::with_capacity(nb.saturating_sub(1));
        for b in 0..nb {
            let n = self.sizes[b];
            let mut d = self.diag[b].clone();
            if b > 0 {
                // X = sub * C_{b-1}^{-T}; D -= X X^T.
                let p = self.sizes[b - 1];
                let mut x = self.sub[b - 1].clone();
                for r in 0..n {
                    forward_sub(&chol[b - 1], p, &mut x[r * p..(r + 1) * p]);
                }
                for i in 0..n {
                    for j in 0..=i {
                        let s: f64 = (0..p).map(|t| x[i * p + t] * x[j * p + t]).sum();
                        d[i * n + j] -= s;
                    }
                }
                coupling.push(x);
            }
            if !dense_cholesky(&mut d, n) {
                return None;
            }
            chol.push(d);
        }
        Some(BlockCholesky {
            sizes: self.sizes.clone(),
            chol,
            coupling,
        })
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    for &n in sizes {
        o.push(acc);
        acc += n;
    }
    o.push(acc);
    o
}

/// In-place lower Cholesky of the symmetric `n x n` matrix (lower half read).
fn dense_cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Solves `L y = b` in place.
fn forward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place.
fn backward_sub(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[derive(Debug, Clone)]
pub struct BlockCholesky {
    sizes: Vec<usize>,
    chol: Vec<Vec<f64>>,
    coupling: Vec<Vec<f64>>,
}

impl BlockCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let offs = offsets(&self.sizes);
        let nb = self.sizes.len();
        let mut y = rhs.to_vec();
        for b in 0..nb {
            let n = self.sizes[b];
            if b > 0 {
                let p = self.sizes[b - 1];
                let x = &self.coupling[b - 1];
                let (head, tail) = y.split_at_mut(offs[b]);
                let prev = &head[offs[b - 1]..];
                for i in 0..n {
                    let s: f64 = (0..p).map(|t| x[i * p + t] * prev[t]).sum();
                    tail[i] -= s;
                }
            }
            forward_sub(&self.chol[b], n, &mut y[offs[b]..offs[b + 1]]);
        }
        for b in (0..nb).rev() {
            let n = self.sizes[b];
            if b + 1 < nb {
                let m = self.sizes[b + 1];
                let x = &self.coupling[b];
                let (head, tail) = y.split_at_mut(offs[b + 1]);
                let next = &tail[..m];
                let cur = &mut head[offs[b]..];
                for t in 0..n {
                    let s: f64 = (0..m).map(|i| x[i * n + t] * next[i]).sum();
                    cur[t] -= s;
                }
            }
            backward_sub(&self.chol[b], n, &mut y[offs[b]..offs[b + 1]]);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_spd_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sizes = [3, 1, 2, 4, 1];
        let offs = offsets(&sizes);
        let n = offs[sizes.len()];
        let blk = |i: usize| {
            let b = (0..sizes.len()).find(|&b| i < offs[b + 1]).unwrap();
            (b, i - offs[b])
        };
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                if blk(i).0 - blk(j).0 <= 1 {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    dense[i * n + j] = v;
                    dense[j * n + i] = v;
                }
            }
            dense[i * n + i] = 10.0 + rng.random_range(0.0..1.0);
        }
        let mut m = BlockTri::zeros(&sizes);
        for i in 0..n {
            for j in 0..n {
                if dense[i * n + j] != 0.0 {
                    m.add(blk(i), blk(j), dense[i * n + j]);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i * n + j] * x[j]).sum()).collect();
        for (p, q) in m.mul_vec(&x).iter().zip(&b) {
            assert!((p - q).abs() < 1e-12);
        }
        let sol = m.factor().unwrap().solve(&b);
        for (s, t) in sol.iter().zip(&x) {
            assert!((s - t).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_blocks_are_skipped() {
        let mut m = BlockTri::zeros(&[1, 0, 1]);
        m.add((0, 0), (0, 0), 2.0);
        m.add((2, 0), (2, 0), 4.0);
        let x = m.factor().unwrap().solve(&[2.0, 8.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn detects_indefinite() {
        let mut m = BlockTri::zeros(&[2]);
        m.add((0, 0), (0, 0), 1.0);
        m.add((0, 1), (0, 0), 2.0);
        m.add((0, 0), (0, 1), 2.0);
        m.add((0, 1), (0, 1), 1.0);
        assert!(m.factor().is_none());
        m.add_diagonal(4.0);
        assert!(m.factor().is_some());
    }
}
