//! Aggregation multigrid V-cycle used as the CG preconditioner.
//!
//! Unknowns carry integer coordinates `(i, j, tag)`; each level merges
//! `2 × 2` blocks with equal tag and forms the Galerkin operator
//! `Pᵀ A P` for piecewise-constant `P`. Smoothing is forward Gauss–Seidel
//! before and backward after the coarse correction, which keeps the cycle
//! symmetric.

use crate::scalar::Real;

/// Compressed sparse rows.
#[derive(Clone, Debug)]
pub(crate) struct Csr<T> {
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Assembles row by row; `row(k, out)` pushes `(column, value)` pairs,
    /// duplicates allowed.
    pub fn from_rows(n: usize, mut row: impl FnMut(usize, &mut Vec<(usize, T)>)) -> Self {
        let mut ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(5 * n);
        let mut val = Vec::with_capacity(5 * n);
        let mut buf = Vec::new();
        ptr.push(0);
        for k in 0..n {
            buf.clear();
            row(k, &mut buf);
            buf.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(c, v) in &buf {
                if c == last {
                    let end = val.len() - 1;
                    val[end] = val[end] + v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = c;
                }
            }
            ptr.push(col.len());
        }
        Self { ptr, col, val }
    }

    pub fn rows(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn apply(&self, x: &[T], y: &mut [T]) {
        for (k, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for e in self.ptr[k]..self.ptr[k + 1] {
                acc = acc + self.val[e] * x[self.col[e]];
            }
            *out = acc;
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows())
            .map(|k| (self.ptr[k]..self.ptr[k + 1]).map(|e| self.val[e].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    fn diag(&self) -> Vec<T> {
        (0..self.rows())
            .map(|k| {
                (self.ptr[k]..self.ptr[k + 1])
                    .find(|&e| self.col[e] == k)
                    .map_or(T::zero(), |e| self.val[e])
            })
            .collect()
    }

    fn sweep(&self, inv_diag: &[T], b: &[T], x: &mut [T], forward: bool) {
        let n = self.rows();
        let mut step = |k: usize| {
            let mut acc = b[k];
            for e in self.ptr[k]..self.ptr[k + 1] {
                acc = acc - self.val[e] * x[self.col[e]];
            }
            x[k] = x[k] + acc * inv_diag[k];
        };
        if forward {
            (0..n).for_each(&mut step);
        } else {
            (0..n).rev().for_each(&mut step);
        }
    }
}

#[derive(Debug)]
struct Level<T> {
    a: Csr<T>,
    inv_diag: Vec<T>,
    /// Coarse index of every unknown; empty on the coarsest level.
    agg: Vec<usize>,
}

#[derive(Debug)]
pub(crate) struct Amg<T> {
    levels: Vec<Level<T>>,
}

const COARSEST: usize = 64;
const COARSE_SWEEPS: usize = 30;
/// Over-relaxation of the coarse correction.
const COARSE_WEIGHT: f64 = 1.7;

fn inverse_diag<T: Real>(a: &Csr<T>) -> Vec<T> {
    a.diag()
        .into_iter()
        .map(|d| if d > T::zero() { d.recip() } else { T::zero() })
        .collect()
}

impl<T: Real> Amg<T> {
    pub fn new(a: Csr<T>, mut keys: Vec<(usize, usize, u8)>) -> Self {
        let mut levels = Vec::new();
        let mut a = a;
        loop {
            let inv_diag = inverse_diag(&a);
            let n = a.rows();
            if n <= COARSEST {
                levels.push(Level { a, inv_diag, agg: Vec::new() });
                break;
            }
            let coarse_keys: Vec<(usize, usize, u8)> = keys.iter().map(|&(i, j, t)| (i / 2, j / 2, t)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by_key(|&k| coarse_keys[k]);
            let mut agg = vec![0; n];
            let mut next_keys = Vec::new();
            for &k in &order {
                if next_keys.last() != Some(&coarse_keys[k]) {
                    next_keys.push(coarse_keys[k]);
                }
                agg[k] = next_keys.len() - 1;
            }
            if next_keys.len() == n {
                levels.push(Level { a, inv_diag, agg: Vec::new() });
                break;
            }
            let nc = next_keys.len();
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
            for (k, &c) in agg.iter().enumerate() {
                members[c].push(k);
            }
            let coarse = Csr::from_rows(nc, |c, out| {
                for &k in &members[c] {
                    for e in a.ptr[k]..a.ptr[k + 1] {
                        out.push((agg[a.col[e]], a.val[e]));
                    }
                }
            });
            levels.push(Level { a, inv_diag, agg });
            a = coarse;
            keys = next_keys;
        }
        Self { levels }
    }

    /// `z ≈ A⁻¹ r` by one V-cycle from a zero guess.
    pub fn apply(&self, r: &[T], z: &mut [T]) {
        z.iter_mut().for_each(|v| *v = T::zero());
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, b: &[T], x: &mut [T]) {
        let lv = &self.levels[l];
        if lv.agg.is_empty() {
            for _ in 0..COARSE_SWEEPS {
                lv.a.sweep(&lv.inv_diag, b, x, true);
                lv.a.sweep(&lv.inv_diag, b, x, false);
            }
            return;
        }
        lv.a.sweep(&lv.inv_diag, b, x, true);
        let n = b.len();
        let mut r = vec![T::zero(); n];
        lv.a.apply(x, &mut r);
        let nc = self.levels[l + 1].a.rows();
        let mut rc = vec![T::zero(); nc];
        for k in 0..n {
            rc[lv.agg[k]] = rc[lv.agg[k]] + b[k] - r[k];
        }
        let mut xc = vec![T::zero(); nc];
        self.cycle(l + 1, &rc, &mut xc);
        let weight = T::of(COARSE_WEIGHT);
        for k in 0..n {
            x[k] = x[k] + weight * xc[lv.agg[k]];
        }
        lv.a.sweep(&lv.inv_diag, b, x, false);
    }
}
