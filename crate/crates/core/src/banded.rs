//! Banded matrices with a partial-pivoting LU factorisation, transpose solves,
//! and one-column bordered solves by mixed block elimination.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage is column-major with `kl` extra rows on top for pivoting fill-in,
/// so a factorisation can run in place.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // row kl+ku holds the diagonal
        (self.kl + self.ku + i - j) + j * self.ld
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `value` at `(i, j)`; panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = value;
    }

    pub fn shift_diagonal(&mut self, sigma: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] -= sigma;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.data[self.slot(i, j)] * xj;
            }
        }
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, r) in rows.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *r += self.data[self.slot(i, j)].abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// LU factorisation with partial pivoting. Fails on an exactly zero pivot.
    pub fn factor(self) -> Result<BandLu> {
        let BandMatrix {
            n,
            kl,
            ku,
            ld,
            mut data,
        } = self;
        let kv = kl + ku;
        let at = |i: usize, j: usize| (kv + i - j) + j * ld;
        let mut pivots = vec![0usize; n];
        let mut swaps = 0usize;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = data[at(j, j)].abs();
            for r in 1..=km {
                let v = data[at(j + r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(j));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                swaps += 1;
                for c in j..=ju {
                    data.swap(at(j, c), at(j + p, c));
                }
            }
            if km > 0 {
                let inv = 1.0 / data[at(j, j)];
                for r in j + 1..=j + km {
                    data[at(r, j)] *= inv;
                }
                for c in j + 1..=ju {
                    let top = data[at(j, c)];
                    if top == 0.0 {
                        continue;
                    }
                    for r in j + 1..=j + km {
                        data[at(r, c)] -= data[at(r, j)] * top;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            kv,
            ld,
            data,
            pivots,
            swaps,
        })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ld: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    swaps: usize,
}

impl BandLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[(self.kv + i - j) + j * self.ld]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for r in j + 1..=(j + self.kl).min(n - 1) {
                    b[r] -= self.at(r, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            if bj != 0.0 {
                for r in j.saturating_sub(self.kv)..j {
                    b[r] -= self.at(r, j) * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves with the transposed matrix.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let mut s = b[j];
            for r in j.saturating_sub(self.kv)..j {
                s -= self.at(r, j) * b[r];
            }
            b[j] = s / self.at(j, j);
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for r in j + 1..=(j + self.kl).min(n - 1) {
                s -= self.at(r, j) * b[r];
            }
            b[j] = s;
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }

    /// Sign of the determinant (`+1.0` or `-1.0`).
    pub fn det_sign(&self) -> f64 {
        let mut neg = self.swaps % 2 == 1;
        for j in 0..self.n {
            if self.at(j, j) < 0.0 {
                neg = !neg;
            }
        }
        if neg {
            -1.0
        } else {
            1.0
        }
    }

    pub fn log_abs_det(&self) -> f64 {
        (0..self.n).map(|j| self.at(j, j).abs().ln()).sum()
    }

    /// Smallest and largest absolute pivots; a cheap conditioning hint.
    pub fn pivot_range(&self) -> (f64, f64) {
        (0..self.n).fold((f64::INFINITY, 0.0), |(lo, hi), j| {
            let a = self.at(j, j).abs();
            (lo.min(a), hi.max(a))
        })
    }
}

/// The matrix `[[A, b], [c^T, d]]` with `A` factored.
#[derive(Debug, Clone)]
pub struct Bordered<'a> {
    lu: &'a BandLu,
    b: &'a [f64],
    c: &'a [f64],
    d: f64,
    v: Vec<f64>,
    delta: f64,
}

impl<'a> Bordered<'a> {
    pub fn new(lu: &'a BandLu, b: &'a [f64], c: &'a [f64], d: f64) -> Self {
        let v = lu.solve_transpose(c);
        let delta = d - dot(&v, b);
        Self { lu, b, c, d, v, delta }
    }

    /// Schur complement `d - c^T A^{-1} b`; the bordered determinant is `det A · delta`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn det_sign(&self) -> f64 {
        self.lu.det_sign() * self.delta.signum()
    }

    /// Solves `[[A, b], [c^T, d]] (x, y) = (f, g)` with one correction sweep,
    /// which keeps the solve accurate when `A` itself is nearly singular.
    pub fn solve(&self, f: &[f64], g: f64) -> Result<(Vec<f64>, f64)> {
        if self.delta == 0.0 || !self.delta.is_finite() {
            return Err(Error::Singular(self.lu.dim()));
        }
        let y1 = (g - dot(&self.v, f)) / self.delta;
        let mut x1: Vec<f64> = f.iter().zip(self.b).map(|(fi, bi)| fi - bi * y1).collect();
        self.lu.solve_in_place(&mut x1);
        let r = g - dot(self.c, &x1) - self.d * y1;
        let y2 = r / self.delta;
        let mut x2: Vec<f64> = self.b.iter().map(|bi| -bi * y2).collect();
        self.lu.solve_in_place(&mut x2);
        let x = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        Ok((x, y1 + y2))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
