//! Cell-centred grids on `(0, L)` and `(0, L)^2` with reflecting (Neumann) ghost cells.
//!
//! Cell `i` has centre `x_i = (i + 1/2) h`. The sampled cosine modes
//! `cos(k π x_i / L)` are exact eigenvectors of the discrete Laplacian with
//! eigenvalue `-(4/h²) sin²(k π h / 2L)`, which is what ties the time
//! steppers to the Fourier-mode linear analysis.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::param("dim", format!("must be 1 or 2, got {dim}")));
        }
        if n < 8 {
            return Err(Error::param("n", format!("need at least 8 cells per axis, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param("L", format!("must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, length)
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(2, n, length)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn measure(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Coordinates of a flat cell index; `y` is zero in 1D. `x` varies fastest.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        match self.dim {
            1 => (self.center(idx), 0.0),
            _ => (self.center(idx % self.n), self.center(idx / self.n)),
        }
    }

    /// Discrete Laplacian eigenvalue of the 1D cosine mode `k`.
    pub fn mode_eigenvalue(&self, k: usize) -> f64 {
        let h = self.h();
        let s = (k as f64 * PI * h / (2.0 * self.length)).sin();
        -4.0 * s * s / (h * h)
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: *self,
            values: vec![0.0; self.cells()],
        }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field {
            grid: *self,
            values: vec![c; self.cells()],
        }
    }

    /// `cos(k π x / L)` (times `cos(m π y / L)` in 2D with `m` = `k_y`).
    pub fn cos_mode(&self, kx: usize, ky: usize) -> Field {
        let w = PI / self.length;
        let values = (0..self.cells())
            .map(|idx| {
                let (x, y) = self.coords(idx);
                let cx = (kx as f64 * w * x).cos();
                if self.dim == 1 {
                    cx
                } else {
                    cx * (ky as f64 * w * y).cos()
                }
            })
            .collect();
        Field { grid: *self, values }
    }

    pub fn from_fn(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let values = (0..self.cells())
            .map(|idx| {
                let (x, y) = self.coords(idx);
                f(x, y)
            })
            .collect();
        Field { grid: *self, values }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        Field::new(*self, values)
    }
}

/// Values of a scalar quantity, one per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(bad) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field value {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.values.iter().enumerate() {
            if x > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled_add(&self, alpha: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Midpoint-rule inner product.
    pub fn dot(&self, other: &Field) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Midpoint quadrature `Σ f_i |cell|`.
pub fn integrate(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

fn lap_1d_into(src: &[f64], stride: usize, n: usize, inv_h2: f64, out: &mut [f64], offset: usize) {
    for i in 0..n {
        let c = src[offset + i * stride];
        let left = if i == 0 { c } else { src[offset + (i - 1) * stride] };
        let right = if i + 1 == n { c } else { src[offset + (i + 1) * stride] };
        out[offset + i * stride] += (left + right - 2.0 * c) * inv_h2;
    }
}

/// Adds `Δ_h src` into `out` (flat slices on `grid`).
pub fn laplacian_add(grid: &Grid, src: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    match grid.dim {
        1 => lap_1d_into(src, 1, n, inv_h2, out, 0),
        _ => {
            for j in 0..n {
                lap_1d_into(src, 1, n, inv_h2, out, j * n);
            }
            for i in 0..n {
                lap_1d_into(src, n, n, inv_h2, out, i);
            }
        }
    }
}

/// Second-order cell-centred Laplacian with reflecting ghost cells.
pub fn laplacian_apply(f: &Field) -> Field {
    let mut out = f.grid.zeros();
    laplacian_add(&f.grid, &f.values, &mut out.values);
    out
}

/// Factorised tridiagonal `1 + a(2/h²) + shift` system with Neumann end rows.
#[derive(Debug, Clone)]
struct Tridiag {
    // Thomas algorithm: modified super-diagonal and inverse pivots.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
    off: f64,
}

impl Tridiag {
    fn new(n: usize, a: f64, h: f64, shift: f64) -> Self {
        let off = -a / (h * h);
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let neighbours = if i == 0 || i + 1 == n { 1.0 } else { 2.0 };
            let diag = 1.0 + shift - off * neighbours;
            let pivot = diag - if i == 0 { 0.0 } else { off * prev_upper };
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = if i + 1 < n { off / pivot } else { 0.0 };
            prev_upper = upper[i];
        }
        Self { upper, inv_pivot, off }
    }

    fn solve_strided(&self, x: &mut [f64], offset: usize, stride: usize) {
        let n = self.upper.len();
        let mut prev = 0.0;
        for i in 0..n {
            let k = offset + i * stride;
            let y = (x[k] - if i == 0 { 0.0 } else { self.off * prev }) * self.inv_pivot[i];
            x[k] = y;
            prev = y;
        }
        for i in (0..n - 1).rev() {
            let k = offset + i * stride;
            x[k] -= self.upper[i] * x[k + stride];
        }
    }
}

/// Direct solver for `(I - a Δ_h) u = rhs`.
///
/// In 2D the operator is diagonalised along `x` by the orthonormal DCT-II
/// basis (the exact Neumann eigenvectors) and each transformed column is a
/// tridiagonal solve along `y`.
#[derive(Debug, Clone)]
pub struct Helmholtz {
    grid: Grid,
    a: f64,
    lines: Vec<Tridiag>,
    dct: Vec<f64>,
}

impl Helmholtz {
    pub fn new(grid: &Grid, a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::param(
                "a",
                format!("Helmholtz coefficient must be nonnegative, got {a}"),
            ));
        }
        let n = grid.n;
        let h = grid.h();
        let (lines, dct) = if grid.dim == 1 {
            (vec![Tridiag::new(n, a, h, 0.0)], Vec::new())
        } else {
            let mut dct = vec![0.0; n * n];
            for k in 0..n {
                let scale = if k == 0 {
                    (1.0 / n as f64).sqrt()
                } else {
                    (2.0 / n as f64).sqrt()
                };
                for i in 0..n {
                    dct[k * n + i] = scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
                }
            }
            let lines = (0..n)
                .map(|k| Tridiag::new(n, a, h, -a * grid.mode_eigenvalue(k)))
                .collect();
            (lines, dct)
        };
        Ok(Self {
            grid: *grid,
            a,
            lines,
            dct,
        })
    }

    pub fn coefficient(&self) -> f64 {
        self.a
    }

    /// Solves in place on a flat slice.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            self.lines[0].solve_strided(x, 0, 1);
            return;
        }
        // row j holds x-line j; transform each row, solve each mode along y, transform back
        let mut t = vec![0.0; n * n];
        for j in 0..n {
            let row = &x[j * n..(j + 1) * n];
            for k in 0..n {
                let basis = &self.dct[k * n..(k + 1) * n];
                t[j * n + k] = row.iter().zip(basis).map(|(a, b)| a * b).sum();
            }
        }
        for (k, line) in self.lines.iter().enumerate() {
            line.solve_strided(&mut t, k, n);
        }
        for j in 0..n {
            let row = &mut x[j * n..(j + 1) * n];
            row.fill(0.0);
            for k in 0..n {
                let coef = t[j * n + k];
                let basis = &self.dct[k * n..(k + 1) * n];
                for (r, b) in row.iter_mut().zip(basis) {
                    *r += coef * b;
                }
            }
        }
    }

    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        if rhs.grid != self.grid {
            return Err(Error::InvalidInput("rhs lives on a different grid".into()));
        }
        if !rhs.is_finite() {
            return Err(Error::InvalidInput("non-finite right-hand side".into()));
        }
        let mut out = rhs.clone();
        self.solve_in_place(&mut out.values);
        Ok(out)
    }
}

/// One-shot `(I - a Δ_h) u = rhs`.
pub fn helmholtz_solve(rhs: &Field, a: f64) -> Result<Field> {
    if !(a > 0.0) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    Helmholtz::new(&rhs.grid, a)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pseudo_random(grid: &Grid, seed: u64) -> Field {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        grid.from_fn(|_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::line(4, 1.0).is_err());
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::line(16, 0.0).is_err());
    }

    #[test]
    fn constant_in_kernel() {
        for g in [Grid::line(32, 2.0).unwrap(), Grid::square(16, 1.0).unwrap()] {
            let lap = laplacian_apply(&g.constant(3.7));
            assert!(lap.max_abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_modes_are_exact_eigenvectors() {
        let g = Grid::line(64, 1.3).unwrap();
        for k in 1..=5 {
            let f = g.cos_mode(k, 0);
            let lap = laplacian_apply(&f);
            let lam = g.mode_eigenvalue(k);
            for (a, b) in lap.values().iter().zip(f.values()) {
                assert!((a - lam * b).abs() < 1e-9 * lam.abs());
            }
        }
    }

    #[test]
    fn output_sums_to_zero() {
        for g in [Grid::line(100, 1.0).unwrap(), Grid::square(20, 1.0).unwrap()] {
            let f = pseudo_random(&g, 7);
            let s: f64 = laplacian_apply(&f).values().iter().sum();
            let bound = 1e-13 * f.max_abs() * g.cells() as f64 / (g.h() * g.h());
            assert!(s.abs() <= bound, "{s}");
        }
    }

    #[test]
    fn helmholtz_constant_and_mode() {
        let g = Grid::line(128, 1.0).unwrap();
        let u = helmholtz_solve(&g.constant(2.5), 0.3).unwrap();
        assert!(u.values().iter().all(|x| (x - 2.5).abs() < 1e-12));

        let a = 0.05;
        for k in 1..=3 {
            let mode = g.cos_mode(k, 0);
            let rhs = mode.scaled_add(-a, &laplacian_apply(&mode));
            let back = helmholtz_solve(&rhs, a).unwrap();
            let err = back.zip_map(&mode, |x, y| x - y).max_abs();
            assert!(err < 1e-12, "k={k}: {err}");
        }
    }

    #[test]
    fn helmholtz_rejects_nonfinite() {
        let g = Grid::line(16, 1.0).unwrap();
        let mut f = g.constant(1.0);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(helmholtz_solve(&f, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn helmholtz_2d_residual_and_mass() {
        let g = Grid::square(32, 1.0).unwrap();
        let rhs = pseudo_random(&g, 3).map(|x| x + 1.0);
        let a = 0.01;
        let u = helmholtz_solve(&rhs, a).unwrap();
        let back = u.scaled_add(-a, &laplacian_apply(&u));
        let res = back.zip_map(&rhs, |x, y| x - y).max_abs();
        assert!(res <= 1e-12 * rhs.max_abs(), "{res}");
        assert!((integrate(&u) - integrate(&rhs)).abs() < 1e-13);
    }

    #[test]
    fn laplacian_2d_is_sum_of_axis_operators() {
        let g2 = Grid::square(16, 1.0).unwrap();
        let g1 = Grid::line(16, 1.0).unwrap();
        let fx: Vec<f64> = (0..16).map(|i| (0.3 * i as f64).sin()).collect();
        let fy: Vec<f64> = (0..16).map(|j| (0.2 * j as f64).cos() + 0.1 * j as f64).collect();
        let tensor = g2.from_fn(|x, y| {
            let i = (x / g2.h()) as usize;
            let j = (y / g2.h()) as usize;
            fx[i] * fy[j]
        });
        let lx = laplacian_apply(&g1.field(fx.clone()).unwrap());
        let ly = laplacian_apply(&g1.field(fy.clone()).unwrap());
        let lap = laplacian_apply(&tensor);
        for j in 0..16 {
            for i in 0..16 {
                let expect = lx.values()[i] * fy[j] + fx[i] * ly.values()[j];
                assert!((lap.values()[j * 16 + i] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadrature() {
        let g = Grid::line(50, 1.0).unwrap();
        assert!((integrate(&g.constant(1.0)) - 1.0).abs() < 1e-15);
        assert!(integrate(&g.cos_mode(1, 0)).abs() < 1e-13);
        let f = pseudo_random(&g, 1);
        let h = pseudo_random(&g, 2);
        let lhs = integrate(&f.zip_map(&h, |a, b| 2.0 * a - 3.0 * b));
        let rhs = 2.0 * integrate(&f) - 3.0 * integrate(&h);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn laplacian_self_adjoint(seed_f in 0u64..1000, seed_g in 1000u64..2000, two_d in any::<bool>()) {
            let g = if two_d { Grid::square(12, 1.0).unwrap() } else { Grid::line(40, 0.7).unwrap() };
            let f = pseudo_random(&g, seed_f);
            let h = pseudo_random(&g, seed_g);
            let lhs = laplacian_apply(&f).dot(&h);
            let rhs = f.dot(&laplacian_apply(&h));
            // scale by the operator norm 4·dim/h² so the tolerance is in units of ‖f‖‖g‖
            let scale = f.norm_l2() * h.norm_l2() * 4.0 * g.dim() as f64 / (g.h() * g.h());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn helmholtz_inverts_operator(seed in 0u64..500, a in 1e-4f64..1.0) {
            let g = Grid::line(64, 1.0).unwrap();
            let u = pseudo_random(&g, seed);
            let rhs = u.scaled_add(-a, &laplacian_apply(&u));
            let back = helmholtz_solve(&rhs, a).unwrap();
            prop_assert!(back.zip_map(&u, |x, y| x - y).max_abs() <= 1e-12 * u.max_abs().max(rhs.max_abs()));
        }
    }
}
