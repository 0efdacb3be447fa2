//! Eigenvalues of a band matrix near a real shift, by Arnoldi iteration on
//! the shift-inverted operator with explicit restarts.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::banded::{dot, BandMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// `‖A x − λ x‖ / ‖x‖` measured with the original matrix.
    pub residual: f64,
    pub vector: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub shift: f64,
    pub tolerance: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: 0.9173,
            tolerance: 1e-8,
            krylov_dim: 40,
            max_restarts: 40,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Complex eigenvector of the small Hessenberg matrix for the Ritz value `theta`.
fn ritz_vector(h: &DMatrix<f64>, theta: Complex64) -> Vec<Complex64> {
    let m = h.nrows();
    let shift = theta + Complex64::new(1e-13 * theta.norm().max(1e-300), 0.0);
    let hc = DMatrix::from_fn(m, m, |i, j| {
        let v = Complex64::new(h[(i, j)], 0.0);
        if i == j {
            v - shift
        } else {
            v
        }
    });
    let lu = hc.lu();
    let mut y = nalgebra::DVector::from_fn(m, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.0));
    for _ in 0..3 {
        match lu.solve(&y) {
            Some(next) => {
                let s = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if !(s.is_finite() && s > 0.0) {
                    break;
                }
                y = next / Complex64::new(s, 0.0);
            }
            None => break,
        }
    }
    y.iter().copied().collect()
}

/// Up to `want` eigenpairs of `a` nearest to `opts.shift`, sorted by decreasing real part.
/// Complex-conjugate pairs are kept together, so one extra value may be returned.
pub fn eigs_near_shift(a: &BandMatrix, want: usize, opts: EigenOptions) -> Result<Vec<EigenPair>> {
    let n = a.dim();
    if want == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let mut shifted = a.clone();
    shifted.shift_diagonal(opts.shift);
    let lu = shifted
        .factor()
        .map_err(|_| Error::Eigen(format!("shift {} is an eigenvalue", opts.shift)))?;

    let mut m = opts.krylov_dim.max(2 * want + 8).min(n);
    let mut start: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (0.731 * i as f64).sin()).collect();
    let mut best_residual = f64::INFINITY;

    for _ in 0..=opts.max_restarts {
        let s = norm(&start);
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / s).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut size = m;
        for j in 0..m {
            let mut w = lu.solve(&basis[j]);
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &w);
                    h[(i, j)] += c;
                    for (wk, qk) in w.iter_mut().zip(q) {
                        *wk -= c * qk;
                    }
                }
            }
            let beta = norm(&w);
            h[(j + 1, j)] = beta;
            if beta <= 1e-14 * h.column(j).amax().max(1e-300) {
                size = j + 1;
                break;
            }
            basis.push(w.into_iter().map(|x| x / beta).collect());
        }
        let hm = h.view((0, 0), (size, size)).into_owned();
        let mut thetas: Vec<Complex64> = hm.complex_eigenvalues().iter().copied().collect();
        thetas.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
        let mut take = want.min(size);
        if take < size
            && thetas[take - 1].im != 0.0
            && (thetas[take].conj() - thetas[take - 1]).norm() < 1e-10 * thetas[take].norm()
        {
            take += 1;
        }

        let mut pairs = Vec::with_capacity(take);
        let mut worst: f64 = 0.0;
        for &theta in &thetas[..take] {
            let y = ritz_vector(&hm, theta);
            let mut re = vec![0.0; n];
            let mut im = vec![0.0; n];
            for (k, yk) in y.iter().enumerate() {
                for i in 0..n {
                    re[i] += basis[k][i] * yk.re;
                    im[i] += basis[k][i] * yk.im;
                }
            }
            let lambda = Complex64::new(opts.shift, 0.0) + theta.inv();
            let are = a.matvec(&re);
            let aim = a.matvec(&im);
            let mut r2 = 0.0;
            let mut x2 = 0.0;
            for i in 0..n {
                let rr = are[i] - (lambda.re * re[i] - lambda.im * im[i]);
                let ri = aim[i] - (lambda.re * im[i] + lambda.im * re[i]);
                r2 += rr * rr + ri * ri;
                x2 += re[i] * re[i] + im[i] * im[i];
            }
            let residual = (r2 / x2).sqrt();
            worst = worst.max(residual);
            let vector = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            pairs.push(EigenPair {
                value: lambda,
                residual,
                vector,
            });
        }
        best_residual = best_residual.min(worst);
        if worst <= opts.tolerance {
            pairs.sort_by(|x, y| {
                y.value
                    .re
                    .total_cmp(&x.value.re)
                    .then(y.value.im.total_cmp(&x.value.im))
            });
            return Ok(pairs);
        }
        // restart from the real and imaginary parts of the wanted Ritz vectors
        start = vec![0.0; n];
        for (k, p) in pairs.iter().enumerate() {
            let w = 1.0 + 0.1 * k as f64;
            for (s, z) in start.iter_mut().zip(&p.vector) {
                *s += w * (z.re + z.im);
            }
        }
        m = (m + m / 2).min(n);
    }
    Err(Error::Eigen(format!(
        "Arnoldi stagnated: best residual {best_residual:.3e} above {:.1e}",
        opts.tolerance
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, di: f64, up: f64) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, di);
            if i > 0 {
                a.set(i, i - 1, lo);
            }
            if i + 1 < n {
                a.set(i, i + 1, up);
            }
        }
        a
    }

    #[test]
    fn toeplitz_spectrum() {
        // tridiag(1, -2, 1) has eigenvalues -2 + 2 cos(k π / (n+1))
        let n = 200;
        let a = tridiag(n, 1.0, -2.0, 1.0);
        let pairs = eigs_near_shift(
            &a,
            5,
            EigenOptions {
                shift: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(pairs.len(), 5);
        for (k, p) in pairs.iter().enumerate() {
            let exact = -2.0 + 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((p.value.re - exact).abs() < 1e-10, "{k}: {} vs {exact}", p.value.re);
            assert!(p.value.im.abs() < 1e-10);
            assert!(p.residual <= 1e-8);
        }
    }

    #[test]
    fn complex_pairs_from_nonsymmetric_blocks() {
        // block diagonal of 2x2 rotations-with-decay: eigenvalues -k/10 ± i k
        let blocks = 30;
        let mut a = BandMatrix::zeros(2 * blocks, 1, 1);
        for k in 0..blocks {
            let re = -(k as f64) / 10.0;
            let im = 1.0 + k as f64;
            let i = 2 * k;
            a.set(i, i, re);
            a.set(i + 1, i + 1, re);
            a.set(i, i + 1, im);
            a.set(i + 1, i, -im);
        }
        let pairs = eigs_near_shift(
            &a,
            4,
            EigenOptions {
                shift: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(pairs.len() >= 4);
        assert!((pairs[0].value.re - 0.0).abs() < 1e-10);
        assert!((pairs[0].value.im.abs() - 1.0).abs() < 1e-10);
        assert!((pairs[0].value - pairs[1].value.conj()).norm() < 1e-10);
    }

    #[test]
    fn eigenvalue_at_shift_is_an_error() {
        let a = tridiag(10, 0.0, 2.0, 0.0);
        let r = eigs_near_shift(
            &a,
            2,
            EigenOptions {
                shift: 2.0,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::Eigen(_))));
    }
}
