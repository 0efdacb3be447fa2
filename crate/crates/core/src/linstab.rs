//! Linearisation of the constant steady states in Fourier cosine modes,
//! growth rates, and neutral-stability curves.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{constant_steady_conserved, constant_steady_growth, ModelParams};

/// Which constant state is linearised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    /// Mass-conserving system, parametrised by the mean density `M`.
    Conserved,
    /// System with logistic growth, parametrised by `r = a1 = a2`.
    Growth,
}

impl Which {
    pub fn parameter_name(self) -> &'static str {
        match self {
            Which::Conserved => "M",
            Which::Growth => "r",
        }
    }
}

/// Linearisation of the reaction-diffusion system in cosine mode `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix {
    pub n: usize,
    pub which: Which,
    pub entries: Matrix3<f64>,
}

/// Continuous wavenumber squared `(nπ/L)²`.
pub fn wavenumber_sq(n: usize, length: f64) -> f64 {
    let k = n as f64 * PI / length;
    k * k
}

fn diffusion_shift(mut jac: Matrix3<f64>, k2: f64, params: &ModelParams) -> Matrix3<f64> {
    jac[(0, 0)] -= params.d * k2;
    jac[(1, 1)] -= (params.d + params.big_d) * k2;
    jac[(2, 2)] -= params.d_v * k2;
    jac
}

/// Mode matrix with an arbitrary `k²`, e.g. the discrete Laplacian eigenvalue of a grid.
pub fn mode_matrix_k2(which: Which, n: usize, k2: f64, parameter: f64, params: &ModelParams) -> Result<ModeMatrix> {
    let (p, state) = match which {
        Which::Conserved => (*params, constant_steady_conserved(parameter, params)?),
        Which::Growth => {
            if !(parameter.is_finite() && parameter >= 0.0) {
                return Err(Error::param("r", format!("must be nonnegative, got {parameter}")));
            }
            let p = params.with_growth(parameter);
            (p, constant_steady_growth(&p)?)
        }
    };
    let jac = p.reaction_jac(state.u1, state.u2, state.v);
    Ok(ModeMatrix {
        n,
        which,
        entries: diffusion_shift(jac, k2, &p),
    })
}

/// Mode matrix at the constant state selected by `parameter` (`M` or `r`).
pub fn mode_matrix(which: Which, n: usize, parameter: f64, params: &ModelParams) -> Result<ModeMatrix> {
    mode_matrix_k2(which, n, wavenumber_sq(n, params.length), parameter, params)
}

/// Mass-conserving system, mode `n`, at mean density `mass`. Growth rates in `params` are ignored.
pub fn assemble_an(n: usize, mass: f64, params: &ModelParams) -> Result<ModeMatrix> {
    let p = ModelParams {
        a1: 0.0,
        a2: 0.0,
        ..*params
    };
    mode_matrix(Which::Conserved, n, mass, &p)
}

/// Growth system, mode `n`, with the growth rates `a1`, `a2` taken from `params`.
pub fn assemble_bn(n: usize, params: &ModelParams) -> Result<ModeMatrix> {
    let state = constant_steady_growth(params)?;
    let jac = params.reaction_jac(state.u1, state.u2, state.v);
    Ok(ModeMatrix {
        n,
        which: Which::Growth,
        entries: diffusion_shift(jac, wavenumber_sq(n, params.length), params),
    })
}

impl ModeMatrix {
    /// Cofactor expansion along the first row.
    pub fn det(&self) -> f64 {
        let m = &self.entries;
        m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
            - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
            + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
    }

    /// Determinant through a pivoted LU factorisation.
    pub fn det_lu(&self) -> f64 {
        self.entries.lu().determinant()
    }

    /// Hadamard bound on `|det|`, used to make determinant tolerances relative.
    pub fn det_scale(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.norm())
            .product::<f64>()
            .max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues sorted by decreasing real part.
    pub fn eigenvalues(&self) -> [Complex64; 3] {
        let ev = self.entries.complex_eigenvalues();
        let mut out = [ev[0], ev[1], ev[2]];
        out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        out
    }

    /// Largest real part, skipping the conservation-law zero eigenvalue of mode 0
    /// in the mass-conserving case.
    pub fn growth_rate(&self) -> f64 {
        let ev = self.eigenvalues();
        if self.n == 0 && self.which == Which::Conserved {
            let neutral = (0..3)
                .min_by(|&a, &b| ev[a].norm().total_cmp(&ev[b].norm()))
                .unwrap_or(0);
            (0..3)
                .filter(|&i| i != neutral)
                .map(|i| ev[i].re)
                .fold(f64::NEG_INFINITY, f64::max)
        } else {
            ev[0].re
        }
    }
}

/// Largest growth rate over modes `0..=n_max` and the mode attaining it.
pub fn max_growth_rate(which: Which, parameter: f64, params: &ModelParams, n_max: usize) -> Result<(f64, usize)> {
    if n_max < 1 {
        return Err(Error::param("n_max", "must be at least 1"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for n in 0..=n_max {
        let rate = mode_matrix(which, n, parameter, params)?.growth_rate();
        if rate > best.0 {
            best = (rate, n);
        }
    }
    Ok(best)
}

fn bisect(mut lo: f64, mut hi: f64, mut f_lo: f64, f: impl Fn(f64) -> Result<f64>, rel_tol: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Relative bracketing tolerance used by the root searches.
pub const ROOT_TOLERANCE: f64 = 1e-8;

/// Roots of `det(mode matrix) = 0` in the parameter (`M` or `r`) over `[lo, hi]`,
/// at the diffusivities in `params`. Sign changes are located on `samples` equal
/// steps and refined by bisection.
pub fn parameter_roots(
    which: Which,
    n: usize,
    lo: f64,
    hi: f64,
    samples: usize,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if !(lo < hi) || samples < 2 {
        return Err(Error::InvalidInput(
            "parameter range must be increasing with at least 2 samples".into(),
        ));
    }
    let det = |x: f64| mode_matrix(which, n, x, params).map(|m| m.det());
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = det(x0)?;
    for i in 1..=samples {
        let x1 = lo + (hi - lo) * i as f64 / samples as f64;
        let f1 = det(x1)?;
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            roots.push(bisect(x0, x1, f0, det, ROOT_TOLERANCE)?);
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(roots)
}

/// Scan window of a neutral-curve computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub param_min: f64,
    pub param_max: f64,
    pub param_steps: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub d_steps: usize,
}

impl Scan {
    pub fn validate(&self) -> Result<()> {
        if !(self.param_min > 0.0 && self.param_min < self.param_max) {
            return Err(Error::param("param_min", "need 0 < param_min < param_max"));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(Error::param("d_min", "need 0 < d_min < d_max"));
        }
        if self.param_steps < 100 {
            return Err(Error::param("param_steps", "need at least 100 scan points"));
        }
        if self.d_steps < 100 {
            return Err(Error::param("d_steps", "need at least 100 scan points"));
        }
        Ok(())
    }
}

/// Points `(parameter, D)` on `det = 0` for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralCurve {
    pub n: usize,
    pub which: Which,
    pub points: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl NeutralCurve {
    pub fn parameter_name(&self) -> &'static str {
        self.which.parameter_name()
    }
}

/// For each scanned parameter value, bisects `det` in `D` on every sign change.
/// A mode with no sign change in the window gives an empty curve.
pub fn neutral_curve(which: Which, n: usize, scan: &Scan, params: &ModelParams) -> Result<NeutralCurve> {
    scan.validate()?;
    let mut points = Vec::new();
    for i in 0..=scan.param_steps {
        let x = scan.param_min + (scan.param_max - scan.param_min) * i as f64 / scan.param_steps as f64;
        let det = |big_d: f64| mode_matrix(which, n, x, &ModelParams { big_d, ..*params }).map(|m| m.det());
        let mut d0 = scan.d_min;
        let mut f0 = det(d0)?;
        for j in 1..=scan.d_steps {
            let d1 = scan.d_min + (scan.d_max - scan.d_min) * j as f64 / scan.d_steps as f64;
            let f1 = det(d1)?;
            if f0 * f1 < 0.0 {
                points.push((x, bisect(d0, d1, f0, det, ROOT_TOLERANCE)?));
            }
            d0 = d1;
            f0 = f1;
        }
    }
    Ok(NeutralCurve {
        n,
        which,
        points,
        tolerance: ROOT_TOLERANCE,
    })
}
