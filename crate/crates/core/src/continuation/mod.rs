//! Newton solves for steady states, pseudo-arclength continuation in one
//! parameter, and detection of folds, pitchforks and Hopf points.
//!
//! Test functions along a branch:
//! * fold: the parameter component of the tangent changes sign;
//! * pitchfork (branch point): the sign of the bordered determinant
//!   `det [[J, F_λ], [t^T, τ]]` changes. A branch passing through a symmetric
//!   pitchfork also turns in the parameter there, so this test takes precedence;
//! * Hopf: the number of unstable complex eigenvalues changes while the total
//!   number of unstable eigenvalues changes too (a collision of two unstable
//!   real eigenvalues is not a Hopf point).

mod problem;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use problem::{SteadyProblem, System};

use crate::banded::{dot, BandLu, Bordered};
use crate::eigen::{eigs_near_shift, EigenOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonOptions {
    /// Max-norm residual target.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadingEig {
    pub value: Complex64,
    /// Neutral direction of the mass-conserving system (eigenvector carries mass).
    pub mass_neutral: bool,
}

/// Imaginary parts below this count as real.
const REAL_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
struct Tangent {
    x: Vec<f64>,
    lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tests {
    /// `sign(det J) · δ`, continuous through branch points.
    branch: f64,
    unstable_real: usize,
    unstable_complex: usize,
    /// Largest real part among complex eigenvalues, if any were found.
    complex_re: Option<f64>,
}

/// A converged steady state on a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub parameter: f64,
    /// Cell-interleaved physical state.
    pub state: Vec<f64>,
    pub stability: Stability,
    /// Up to six eigenvalues with the largest real parts, sorted by decreasing real part.
    pub eigenvalues: Vec<LeadingEig>,
    pub arclength: f64,
    /// Max-norm residual of the steady equations.
    pub residual: f64,
    pub newton_iterations: usize,
    tangent: Option<Tangent>,
    tests: Option<Tests>,
}

impl BranchPoint {
    /// Parameter component of the unit tangent, when known.
    pub fn tangent_parameter(&self) -> Option<f64> {
        self.tangent.as_ref().map(|t| t.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Fold,
    Pitchfork,
    Hopf,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Fold => "fold",
            EventKind::Pitchfork => "pitchfork",
            EventKind::Hopf => "hopf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub parameter: f64,
    /// Accepted points on either side of the event.
    pub bracket: (BranchPoint, BranchPoint),
    /// Refined point at the event.
    pub point: BranchPoint,
    /// Whether the count of unstable real eigenvalues changes across the bracket.
    pub real_crossing: bool,
    /// For pitchforks, `<Rφ, φ>/<φ, φ>` of the null vector `φ` under reflection `R`
    /// (`-1` for a reflection-antisymmetric null vector).
    pub null_parity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ParameterBound,
    StepCap,
    /// The branch came back to its starting point.
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub system: System,
    pub points: Vec<BranchPoint>,
    pub events: Vec<BifurcationEvent>,
    pub stop: StopReason,
}

impl Branch {
    pub fn parameter_name(&self) -> &'static str {
        self.system.parameter_name()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BifurcationEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationControl {
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub param_min: f64,
    pub param_max: f64,
    /// Corrector iterations allowed per step.
    pub max_corrector: usize,
    pub tolerance: f64,
    /// Eigenvalues kept per point.
    pub eig_count: usize,
    pub detect_events: bool,
}

impl Default for ContinuationControl {
    fn default() -> Self {
        Self {
            ds: 0.01,
            ds_min: 1e-8,
            ds_max: 0.05,
            max_steps: 2000,
            param_min: 0.0,
            param_max: f64::INFINITY,
            max_corrector: 10,
            tolerance: 1e-10,
            eig_count: 6,
            detect_events: true,
        }
    }
}

impl ContinuationControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.ds_min > 0.0 && self.ds_min <= self.ds && self.ds <= self.ds_max) {
            return Err(Error::param("ds", "need 0 < ds_min <= ds <= ds_max"));
        }
        if !(self.param_min < self.param_max) {
            return Err(Error::param("param_min", "need param_min < param_max"));
        }
        if self.tolerance <= 0.0 || self.max_corrector == 0 {
            return Err(Error::param(
                "tolerance",
                "need a positive tolerance and corrector budget",
            ));
        }
        Ok(())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn weighted_norm(w: &[f64], x: &[f64], lambda: f64) -> f64 {
    (w.iter().zip(x).map(|(wi, xi)| wi * xi * xi).sum::<f64>() + lambda * lambda).sqrt()
}

/// Damped Newton on the augmented system at fixed parameter.
fn newton_aug(pb: &SteadyProblem, xa: &mut Vec<f64>, lambda: f64, opts: &NewtonOptions) -> Result<usize> {
    let mut f = pb.aug_residual(xa, lambda);
    let mut norm = max_abs(&f);
    let mut best = norm;
    for it in 0..opts.max_iter {
        if norm <= opts.tolerance {
            return Ok(it);
        }
        if !norm.is_finite() {
            break;
        }
        let lu = pb.aug_jacobian(xa, lambda).factor()?;
        let mut step = f.clone();
        lu.solve_in_place(&mut step);
        let merit = dot(&f, &f).sqrt();
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = xa.iter().zip(&step).map(|(x, s)| x - alpha * s).collect();
            let ft = pb.aug_residual(&trial, lambda);
            let mt = dot(&ft, &ft).sqrt();
            if mt.is_finite() && (mt <= (1.0 - 1e-4 * alpha) * merit || alpha < 1.0 / 512.0) {
                *xa = trial;
                f = ft;
                norm = max_abs(&f);
                break;
            }
            alpha *= 0.5;
        }
        best = best.min(norm);
    }
    if norm <= opts.tolerance {
        return Ok(opts.max_iter);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best,
    })
}

/// Solves `[[J, F_λ], [c^T, d]] (t, τ) = (0, 1)` at `(xa, λ)` and normalises the result.
fn tangent_solve(pb: &SteadyProblem, xa: &[f64], lambda: f64, border: (&[f64], f64)) -> Result<(Tangent, f64)> {
    let w = pb.aug_weights();
    let c: Vec<f64> = w.iter().zip(border.0).map(|(wi, ti)| wi * ti).collect();
    let lu = pb.aug_jacobian(xa, lambda).factor()?;
    let fl = pb.aug_dparam(xa, lambda);
    let bord = Bordered::new(&lu, &fl, &c, border.1);
    let (t, tau) = bord.solve(&vec![0.0; xa.len()], 1.0)?;
    let n = weighted_norm(&w, &t, tau);
    let branch = lu.det_sign() * bord.delta();
    Ok((
        Tangent {
            x: t.iter().map(|v| v / n).collect(),
            lambda: tau / n,
        },
        branch,
    ))
}

/// Pseudo-arclength corrector from `(x0, λ0)` along `tan` at distance `ds`.
fn correct(
    pb: &SteadyProblem,
    x0: &[f64],
    lambda0: f64,
    tan: &Tangent,
    ds: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let w = pb.aug_weights();
    let c: Vec<f64> = w.iter().zip(&tan.x).map(|(wi, ti)| wi * ti).collect();
    let mut x: Vec<f64> = x0.iter().zip(&tan.x).map(|(a, t)| a + ds * t).collect();
    let mut lambda = lambda0 + ds * tan.lambda;
    let mut best = f64::INFINITY;
    for it in 0..=max_iter {
        let f = pb.aug_residual(&x, lambda);
        let arc = x.iter().zip(x0).zip(&c).map(|((a, b), ci)| ci * (a - b)).sum::<f64>()
            + tan.lambda * (lambda - lambda0)
            - ds;
        let res = max_abs(&f).max(arc.abs());
        if !res.is_finite() {
            break;
        }
        best = best.min(res);
        if res <= tolerance {
            return Ok((x, lambda, it));
        }
        if it == max_iter {
            break;
        }
        let lu: BandLu = pb.aug_jacobian(&x, lambda).factor()?;
        let fl = pb.aug_dparam(&x, lambda);
        let bord = Bordered::new(&lu, &fl, &c, tan.lambda);
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let (dx, dl) = bord.solve(&neg, -arc)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        lambda += dl;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: best,
    })
}

fn mass_share(pb: &SteadyProblem, v: &[Complex64]) -> f64 {
    let m = pb.components();
    let total: Complex64 = v.chunks(m).map(|c| if m == 3 { c[0] + c[1] } else { c[0] }).sum();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    total.norm() / (norm * (pb.cells() as f64).sqrt()).max(f64::MIN_POSITIVE)
}

/// Eigenvalues of the steady-state Jacobian nearest the shift, sorted by decreasing real part.
fn eigen_list(pb: &SteadyProblem, state: &[f64], lambda: f64, want: usize) -> Result<Vec<LeadingEig>> {
    let jac = pb.jacobian(state, lambda)?;
    let pairs = eigs_near_shift(&jac, want, EigenOptions::default())?;
    let neutral = if pb.system == System::Conserved {
        pairs
            .iter()
            .enumerate()
            .map(|(k, p)| (k, mass_share(pb, &p.vector)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    } else {
        None
    };
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, p)| LeadingEig {
            value: p.value,
            mass_neutral: Some(k) == neutral,
        })
        .collect())
}

fn classify_eigs(eigs: &[LeadingEig]) -> (Stability, usize, usize, Option<f64>) {
    let mut real = 0;
    let mut complex = 0;
    let mut complex_re: Option<f64> = None;
    for e in eigs.iter().filter(|e| !e.mass_neutral) {
        let z = e.value;
        if z.im.abs() > REAL_CUTOFF {
            complex_re = Some(complex_re.map_or(z.re, |m| m.max(z.re)));
            if z.re > 0.0 {
                complex += 1;
            }
        } else if z.re > 0.0 {
            real += 1;
        }
    }
    let stability = if real + complex == 0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (stability, real, complex, complex_re)
}

/// Number of eigenvalues computed per point; a few more than are stored.
fn eig_budget(count: usize) -> usize {
    count + 4
}

fn make_point(
    pb: &SteadyProblem,
    xa: &[f64],
    lambda: f64,
    arclength: f64,
    iterations: usize,
    tangent: Option<(Tangent, f64)>,
    eig_count: usize,
) -> Result<BranchPoint> {
    let state = pb.from_aug(xa);
    let residual = max_abs(&pb.residual(&state, lambda)?);
    let mut eigs = eigen_list(pb, &state, lambda, eig_budget(eig_count))?;
    let (stability, real, complex, complex_re) = classify_eigs(&eigs);
    eigs.truncate(eig_count);
    let (tangent, tests) = match tangent {
        Some((t, branch)) => (
            Some(t),
            Some(Tests {
                branch,
                unstable_real: real,
                unstable_complex: complex,
                complex_re,
            }),
        ),
        None => (None, None),
    };
    Ok(BranchPoint {
        parameter: lambda,
        state,
        stability,
        eigenvalues: eigs,
        arclength,
        residual,
        newton_iterations: iterations,
        tangent,
        tests,
    })
}

/// Tangent at a point with no predecessor, oriented so the parameter increases.
fn initial_tangent(pb: &SteadyProblem, xa: &[f64], lambda: f64) -> Result<(Tangent, f64)> {
    let zeros = vec![0.0; xa.len()];
    tangent_solve(pb, xa, lambda, (&zeros, 1.0))
}

/// Damped Newton at fixed parameter from `guess`, then eigenvalues and tangent.
pub fn newton_steady(pb: &SteadyProblem, guess: &[f64], parameter: f64) -> Result<BranchPoint> {
    newton_steady_with(pb, guess, parameter, &NewtonOptions::default())
}

pub fn newton_steady_with(
    pb: &SteadyProblem,
    guess: &[f64],
    parameter: f64,
    opts: &NewtonOptions,
) -> Result<BranchPoint> {
    pb.residual(guess, parameter)?;
    if pb.system == System::Conserved && !(parameter > 0.0) {
        return Err(Error::param("M", format!("must be positive, got {parameter}")));
    }
    let mut xa = pb.to_aug(guess);
    let iterations = newton_aug(pb, &mut xa, parameter, opts)?;
    let tangent = initial_tangent(pb, &xa, parameter).ok();
    make_point(
        pb,
        &xa,
        parameter,
        0.0,
        iterations,
        tangent,
        ContinuationControl::default().eig_count,
    )
}

/// Leading eigenvalues of the Jacobian at `point`, sorted by decreasing real part.
pub fn leading_eigs(pb: &SteadyProblem, point: &BranchPoint, count: usize) -> Result<Vec<LeadingEig>> {
    let mut eigs = eigen_list(pb, &point.state, point.parameter, eig_budget(count))?;
    eigs.truncate(count);
    Ok(eigs)
}

fn point_along(pb: &SteadyProblem, from: &BranchPoint, ds: f64, ctrl: &ContinuationControl) -> Result<BranchPoint> {
    let tan = from
        .tangent
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("point has no tangent".into()))?;
    let x0 = pb.to_aug(&from.state);
    let (xa, lambda, iters) = correct(pb, &x0, from.parameter, tan, ds, ctrl.tolerance, ctrl.max_corrector)?;
    let next = tangent_solve(pb, &xa, lambda, (&tan.x, tan.lambda))?;
    make_point(pb, &xa, lambda, from.arclength + ds, iters, Some(next), ctrl.eig_count)
}

fn kind_between(a: &BranchPoint, b: &BranchPoint) -> Result<Option<EventKind>> {
    let (Some(ta), Some(tb)) = (&a.tests, &b.tests) else {
        return Ok(None);
    };
    let (Some(la), Some(lb)) = (a.tangent_parameter(), b.tangent_parameter()) else {
        return Ok(None);
    };
    let pitchfork = (ta.branch > 0.0) != (tb.branch > 0.0);
    let fold = (la > 0.0) != (lb > 0.0);
    let dc = tb.unstable_complex as i64 - ta.unstable_complex as i64;
    let dr = tb.unstable_real as i64 - ta.unstable_real as i64;
    let hopf = dc != 0 && dc + dr != 0;
    if dc.abs() > 2 || (hopf && (fold || pitchfork)) {
        return Err(Error::RefinementNeeded);
    }
    Ok(if pitchfork {
        Some(EventKind::Pitchfork)
    } else if fold {
        Some(EventKind::Fold)
    } else if hopf {
        Some(EventKind::Hopf)
    } else {
        None
    })
}

fn test_value(kind: EventKind, p: &BranchPoint) -> f64 {
    match kind {
        EventKind::Fold => p.tangent_parameter().unwrap_or(f64::NAN),
        EventKind::Pitchfork => p.tests.map_or(f64::NAN, |t| t.branch),
        EventKind::Hopf => p.tests.and_then(|t| t.complex_re).unwrap_or(f64::NEG_INFINITY),
    }
}

/// Arclength bracket width at which event refinement stops; the parameter moves
/// at most this much across the bracket because the tangent has unit length.
const EVENT_ARC_TOLERANCE: f64 = 2e-5;

fn refine(
    pb: &SteadyProblem,
    a: &BranchPoint,
    b: &BranchPoint,
    kind: EventKind,
    ctrl: &ContinuationControl,
) -> Result<BranchPoint> {
    let ds = b.arclength - a.arclength;
    let (mut s_lo, mut f_lo) = (0.0, test_value(kind, a));
    let (mut s_hi, mut f_hi) = (ds, test_value(kind, b));
    let mut best: Option<BranchPoint> = None;
    let mut side = 0i8;
    for _ in 0..80 {
        if (s_hi - s_lo).abs() <= EVENT_ARC_TOLERANCE {
            break;
        }
        let width = s_hi - s_lo;
        let mut s = if f_lo.is_finite() && f_hi.is_finite() && f_hi != f_lo {
            s_lo - f_lo * width / (f_hi - f_lo)
        } else {
            0.5 * (s_lo + s_hi)
        };
        let margin = 0.02 * width;
        s = s.clamp(s_lo + margin.min(0.5 * width), s_hi - margin.min(0.5 * width));
        let p = point_along(pb, a, s, ctrl)?;
        let f = test_value(kind, &p);
        let lo_positive = f_lo > 0.0;
        if (f > 0.0) == lo_positive {
            s_lo = s;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            s_hi = s;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        best = Some(p);
    }
    let s = if f_lo.is_finite() && f_hi.is_finite() && f_hi != f_lo {
        (s_lo - f_lo * (s_hi - s_lo) / (f_hi - f_lo)).clamp(s_lo, s_hi)
    } else {
        0.5 * (s_lo + s_hi)
    };
    match point_along(pb, a, s, ctrl) {
        Ok(p) => Ok(p),
        Err(e) => best.ok_or(e),
    }
}

/// Approximate null vector of the augmented Jacobian at `p`, with unit weighted norm.
fn null_vector(pb: &SteadyProblem, p: &BranchPoint) -> Result<Vec<f64>> {
    let xa = pb.to_aug(&p.state);
    let w = pb.aug_weights();
    let lu = pb.aug_jacobian(&xa, p.parameter).factor()?;
    let mut phi: Vec<f64> = (0..xa.len()).map(|k| 1.0 + 0.3 * (0.377 * k as f64).sin()).collect();
    for _ in 0..4 {
        lu.solve_in_place(&mut phi);
        let n = weighted_norm(&w, &phi, 0.0);
        phi.iter_mut().for_each(|v| *v /= n);
    }
    Ok(phi)
}

/// Direction of the crossing branch at a branch point: the part of the kernel
/// of `[J, F_λ]` orthogonal to the current tangent, spanned by `(φ, 0)` and
/// `(-J⁻¹F_λ, 1)`.
fn switch_direction(pb: &SteadyProblem, p: &BranchPoint) -> Result<Tangent> {
    let xa = pb.to_aug(&p.state);
    let w = pb.aug_weights();
    let phi = null_vector(pb, p)?;
    let lu = pb.aug_jacobian(&xa, p.parameter).factor()?;
    let mut v = pb.aug_dparam(&xa, p.parameter);
    lu.solve_in_place(&mut v);
    v.iter_mut().for_each(|x| *x = -*x);
    let inner = |a: &Tangent, b: &Tangent| -> f64 {
        w.iter()
            .zip(&a.x)
            .zip(&b.x)
            .map(|((wi, ai), bi)| wi * ai * bi)
            .sum::<f64>()
            + a.lambda * b.lambda
    };
    let t = p
        .tangent
        .clone()
        .ok_or_else(|| Error::InvalidInput("branch point has no tangent".into()))?;
    let tt = inner(&t, &t);
    let mut best: Option<(f64, Tangent)> = None;
    for cand in [Tangent { x: phi, lambda: 0.0 }, Tangent { x: v, lambda: 1.0 }] {
        let scale = inner(&cand, &cand).sqrt();
        let c = inner(&cand, &t) / tt;
        let proj = Tangent {
            x: cand.x.iter().zip(&t.x).map(|(a, b)| (a - c * b) / scale).collect(),
            lambda: (cand.lambda - c * t.lambda) / scale,
        };
        let size = inner(&proj, &proj).sqrt();
        if best.as_ref().is_none_or(|(s, _)| size > *s) {
            best = Some((size, proj));
        }
    }
    let (size, dir) = best.expect("two candidates");
    Ok(Tangent {
        x: dir.x.iter().map(|v| v / size).collect(),
        lambda: dir.lambda / size,
    })
}

fn null_parity(pb: &SteadyProblem, p: &BranchPoint) -> Option<f64> {
    let phi = pb.from_aug(&null_vector(pb, p).ok()?);
    let r = pb.reflect(&phi);
    Some(dot(&r, &phi) / dot(&phi, &phi))
}

/// Classifies the crossing between two adjacent accepted points, if any, and
/// refines its location.
pub fn classify_event(
    pb: &SteadyProblem,
    a: &BranchPoint,
    b: &BranchPoint,
    ctrl: &ContinuationControl,
) -> Result<Option<BifurcationEvent>> {
    let Some(kind) = kind_between(a, b)? else {
        return Ok(None);
    };
    let point = refine(pb, a, b, kind, ctrl)?;
    let real_crossing = match (a.tests, b.tests) {
        (Some(x), Some(y)) => x.unstable_real != y.unstable_real,
        _ => false,
    };
    let null_parity = if kind == EventKind::Pitchfork {
        null_parity(pb, &point)
    } else {
        None
    };
    Ok(Some(BifurcationEvent {
        kind,
        parameter: point.parameter,
        bracket: (a.clone(), b.clone()),
        point,
        real_crossing,
        null_parity,
    }))
}

/// Pseudo-arclength continuation from `start`. `direction` (`±1`) orients the
/// start tangent: along the stored tangent of a switched branch, otherwise
/// towards increasing (`+1`) or decreasing (`-1`) parameter.
pub fn continue_branch(
    pb: &SteadyProblem,
    start: &BranchPoint,
    direction: f64,
    ctrl: &ContinuationControl,
) -> Result<Branch> {
    ctrl.validate()?;
    let sign = if direction < 0.0 { -1.0 } else { 1.0 };
    let x0 = pb.to_aug(&start.state);
    let tan = match &start.tangent {
        Some(t) => t.clone(),
        None => initial_tangent(pb, &x0, start.parameter)?.0,
    };
    let border = Tangent {
        x: tan.x.iter().map(|v| sign * v).collect(),
        lambda: sign * tan.lambda,
    };
    // re-solve with the oriented tangent as border so the branch test is consistent along the branch
    let (tan, branch_test) = tangent_solve(pb, &x0, start.parameter, (&border.x, border.lambda))?;
    let mut first = start.clone();
    first.arclength = 0.0;
    let (_, real, complex, complex_re) = classify_eigs(&eigen_list(
        pb,
        &start.state,
        start.parameter,
        eig_budget(ctrl.eig_count),
    )?);
    first.tests = Some(Tests {
        branch: branch_test,
        unstable_real: real,
        unstable_complex: complex,
        complex_re,
    });
    first.tangent = Some(tan);

    let w = pb.aug_weights();
    let mut branch = Branch {
        system: pb.system,
        points: vec![first],
        events: Vec::new(),
        stop: StopReason::StepCap,
    };
    let mut ds = ctrl.ds;
    let mut steps = 0;
    while steps < ctrl.max_steps {
        let prev = branch.points.last().expect("branch has a start point").clone();
        let next = match point_along(pb, &prev, ds, ctrl) {
            Ok(p) => p,
            Err(Error::NoConvergence { .. }) | Err(Error::Singular(_)) | Err(Error::Eigen(_)) => {
                ds *= 0.5;
                if ds < ctrl.ds_min {
                    return Err(Error::StuckBranch {
                        min_step: ctrl.ds_min,
                        branch: Box::new(branch),
                    });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if ctrl.detect_events {
            match classify_event(pb, &prev, &next, ctrl) {
                Ok(Some(ev)) => branch.events.push(ev),
                Ok(None) => {}
                Err(Error::RefinementNeeded) if 0.5 * ds >= ctrl.ds_min => {
                    ds *= 0.5;
                    continue;
                }
                Err(Error::NoConvergence { .. }) | Err(Error::Eigen(_)) if 0.5 * ds >= ctrl.ds_min => {
                    ds *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
        steps += 1;
        if next.newton_iterations <= 3 {
            ds = (ds * 1.3).min(ctrl.ds_max);
        } else if next.newton_iterations > 6 {
            ds = (ds * 0.7).max(ctrl.ds_min);
        }
        let out_of_range = next.parameter < ctrl.param_min || next.parameter > ctrl.param_max;
        let start_pt = &branch.points[0];
        let dx: Vec<f64> = pb.to_aug(&next.state).iter().zip(&x0).map(|(a, b)| a - b).collect();
        let dist = weighted_norm(&w, &dx, next.parameter - start_pt.parameter);
        let closed = next.arclength > 10.0 * ctrl.ds_max && dist < 1.5 * ds.max(prev_step(&branch, &next));
        branch.points.push(next);
        if out_of_range {
            branch.stop = StopReason::ParameterBound;
            return Ok(branch);
        }
        if closed {
            branch.stop = StopReason::Closed;
            return Ok(branch);
        }
    }
    Ok(branch)
}

fn prev_step(branch: &Branch, next: &BranchPoint) -> f64 {
    branch.points.last().map_or(0.0, |p| next.arclength - p.arclength)
}

/// First point on the branch crossing the current one at a pitchfork event,
/// with its tangent pointing away from the crossing. The offset along the
/// crossing direction is `1e-3` times the weighted norm of the state.
pub fn switch_branch(pb: &SteadyProblem, event: &BifurcationEvent, ctrl: &ContinuationControl) -> Result<BranchPoint> {
    if event.kind != EventKind::Pitchfork {
        return Err(Error::InvalidInput(format!(
            "cannot switch branches at a {}",
            event.kind.label()
        )));
    }
    let p = &event.point;
    let dir = switch_direction(pb, p)?;
    let xa = pb.to_aug(&p.state);
    let w = pb.aug_weights();
    let amplitude = 1e-3 * weighted_norm(&w, &xa, 0.0);
    let (xb, lambda, iters) = correct(
        pb,
        &xa,
        p.parameter,
        &dir,
        amplitude,
        ctrl.tolerance,
        ctrl.max_corrector.max(20),
    )?;
    let next = tangent_solve(pb, &xb, lambda, (&dir.x, dir.lambda))?;
    make_point(pb, &xb, lambda, 0.0, iters, Some(next), ctrl.eig_count)
}

/// Constant steady state with every component scaled by `1 + amplitude cos(k π x / L)`.
pub fn cosine_guess(pb: &SteadyProblem, parameter: f64, amplitude: f64, mode: usize) -> Result<Vec<f64>> {
    let mut x = pb.constant_state(parameter)?;
    let m = pb.components();
    let k = mode as f64 * std::f64::consts::PI / pb.grid.length();
    for (i, cell) in x.chunks_mut(m).enumerate() {
        let factor = 1.0 + amplitude * (k * pb.grid.center(i)).cos();
        cell.iter_mut().for_each(|c| *c *= factor);
    }
    Ok(x)
}

/// The cosine guess integrated in time for `t_end` with step `dt`, for use as a
/// Newton start near a stable steady state.
pub fn relaxed_guess(
    pb: &SteadyProblem,
    parameter: f64,
    amplitude: f64,
    mode: usize,
    t_end: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let x = cosine_guess(pb, parameter, amplitude, mode)?;
    let params = pb.params_at(parameter);
    let spec = crate::rd::RunSpec {
        t_end,
        snapshot_times: Vec::new(),
        series_every: usize::MAX,
    };
    match pb.system {
        System::Limit => {
            let last = crate::cross::run_cross(&params, dt, &spec, pb.to_cross_state(&x)?)?.last;
            pb.from_cross_state(&last)
        }
        _ => {
            let ctrl = crate::rd::StepControl::new(dt);
            let last = crate::rd::run(&params, ctrl, &spec, pb.to_rd_state(&x)?)?.last;
            pb.from_rd_state(&last)
        }
    }
}

/// Mirror image of a branch point (`x ↦ L - x`), re-solved by Newton.
pub fn reflect_point(pb: &SteadyProblem, p: &BranchPoint) -> Result<BranchPoint> {
    newton_steady(pb, &pb.reflect(&p.state), p.parameter)
}

#[cfg(test)]
mod tests;
