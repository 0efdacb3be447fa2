//! Time integration of the two-component cross-diffusion limit system
//!
//! ```text
//! u_t = Δ(c(v) u) + g(v) (1 - u) u,   c = d + D q/(p+q),   g = (a1 p + a2 q)/(p+q)
//! v_t = D_v Δv + alpha u - beta v
//! ```
//!
//! The mobility is lagged: with `w = c(v^k) u^{k+1}` each step solves the
//! symmetric positive definite system `(C^{-1} - dt Δ_h) w = u^k + dt g (1-u^k) u^k`.

use crate::banded::{dot, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{integrate, laplacian_add, Field, Grid, Helmholtz};
use crate::model::ModelParams;
use crate::rd::{drive, RunSpec, SeriesRow, Trajectory, NEGATIVITY_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossState {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

impl CrossState {
    pub fn new(t: f64, u: Field, v: Field) -> Result<Self> {
        if u.grid() != v.grid() {
            return Err(Error::InvalidInput("state fields live on different grids".into()));
        }
        Ok(Self { t, u, v })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u)
    }

    fn check(&self, last_good_t: f64) -> Result<()> {
        for (name, f) in [("u", &self.u), ("v", &self.v)] {
            if !f.is_finite() {
                return Err(Error::BlowUp { t: last_good_t });
            }
            let m = f.min();
            if m < -NEGATIVITY_TOLERANCE {
                return Err(Error::Positivity {
                    t: self.t,
                    field: name,
                    value: m,
                });
            }
        }
        Ok(())
    }
}

/// Pointwise mobility `d + D q/(p+q)`.
pub fn mobility(v: &Field, params: &ModelParams) -> Result<Field> {
    let values = v
        .values()
        .iter()
        .map(|&x| params.mobility(x))
        .collect::<Result<Vec<_>>>()?;
    Field::new(*v.grid(), values)
}

/// Relative residual target of the 2D conjugate-gradient solve.
const CG_TOLERANCE: f64 = 1e-13;
const CG_MAX_ITER: usize = 500;

#[derive(Debug, Clone)]
pub struct CrossStepper {
    params: ModelParams,
    grid: Grid,
    dt: f64,
    pheromone: Helmholtz,
    /// Constant-mobility solve used to precondition the 2D system.
    precond: Option<(f64, Helmholtz)>,
}

impl CrossStepper {
    pub fn new(params: &ModelParams, grid: &Grid, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let a_max = params.a1.max(params.a2);
        if a_max > 0.0 && dt > 0.5 / a_max {
            return Err(Error::param(
                "dt",
                format!("explicit logistic term needs dt <= 0.5/max(a1, a2) = {}", 0.5 / a_max),
            ));
        }
        let pheromone = Helmholtz::new(grid, dt * params.d_v)?;
        let precond = if grid.dim() == 2 {
            let c_ref = (params.d * (params.d + params.big_d)).sqrt();
            Some((c_ref, Helmholtz::new(grid, dt * c_ref)?))
        } else {
            None
        };
        Ok(Self {
            params: *params,
            grid: *grid,
            dt,
            pheromone,
            precond,
        })
    }

    fn solve_1d(&self, inv_c: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n();
        let k = self.dt / (self.grid.h() * self.grid.h());
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            let mut diag = inv_c[i];
            if i > 0 {
                a.set(i, i - 1, -k);
                diag += k;
            }
            if i + 1 < n {
                a.set(i, i + 1, -k);
                diag += k;
            }
            a.set(i, i, diag);
        }
        Ok(a.factor()?.solve(rhs))
    }

    fn apply_2d(&self, inv_c: &[f64], w: &[f64]) -> Vec<f64> {
        let mut lap = vec![0.0; w.len()];
        laplacian_add(&self.grid, w, &mut lap);
        w.iter()
            .zip(inv_c)
            .zip(&lap)
            .map(|((wi, ic), li)| ic * wi - self.dt * li)
            .collect()
    }

    fn solve_2d(&self, inv_c: &[f64], rhs: &[f64], guess: Vec<f64>) -> Result<Vec<f64>> {
        let (c_ref, pre) = self.precond.as_ref().expect("2D stepper has a preconditioner");
        let precondition = |r: &[f64]| {
            let mut z: Vec<f64> = r.iter().map(|x| c_ref * x).collect();
            pre.solve_in_place(&mut z);
            z
        };
        let mut w = guess;
        let aw = self.apply_2d(inv_c, &w);
        let mut r: Vec<f64> = rhs.iter().zip(&aw).map(|(b, a)| b - a).collect();
        let target = CG_TOLERANCE * dot(rhs, rhs).sqrt();
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..CG_MAX_ITER {
            if dot(&r, &r).sqrt() <= target {
                return Ok(w);
            }
            let ap = self.apply_2d(inv_c, &p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..w.len() {
                w[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = precondition(&r);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        let residual = dot(&r, &r).sqrt();
        if residual <= 10.0 * target {
            return Ok(w);
        }
        Err(Error::NoConvergence {
            iterations: CG_MAX_ITER,
            residual,
        })
    }

    pub fn step(&self, st: &mut CrossState) -> Result<()> {
        if st.grid() != &self.grid {
            return Err(Error::InvalidInput("state grid does not match stepper grid".into()));
        }
        let p = &self.params;
        let t0 = st.t;
        let dt = self.dt;
        let n = self.grid.cells();
        let mut inv_c = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        {
            let u = st.u.values();
            let v = st.v.values();
            for i in 0..n {
                let sw = p.switch(v[i]);
                let sum = sw.p + sw.q;
                if !(sum > 0.0) {
                    return Err(Error::DegenerateState { v: v[i], sum });
                }
                let c = p.d + p.big_d * sw.q / sum;
                let g = (p.a1 * sw.p + p.a2 * sw.q) / sum;
                inv_c[i] = 1.0 / c;
                rhs[i] = u[i] + dt * g * (1.0 - u[i]) * u[i];
            }
        }
        let w = if self.grid.dim() == 1 {
            self.solve_1d(&inv_c, &rhs)?
        } else {
            let guess = st.u.values().iter().zip(&inv_c).map(|(u, ic)| u / ic).collect();
            self.solve_2d(&inv_c, &rhs, guess)?
        };

        // pheromone: exact decay and production with the old u, then implicit diffusion
        let decay = (-p.beta * dt).exp();
        let gain = (1.0 - decay) / p.beta;
        for (vi, ui) in st.v.values_mut().iter_mut().zip(st.u.values()) {
            *vi = *vi * decay + p.alpha * ui * gain;
        }
        self.pheromone.solve_in_place(st.v.values_mut());
        for (ui, (wi, ic)) in st.u.values_mut().iter_mut().zip(w.iter().zip(&inv_c)) {
            *ui = wi * ic;
        }
        st.t = t0 + dt;
        st.check(t0)
    }
}

/// Integrates the limit system from `initial` to `spec.t_end`.
pub fn run_cross(params: &ModelParams, dt: f64, spec: &RunSpec, initial: CrossState) -> Result<Trajectory<CrossState>> {
    let stepper = CrossStepper::new(params, initial.grid(), dt)?;
    initial.check(initial.t)?;
    mobility(&initial.v, params)?;
    drive(
        spec,
        dt,
        initial,
        |s| s.t,
        |s| stepper.step(s),
        |s| SeriesRow {
            t: s.t,
            mass: s.mass(),
            min_v: s.v.min(),
            defect: None,
        },
    )
}

/// One step from `state` without keeping the stepper around.
pub fn step_cross(state: &CrossState, dt: f64, params: &ModelParams) -> Result<CrossState> {
    let stepper = CrossStepper::new(params, state.grid(), dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}
