//! Time integration of the three-component system.
//!
//! Each step is split into a pointwise reaction sub-step followed by implicit
//! diffusion. Inside the reaction sub-step the exchange term is integrated
//! exactly with `v` frozen: the exchange is linear in `(u1, u2)` and preserves
//! `u1 + u2`, so the deviation from the slow-manifold split relaxes by
//! `exp(-(p + q) dt / eps)`. Nothing in the step is limited by `1/eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, Grid, Helmholtz};
use crate::model::{ConstantState, ModelParams};

/// Tolerance below zero tolerated before a positivity error is raised.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Lie splitting with backward-Euler diffusion (first order).
    #[default]
    ImexBe,
    /// Strang splitting with Crank–Nicolson diffusion (second order).
    ImexCn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub scheme: Scheme,
}

impl StepControl {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::ImexBe,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdState {
    pub t: f64,
    pub u1: Field,
    pub u2: Field,
    pub v: Field,
}

impl RdState {
    pub fn new(t: f64, u1: Field, u2: Field, v: Field) -> Result<Self> {
        if u1.grid() != u2.grid() || u1.grid() != v.grid() {
            return Err(Error::InvalidInput("state fields live on different grids".into()));
        }
        Ok(Self { t, u1, u2, v })
    }

    pub fn constant(grid: &Grid, c: ConstantState) -> Self {
        Self {
            t: 0.0,
            u1: grid.constant(c.u1),
            u2: grid.constant(c.u2),
            v: grid.constant(c.v),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    pub fn total(&self) -> Field {
        self.u1.zip_map(&self.u2, |a, b| a + b)
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.u1) + integrate(&self.u2)
    }

    fn check(&self, last_good_t: f64) -> Result<()> {
        for (name, f) in [("u1", &self.u1), ("u2", &self.u2), ("v", &self.v)] {
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

/// L² norm of the exchange defect `q(v) u1 - p(v) u2`.
pub fn defect_norm(state: &RdState, params: &ModelParams) -> f64 {
    let g = *state.grid();
    let vals = (0..g.cells())
        .map(|i| {
            let s = params.switch(state.v.values()[i]);
            let x = s.q * state.u1.values()[i] - s.p * state.u2.values()[i];
            x * x
        })
        .sum::<f64>();
    (vals * g.cell_volume()).sqrt()
}

/// Precomputed diffusion solves for a fixed `(params, grid, dt)`.
#[derive(Debug, Clone)]
pub struct RdStepper {
    params: ModelParams,
    ctrl: StepControl,
    grid: Grid,
    diffusion: [Helmholtz; 3],
}

impl RdStepper {
    pub fn new(params: &ModelParams, grid: &Grid, ctrl: StepControl) -> Result<Self> {
        params.validate()?;
        if !(ctrl.dt.is_finite() && ctrl.dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", ctrl.dt)));
        }
        let a_max = params.a1.max(params.a2);
        if a_max > 0.0 && ctrl.dt > 0.5 / a_max {
            return Err(Error::param(
                "dt",
                format!("explicit logistic terms need dt <= 0.5/max(a1, a2) = {}", 0.5 / a_max),
            ));
        }
        let tau = match ctrl.scheme {
            Scheme::ImexBe => ctrl.dt,
            Scheme::ImexCn => 0.5 * ctrl.dt,
        };
        let coefs = [params.d, params.d + params.big_d, params.d_v];
        let diffusion = [
            Helmholtz::new(grid, tau * coefs[0])?,
            Helmholtz::new(grid, tau * coefs[1])?,
            Helmholtz::new(grid, tau * coefs[2])?,
        ];
        Ok(Self {
            params: *params,
            ctrl,
            grid: *grid,
            diffusion,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn control(&self) -> StepControl {
        self.ctrl
    }

    /// Logistic growth plus pheromone production/decay over `tau`.
    /// Explicit Euler (`second_order = false`) or Heun for the densities; the
    /// decay of `v` is integrated exactly so `v` never drops below `v e^{-β τ}`.
    fn growth_substep(&self, st: &mut RdState, tau: f64, second_order: bool) {
        let p = &self.params;
        let decay = (-p.beta * tau).exp();
        let gain = (1.0 - decay) / p.beta;
        let logistic = |u1: f64, u2: f64| {
            let crowd = 1.0 - u1 - u2;
            (p.a1 * crowd * u1, p.a2 * crowd * u2)
        };
        let u1 = st.u1.values_mut();
        let u2 = st.u2.values_mut();
        let v = st.v.values_mut();
        for i in 0..u1.len() {
            let (x1, x2) = (u1[i], u2[i]);
            let s0 = x1 + x2;
            let (f1, f2) = logistic(x1, x2);
            let (mut y1, mut y2) = (x1 + tau * f1, x2 + tau * f2);
            let produced = if second_order {
                let (g1, g2) = logistic(y1, y2);
                y1 = x1 + 0.5 * tau * (f1 + g1);
                y2 = x2 + 0.5 * tau * (f2 + g2);
                0.5 * (s0 + y1 + y2)
            } else {
                s0
            };
            u1[i] = y1;
            u2[i] = y2;
            v[i] = v[i] * decay + p.alpha * produced * gain;
        }
    }

    /// Exact exchange over `tau` with `v` frozen.
    fn exchange_substep(&self, st: &mut RdState, tau: f64) {
        let p = &self.params;
        let u1 = st.u1.values_mut();
        let u2 = st.u2.values_mut();
        let v = st.v.values();
        for i in 0..u1.len() {
            let sw = p.switch(v[i]);
            let rate = sw.p + sw.q;
            let total = u1[i] + u2[i];
            let eq = sw.p / rate * total;
            let x1 = eq + (u1[i] - eq) * (-rate * tau / p.eps).exp();
            u1[i] = x1;
            u2[i] = total - x1;
        }
    }

    fn diffusion_substep(&self, st: &mut RdState) {
        let fields = [&mut st.u1, &mut st.u2, &mut st.v];
        for (f, solver) in fields.into_iter().zip(&self.diffusion) {
            if self.ctrl.scheme == Scheme::ImexCn {
                // explicit half: f + (a) Δf with the same a as the implicit half
                let mut rhs = f.values().to_vec();
                let mut lap = vec![0.0; rhs.len()];
                crate::grid::laplacian_add(&self.grid, f.values(), &mut lap);
                let a = solver.coefficient();
                for (r, l) in rhs.iter_mut().zip(&lap) {
                    *r += a * l;
                }
                f.values_mut().copy_from_slice(&rhs);
            }
            solver.solve_in_place(f.values_mut());
        }
    }

    fn reaction(&self, st: &mut RdState, tau: f64) {
        match self.ctrl.scheme {
            Scheme::ImexBe => {
                // exchange sees v from the start of the step
                self.exchange_substep(st, tau);
                self.growth_substep(st, tau, false);
            }
            Scheme::ImexCn => {
                self.growth_substep(st, 0.5 * tau, true);
                self.exchange_substep(st, tau);
                self.growth_substep(st, 0.5 * tau, true);
            }
        }
    }

    pub fn step(&self, st: &mut RdState) -> Result<()> {
        if st.grid() != &self.grid {
            return Err(Error::InvalidInput("state grid does not match stepper grid".into()));
        }
        let t0 = st.t;
        let dt = self.ctrl.dt;
        match self.ctrl.scheme {
            Scheme::ImexBe => {
                self.reaction(st, dt);
                self.diffusion_substep(st);
            }
            Scheme::ImexCn => {
                self.reaction(st, 0.5 * dt);
                self.diffusion_substep(st);
                self.reaction(st, 0.5 * dt);
            }
        }
        st.t = t0 + dt;
        st.check(t0)
    }
}

/// Time horizon and output cadence of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t_end: f64,
    /// Sorted output times; each is taken at the first step reaching it.
    pub snapshot_times: Vec<f64>,
    /// Record a time-series row every this many steps (plus the first and last step).
    pub series_every: usize,
}

impl RunSpec {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            snapshot_times: vec![t_end],
            series_every: 1,
        }
    }

    pub(crate) fn validate(&self, dt: f64) -> Result<usize> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::param("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.snapshot_times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("snapshots", "snapshot times must be sorted"));
        }
        if self.series_every == 0 {
            return Err(Error::param("series_every", "must be at least 1"));
        }
        Ok(((self.t_end / dt).round() as usize).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub min_v: f64,
    /// Exchange defect; absent for the two-component limit system.
    pub defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub snapshots: Vec<S>,
    pub series: Vec<SeriesRow>,
    pub last: S,
}

/// Shared driver for the three- and two-component steppers.
pub(crate) fn drive<S: Clone>(
    spec: &RunSpec,
    dt: f64,
    mut state: S,
    time: impl Fn(&S) -> f64,
    mut step: impl FnMut(&mut S) -> Result<()>,
    row: impl Fn(&S) -> SeriesRow,
) -> Result<Trajectory<S>> {
    let steps = spec.validate(dt)?;
    let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());
    let mut pending = spec.snapshot_times.iter().copied().peekable();
    let mut series = vec![row(&state)];
    while pending.peek().is_some_and(|&ts| ts <= time(&state) + 0.5 * dt) {
        snapshots.push(state.clone());
        pending.next();
    }
    for k in 1..=steps {
        step(&mut state)?;
        while pending.peek().is_some_and(|&ts| ts <= time(&state) + 0.5 * dt) {
            snapshots.push(state.clone());
            pending.next();
        }
        if k % spec.series_every == 0 || k == steps {
            series.push(row(&state));
        }
    }
    Ok(Trajectory {
        snapshots,
        series,
        last: state,
    })
}

/// Integrates `initial` to `spec.t_end`, recording snapshots and diagnostics.
pub fn run(params: &ModelParams, ctrl: StepControl, spec: &RunSpec, initial: RdState) -> Result<Trajectory<RdState>> {
    let stepper = RdStepper::new(params, initial.grid(), ctrl)?;
    initial.check(initial.t)?;
    drive(
        spec,
        ctrl.dt,
        initial,
        |s| s.t,
        |s| stepper.step(s),
        |s| SeriesRow {
            t: s.t,
            mass: s.mass(),
            min_v: s.v.min(),
            defect: Some(defect_norm(s, params)),
        },
    )
}

/// One step from `state` without keeping the stepper around.
pub fn step(state: &RdState, ctrl: StepControl, params: &ModelParams) -> Result<RdState> {
    let stepper = RdStepper::new(params, state.grid(), ctrl)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}
