//! Discretised steady-state problems on a 1D cell-centred grid.
//!
//! States are stored cell by cell: `(u1, u2, v)` for the three-component
//! systems and `(u, v)` for the limit system. The mass-conserving problem is
//! solved in an augmented form that stays banded: each cell carries a running
//! mass `S_i = S_{i-1} + h (u1_i + u2_i)`, the last row fixes `S_{N-1} = M L`,
//! and a multiplier enters one `u1` row. Summing the `u1` and `u2` rows of the
//! steady equations gives `h μ = 0`, so the multiplier vanishes at solutions.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::cross::CrossState;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{constant_steady_conserved, constant_steady_growth, ModelParams};
use crate::rd::RdState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    /// Three components without growth; continued in the mean mass `M`.
    Conserved,
    /// Three components with logistic growth; continued in `r = a1 = a2`.
    Growth,
    /// Two-component cross-diffusion limit with growth; continued in `r`.
    Limit,
}

impl System {
    pub fn parameter_name(self) -> &'static str {
        match self {
            System::Conserved => "M",
            System::Growth | System::Limit => "r",
        }
    }

    pub fn components(self) -> usize {
        match self {
            System::Limit => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyProblem {
    pub system: System,
    pub params: ModelParams,
    pub grid: Grid,
}

impl SteadyProblem {
    pub fn new(system: System, params: ModelParams, grid: Grid) -> Result<Self> {
        params.validate()?;
        if grid.dim() != 1 {
            return Err(Error::InvalidInput("steady problems are one-dimensional".into()));
        }
        if (grid.length() - params.length).abs() > 1e-12 * params.length {
            return Err(Error::InvalidInput(format!(
                "grid length {} differs from L = {}",
                grid.length(),
                params.length
            )));
        }
        Ok(Self { system, params, grid })
    }

    pub fn parameter_name(&self) -> &'static str {
        self.system.parameter_name()
    }

    pub fn cells(&self) -> usize {
        self.grid.n()
    }

    pub fn components(&self) -> usize {
        self.system.components()
    }

    /// Length of a physical state vector.
    pub fn state_len(&self) -> usize {
        self.components() * self.cells()
    }

    /// Model coefficients at parameter value `lambda`.
    pub fn params_at(&self, lambda: f64) -> ModelParams {
        match self.system {
            System::Conserved => ModelParams {
                a1: 0.0,
                a2: 0.0,
                ..self.params
            },
            System::Growth | System::Limit => self.params.with_growth(lambda),
        }
    }

    /// Spatially constant steady state at `lambda`.
    pub fn constant_state(&self, lambda: f64) -> Result<Vec<f64>> {
        let p = self.params_at(lambda);
        let cell: Vec<f64> = match self.system {
            System::Conserved => {
                let c = constant_steady_conserved(lambda, &p)?;
                vec![c.u1, c.u2, c.v]
            }
            System::Growth => {
                let c = constant_steady_growth(&p)?;
                vec![c.u1, c.u2, c.v]
            }
            System::Limit => vec![1.0, p.alpha / p.beta],
        };
        Ok(cell.iter().copied().cycle().take(self.state_len()).collect())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_len() {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, expected {}",
                x.len(),
                self.state_len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite state".into()));
        }
        Ok(())
    }

    /// Mirror image `x ↦ L - x`.
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let m = self.components();
        x.chunks(m).rev().flatten().copied().collect()
    }

    /// Density field (`u1 + u2`, or `u`).
    pub fn density(&self, x: &[f64]) -> Vec<f64> {
        match self.system {
            System::Limit => x.chunks(2).map(|c| c[0]).collect(),
            _ => x.chunks(3).map(|c| c[0] + c[1]).collect(),
        }
    }

    pub fn pheromone(&self, x: &[f64]) -> Vec<f64> {
        let m = self.components();
        x.chunks(m).map(|c| c[m - 1]).collect()
    }

    /// Spatial mean of the density.
    pub fn mean_density(&self, x: &[f64]) -> f64 {
        self.density(x).iter().sum::<f64>() / self.cells() as f64
    }

    /// Density in the first cell, the ordinate of bifurcation diagrams.
    pub fn value_at_x0(&self, x: &[f64]) -> f64 {
        self.density(x)[0]
    }

    /// Component fields of a state vector.
    pub fn fields(&self, x: &[f64]) -> Result<Vec<Field>> {
        self.check_len(x)?;
        let m = self.components();
        (0..m)
            .map(|c| self.grid.field(x.iter().skip(c).step_by(m).copied().collect()))
            .collect()
    }

    pub fn to_rd_state(&self, x: &[f64]) -> Result<RdState> {
        if self.system == System::Limit {
            return Err(Error::InvalidInput("limit states have two components".into()));
        }
        let mut f = self.fields(x)?.into_iter();
        let (u1, u2, v) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap());
        RdState::new(0.0, u1, u2, v)
    }

    pub fn to_cross_state(&self, x: &[f64]) -> Result<CrossState> {
        if self.system != System::Limit {
            return Err(Error::InvalidInput("only limit states have two components".into()));
        }
        let mut f = self.fields(x)?.into_iter();
        let (u, v) = (f.next().unwrap(), f.next().unwrap());
        CrossState::new(0.0, u, v)
    }

    pub fn from_rd_state(&self, st: &RdState) -> Result<Vec<f64>> {
        if self.system == System::Limit || st.grid() != &self.grid {
            return Err(Error::InvalidInput("state does not match the problem".into()));
        }
        let (a, b, c) = (st.u1.values(), st.u2.values(), st.v.values());
        Ok((0..self.cells()).flat_map(|i| [a[i], b[i], c[i]]).collect())
    }

    pub fn from_cross_state(&self, st: &CrossState) -> Result<Vec<f64>> {
        if self.system != System::Limit || st.grid() != &self.grid {
            return Err(Error::InvalidInput("state does not match the problem".into()));
        }
        let (a, b) = (st.u.values(), st.v.values());
        Ok((0..self.cells()).flat_map(|i| [a[i], b[i]]).collect())
    }

    fn neighbours(&self, i: usize) -> (usize, usize) {
        let n = self.cells();
        (if i == 0 { 0 } else { i - 1 }, if i + 1 == n { i } else { i + 1 })
    }

    fn diffusivities(&self) -> [f64; 3] {
        let p = &self.params;
        [p.d, p.d + p.big_d, p.d_v]
    }

    /// Steady-state residual at `lambda`, written into rows `stride * i + c`.
    fn residual_into(&self, x: &[f64], stride: usize, lambda: f64, out: &mut [f64]) {
        let p = self.params_at(lambda);
        let m = self.components();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        let at = |i: usize, c: usize| x[stride * i + c];
        match self.system {
            System::Conserved | System::Growth => {
                let coef = self.diffusivities();
                for i in 0..self.cells() {
                    let (l, r) = self.neighbours(i);
                    let rx = p.reaction(at(i, 0), at(i, 1), at(i, 2));
                    for c in 0..m {
                        let lap = (at(l, c) + at(r, c) - 2.0 * at(i, c)) * inv_h2;
                        out[stride * i + c] = coef[c] * lap + rx[c];
                    }
                }
            }
            System::Limit => {
                let flux = |i: usize| p.mobility(at(i, 1)).unwrap_or(f64::NAN) * at(i, 0);
                for i in 0..self.cells() {
                    let (l, r) = self.neighbours(i);
                    let (u, v) = (at(i, 0), at(i, 1));
                    let sw = p.switch(v);
                    let g = (p.a1 * sw.p + p.a2 * sw.q) / (sw.p + sw.q);
                    out[stride * i] = (flux(l) + flux(r) - 2.0 * flux(i)) * inv_h2 + g * (1.0 - u) * u;
                    let lap_v = (at(l, 1) + at(r, 1) - 2.0 * v) * inv_h2;
                    out[stride * i + 1] = p.d_v * lap_v + p.alpha * u - p.beta * v;
                }
            }
        }
    }

    /// Jacobian entries at rows/columns `stride * i + c`.
    fn jacobian_into(&self, x: &[f64], stride: usize, lambda: f64, jac: &mut BandMatrix) {
        let p = self.params_at(lambda);
        let m = self.components();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        let at = |i: usize, c: usize| x[stride * i + c];
        for i in 0..self.cells() {
            let (l, r) = self.neighbours(i);
            let stencil = [(l, inv_h2), (r, inv_h2), (i, -2.0 * inv_h2)];
            match self.system {
                System::Conserved | System::Growth => {
                    let coef = self.diffusivities();
                    for c in 0..m {
                        for &(j, w) in &stencil {
                            jac.add(stride * i + c, stride * j + c, coef[c] * w);
                        }
                    }
                    let rj = p.reaction_jac(at(i, 0), at(i, 1), at(i, 2));
                    for a in 0..3 {
                        for b in 0..3 {
                            jac.add(stride * i + a, stride * i + b, rj[(a, b)]);
                        }
                    }
                }
                System::Limit => {
                    for &(j, w) in &stencil {
                        let sw = p.switch(at(j, 1));
                        let sum = sw.p + sw.q;
                        let c = p.d + p.big_d * sw.q / sum;
                        let dc = p.big_d * (sw.dq * sw.p - sw.q * sw.dp) / (sum * sum);
                        jac.add(stride * i, stride * j, w * c);
                        jac.add(stride * i, stride * j + 1, w * dc * at(j, 0));
                        jac.add(stride * i + 1, stride * j + 1, p.d_v * w);
                    }
                    let (u, v) = (at(i, 0), at(i, 1));
                    let sw = p.switch(v);
                    let sum = sw.p + sw.q;
                    let g = (p.a1 * sw.p + p.a2 * sw.q) / sum;
                    let dg = ((p.a1 * sw.dp + p.a2 * sw.dq) * sum - (p.a1 * sw.p + p.a2 * sw.q) * (sw.dp + sw.dq))
                        / (sum * sum);
                    jac.add(stride * i, stride * i, g * (1.0 - 2.0 * u));
                    jac.add(stride * i, stride * i + 1, dg * (1.0 - u) * u);
                    jac.add(stride * i + 1, stride * i, p.alpha);
                    jac.add(stride * i + 1, stride * i + 1, -p.beta);
                }
            }
        }
    }

    /// Residual of the steady equations (without any mass constraint).
    pub fn residual(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = vec![0.0; x.len()];
        self.residual_into(x, self.components(), lambda, &mut out);
        Ok(out)
    }

    /// Banded Jacobian of [`SteadyProblem::residual`].
    pub fn jacobian(&self, x: &[f64], lambda: f64) -> Result<BandMatrix> {
        self.check_len(x)?;
        let m = self.components();
        let w = m + 1;
        let mut jac = BandMatrix::zeros(x.len(), w, w);
        self.jacobian_into(x, m, lambda, &mut jac);
        Ok(jac)
    }

    /// Derivative of the residual with respect to the continuation parameter.
    pub fn dresidual_dparam(&self, x: &[f64], _lambda: f64) -> Vec<f64> {
        match self.system {
            System::Conserved => vec![0.0; x.len()],
            System::Growth => x
                .chunks(3)
                .flat_map(|c| {
                    let crowd = 1.0 - c[0] - c[1];
                    [crowd * c[0], crowd * c[1], 0.0]
                })
                .collect(),
            System::Limit => x.chunks(2).flat_map(|c| [(1.0 - c[0]) * c[0], 0.0]).collect(),
        }
    }

    // ---- augmented formulation used by the solvers ----

    fn aug_stride(&self) -> usize {
        match self.system {
            System::Conserved => 4,
            _ => self.components(),
        }
    }

    pub(crate) fn aug_len(&self) -> usize {
        match self.system {
            System::Conserved => 4 * self.cells() + 1,
            _ => self.state_len(),
        }
    }

    pub(crate) fn to_aug(&self, x: &[f64]) -> Vec<f64> {
        match self.system {
            System::Conserved => {
                let h = self.grid.h();
                let mut out = Vec::with_capacity(self.aug_len());
                let mut s = 0.0;
                for c in x.chunks(3) {
                    s += h * (c[0] + c[1]);
                    out.extend_from_slice(&[c[0], c[1], c[2], s]);
                }
                out.push(0.0);
                out
            }
            _ => x.to_vec(),
        }
    }

    pub(crate) fn from_aug(&self, xa: &[f64]) -> Vec<f64> {
        match self.system {
            System::Conserved => xa[..4 * self.cells()]
                .chunks(4)
                .flat_map(|c| [c[0], c[1], c[2]])
                .collect(),
            _ => xa.to_vec(),
        }
    }

    /// Weights of the arclength inner product: mean-square over the physical
    /// entries, nothing on the auxiliary ones.
    pub(crate) fn aug_weights(&self) -> Vec<f64> {
        let w = 1.0 / self.cells() as f64;
        match self.system {
            System::Conserved => {
                let mut out: Vec<f64> = (0..4 * self.cells())
                    .map(|k| if k % 4 == 3 { 0.0 } else { w })
                    .collect();
                out.push(0.0);
                out
            }
            _ => vec![w; self.state_len()],
        }
    }

    pub(crate) fn aug_residual(&self, xa: &[f64], lambda: f64) -> Vec<f64> {
        let stride = self.aug_stride();
        let mut out = vec![0.0; xa.len()];
        self.residual_into(xa, stride, lambda, &mut out);
        if self.system == System::Conserved {
            let n = self.cells();
            let h = self.grid.h();
            let mu = xa[4 * n];
            out[4 * (n - 1)] += mu;
            let mut prev = 0.0;
            for i in 0..n {
                let s = xa[4 * i + 3];
                out[4 * i + 3] = s - prev - h * (xa[4 * i] + xa[4 * i + 1]);
                prev = s;
            }
            out[4 * n] = prev - lambda * self.grid.length();
        }
        out
    }

    pub(crate) fn aug_jacobian(&self, xa: &[f64], lambda: f64) -> BandMatrix {
        let stride = self.aug_stride();
        let w = match self.system {
            System::Conserved => 4,
            _ => stride + 1,
        };
        let mut jac = BandMatrix::zeros(xa.len(), w, w);
        self.jacobian_into(xa, stride, lambda, &mut jac);
        if self.system == System::Conserved {
            let n = self.cells();
            let h = self.grid.h();
            jac.add(4 * (n - 1), 4 * n, 1.0);
            for i in 0..n {
                let row = 4 * i + 3;
                jac.add(row, row, 1.0);
                if i > 0 {
                    jac.add(row, row - 4, -1.0);
                }
                jac.add(row, 4 * i, -h);
                jac.add(row, 4 * i + 1, -h);
            }
            jac.add(4 * n, 4 * n - 1, 1.0);
        }
        jac
    }

    pub(crate) fn aug_dparam(&self, xa: &[f64], lambda: f64) -> Vec<f64> {
        match self.system {
            System::Conserved => {
                let mut out = vec![0.0; xa.len()];
                out[4 * self.cells()] = -self.grid.length();
                out
            }
            _ => self.dresidual_dparam(xa, lambda),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(system: System, n: usize) -> SteadyProblem {
        SteadyProblem::new(system, ModelParams::default(), Grid::line(n, 1.0).unwrap()).unwrap()
    }

    fn wavy(pb: &SteadyProblem, seed: f64) -> Vec<f64> {
        let base = pb.constant_state(1.0).unwrap();
        base.iter()
            .enumerate()
            .map(|(k, b)| b * (1.0 + 0.2 * ((k as f64 + 1.0) * 0.37 * seed).sin()))
            .collect()
    }

    fn fd_check(pb: &SteadyProblem, x: &[f64], lambda: f64) {
        let jac = pb.jacobian(x, lambda).unwrap();
        let n = x.len();
        let h = 1e-6;
        for col in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[col] += h;
            xm[col] -= h;
            let fp = pb.residual(&xp, lambda).unwrap();
            let fm = pb.residual(&xm, lambda).unwrap();
            for row in 0..n {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let ex = jac.get(row, col);
                let scale = ex.abs().max(1.0);
                assert!(
                    (fd - ex).abs() <= 1e-5 * scale.max(fd.abs()) * 10.0,
                    "{:?} ({row},{col}): {ex} vs {fd}",
                    pb.system
                );
            }
        }
        let fp = pb.residual(x, lambda + h).unwrap();
        let fm = pb.residual(x, lambda - h).unwrap();
        let dp = pb.dresidual_dparam(x, lambda);
        for row in 0..n {
            assert!(((fp[row] - fm[row]) / (2.0 * h) - dp[row]).abs() < 1e-6);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for system in [System::Conserved, System::Growth, System::Limit] {
            let pb = problem(system, 10);
            let x = wavy(&pb, 1.0);
            fd_check(&pb, &x, 1.3);
        }
    }

    #[test]
    fn augmented_jacobian_matches_finite_differences() {
        let pb = problem(System::Conserved, 10);
        let xa = pb.to_aug(&wavy(&pb, 2.0));
        let jac = pb.aug_jacobian(&xa, 1.0);
        let h = 1e-6;
        for col in 0..xa.len() {
            let mut xp = xa.clone();
            let mut xm = xa.clone();
            xp[col] += h;
            xm[col] -= h;
            let fp = pb.aug_residual(&xp, 1.0);
            let fm = pb.aug_residual(&xm, 1.0);
            for row in 0..xa.len() {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let ex = jac.get(row, col);
                assert!(
                    (fd - ex).abs() <= 1e-4 * ex.abs().max(1.0),
                    "({row},{col}): {ex} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn constant_states_solve_the_augmented_system() {
        let pb = problem(System::Conserved, 16);
        for mass in [0.5, 1.0, 1.7] {
            let xa = pb.to_aug(&pb.constant_state(mass).unwrap());
            let r = pb.aug_residual(&xa, mass);
            assert!(r.iter().all(|v| v.abs() < 1e-11), "{mass}");
        }
        for system in [System::Growth, System::Limit] {
            let pb = problem(system, 16);
            let x = pb.constant_state(0.8).unwrap();
            assert!(pb.residual(&x, 0.8).unwrap().iter().all(|v| v.abs() < 1e-11));
        }
    }

    #[test]
    fn conserved_residual_has_no_mass_component() {
        let pb = problem(System::Conserved, 32);
        let x = wavy(&pb, 3.0);
        let r = pb.residual(&x, 1.0).unwrap();
        let total: f64 = r.chunks(3).map(|c| c[0] + c[1]).sum();
        let scale: f64 = r.iter().map(|v| v.abs()).sum();
        assert!(total.abs() <= 1e-13 * scale);
    }

    proptest! {
        #[test]
        fn reflection_commutes_with_residual(seed in 0.1f64..10.0, lambda in 0.3f64..2.0) {
            for system in [System::Conserved, System::Growth, System::Limit] {
                let pb = problem(system, 24);
                let x = wavy(&pb, seed);
                let lhs = pb.residual(&pb.reflect(&x), lambda).unwrap();
                let rhs = pb.reflect(&pb.residual(&x, lambda).unwrap());
                prop_assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn augmented_round_trip() {
        let pb = problem(System::Conserved, 12);
        let x = wavy(&pb, 1.5);
        assert_eq!(pb.from_aug(&pb.to_aug(&x)), x);
        let xa = pb.to_aug(&x);
        assert!((xa[4 * 12 - 1] - pb.mean_density(&x) * 1.0).abs() < 1e-14);
    }
}
