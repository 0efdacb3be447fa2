//! Model coefficients, switching functions and pointwise reaction kinetics.
//!
//! The three-component system for slow movers `u1`, fast movers `u2` and
//! pheromone `v` reads
//!
//! ```text
//! u1_t = d Δu1       + a1 (1 - u1 - u2) u1 - (q(v) u1 - p(v) u2) / eps
//! u2_t = (d + D) Δu2 + a2 (1 - u1 - u2) u2 + (q(v) u1 - p(v) u2) / eps
//! v_t  = D_v Δv      + alpha (u1 + u2) - beta v
//! ```
//!
//! with homogeneous Neumann boundary conditions.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the switching rate `q(v)` (and `p = 1 - q`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchingKind {
    /// `q = q1 + q2`: dispersal at low and at high pheromone levels.
    #[default]
    TanhSum,
    /// `q = q1` only: no crowding response.
    DecreasingOnly,
    /// `q = q1` below the crossing point of `q1` and `q2`, `q2` above it.
    Piecewise,
}

/// Scalar coefficients of the model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Diffusivity of the slow group.
    pub d: f64,
    /// Extra diffusivity of the fast group (its total diffusivity is `d + D`).
    #[serde(rename = "D")]
    pub big_d: f64,
    /// Pheromone diffusivity.
    #[serde(rename = "D_v")]
    pub d_v: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Conversion timescale; the exchange rate is `1/eps`.
    pub eps: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub v_star: f64,
    pub v_sharp: f64,
    /// Domain length (side length of the square in 2D).
    #[serde(rename = "L")]
    pub length: f64,
    pub switching: SwitchingKind,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            d: 0.05,
            big_d: 0.15,
            d_v: 0.1,
            a1: 0.0,
            a2: 0.0,
            alpha: 1.0,
            beta: 1.0,
            eps: 1e-3,
            gamma1: 20.0,
            gamma2: 20.0,
            v_star: 1.0,
            v_sharp: 1.25,
            length: 1.0,
            switching: SwitchingKind::TanhSum,
        }
    }
}

/// Values and first derivatives of the switching pair at one pheromone level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub q: f64,
    pub p: f64,
    pub dq: f64,
    pub dp: f64,
}

/// Spatially constant steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantState {
    pub u1: f64,
    pub u2: f64,
    pub v: f64,
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("D", self.big_d),
            ("D_v", self.d_v),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps", self.eps),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("v_star", self.v_star),
            ("L", self.length),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(name, format!("must be positive and finite, got {value}")));
            }
        }
        for (name, value) in [("a1", self.a1), ("a2", self.a2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::param(name, format!("must be nonnegative, got {value}")));
            }
        }
        if !(self.v_sharp.is_finite() && self.v_sharp > self.v_star) {
            return Err(Error::param(
                "v_sharp",
                format!("must exceed v_star = {}, got {}", self.v_star, self.v_sharp),
            ));
        }
        Ok(())
    }

    /// Copy with both growth rates set to `r`.
    pub fn with_growth(mut self, r: f64) -> Self {
        self.a1 = r;
        self.a2 = r;
        self
    }

    fn q1(&self, v: f64) -> f64 {
        0.5 * (1.0 - (self.gamma1 * (v - self.v_star)).tanh())
    }

    fn q2(&self, v: f64) -> f64 {
        0.5 * (1.0 + (self.gamma2 * (v - self.v_sharp)).tanh())
    }

    fn dq1(&self, v: f64) -> f64 {
        -0.5 * self.gamma1 * sech2(self.gamma1 * (v - self.v_star))
    }

    fn dq2(&self, v: f64) -> f64 {
        0.5 * self.gamma2 * sech2(self.gamma2 * (v - self.v_sharp))
    }

    /// Crossing point of the two tanh branches, between `v_star` and `v_sharp`.
    pub fn breakpoint(&self) -> f64 {
        let (mut lo, mut hi) = (self.v_star, self.v_sharp);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.q1(mid) - self.q2(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Switching pair at `v`. No domain check; see [`eval_q`] for the checked form.
    pub fn switch(&self, v: f64) -> Switch {
        let (q, dq) = match self.switching {
            SwitchingKind::TanhSum => (self.q1(v) + self.q2(v), self.dq1(v) + self.dq2(v)),
            SwitchingKind::DecreasingOnly => (self.q1(v), self.dq1(v)),
            SwitchingKind::Piecewise => {
                if v <= self.breakpoint() {
                    (self.q1(v), self.dq1(v))
                } else {
                    (self.q2(v), self.dq2(v))
                }
            }
        };
        Switch {
            q,
            p: 1.0 - q,
            dq,
            dp: -dq,
        }
    }

    /// Fraction of the total density sitting in the slow group on the slow manifold.
    pub fn slow_fraction(&self, v: f64) -> Result<f64> {
        let s = self.switch(v);
        let sum = s.p + s.q;
        if !(sum > 0.0) {
            return Err(Error::DegenerateState { v, sum });
        }
        Ok(s.p / sum)
    }

    /// Cross-diffusion mobility `d + D q/(p+q)` of the limit system.
    pub fn mobility(&self, v: f64) -> Result<f64> {
        Ok(self.d + self.big_d * (1.0 - self.slow_fraction(v)?))
    }

    /// Reaction terms without input checks; used in the inner loops.
    #[inline]
    pub fn reaction(&self, u1: f64, u2: f64, v: f64) -> [f64; 3] {
        let s = self.switch(v);
        let exchange = (s.q * u1 - s.p * u2) / self.eps;
        let crowd = 1.0 - u1 - u2;
        [
            self.a1 * crowd * u1 - exchange,
            self.a2 * crowd * u2 + exchange,
            self.alpha * (u1 + u2) - self.beta * v,
        ]
    }

    /// Jacobian of [`ModelParams::reaction`] with respect to `(u1, u2, v)`.
    pub fn reaction_jac(&self, u1: f64, u2: f64, v: f64) -> Matrix3<f64> {
        let s = self.switch(v);
        let inv = 1.0 / self.eps;
        let crowd = 1.0 - u1 - u2;
        let dv = (s.dq * u1 - s.dp * u2) * inv;
        Matrix3::new(
            self.a1 * (crowd - u1) - s.q * inv,
            -self.a1 * u1 + s.p * inv,
            -dv,
            -self.a2 * u2 + s.q * inv,
            self.a2 * (crowd - u2) - s.p * inv,
            dv,
            self.alpha,
            self.alpha,
            -self.beta,
        )
    }
}

fn check_density(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!("{name} must be nonnegative and finite, got {x}")));
    }
    Ok(())
}

/// Switching rate slow → fast.
pub fn eval_q(v: f64, params: &ModelParams) -> Result<f64> {
    check_density("v", v)?;
    Ok(params.switch(v).q)
}

/// Switching rate fast → slow.
pub fn eval_p(v: f64, params: &ModelParams) -> Result<f64> {
    check_density("v", v)?;
    Ok(params.switch(v).p)
}

pub fn reaction_terms(u1: f64, u2: f64, v: f64, params: &ModelParams) -> Result<[f64; 3]> {
    check_density("u1", u1)?;
    check_density("u2", u2)?;
    check_density("v", v)?;
    Ok(params.reaction(u1, u2, v))
}

pub fn reaction_jacobian(u1: f64, u2: f64, v: f64, params: &ModelParams) -> Result<Matrix3<f64>> {
    check_density("u1", u1)?;
    check_density("u2", u2)?;
    check_density("v", v)?;
    Ok(params.reaction_jac(u1, u2, v))
}

/// Constant steady state of the mass-conserving system with mean total density `mass`.
pub fn constant_steady_conserved(mass: f64, params: &ModelParams) -> Result<ConstantState> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::param("M", format!("must be positive, got {mass}")));
    }
    let v = params.alpha / params.beta * mass;
    let frac = params.slow_fraction(v)?;
    Ok(ConstantState {
        u1: frac * mass,
        u2: (1.0 - frac) * mass,
        v,
    })
}

/// The unique constant steady state of the system with logistic growth.
pub fn constant_steady_growth(params: &ModelParams) -> Result<ConstantState> {
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(Error::param("alpha", "alpha and beta must be positive"));
    }
    let v = params.alpha / params.beta;
    let frac = params.slow_fraction(v)?;
    Ok(ConstantState {
        u1: frac,
        u2: 1.0 - frac,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    // Independent scalar oracle: the tanh formulas written out long-hand.
    fn q_oracle(v: f64) -> f64 {
        0.5 * (1.0 - (20.0 * (v - 1.0)).tanh()) + 0.5 * (1.0 + (20.0 * (v - 1.25)).tanh())
    }

    #[test]
    fn q_at_thresholds() {
        let p = params();
        let expected = 0.5 + 0.5 * (1.0 - 5f64.tanh());
        assert_relative_eq!(eval_q(1.0, &p).unwrap(), expected, max_relative = 1e-14);
        assert!((eval_q(1.0, &p).unwrap() - 0.5000454).abs() < 1e-7);
        assert!((eval_q(1.25, &p).unwrap() - 0.5000454).abs() < 1e-7);
        assert_relative_eq!(
            eval_q(1.0, &p).unwrap(),
            eval_q(1.25, &p).unwrap(),
            max_relative = 1e-14
        );
        assert!((eval_p(1.0, &p).unwrap() - 0.4999546).abs() < 1e-7);
    }

    #[test]
    fn q_saturates_at_zero() {
        let mut p = params();
        p.gamma1 = 400.0;
        assert!((eval_q(0.0, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p_vanishes_at_high_pheromone() {
        assert!(eval_p(5.0, &params()).unwrap().abs() < 1e-30);
    }

    #[test]
    fn negative_v_is_a_domain_error() {
        assert!(matches!(eval_q(-0.1, &params()), Err(Error::Domain(_))));
        assert!(matches!(eval_p(-1e-300, &params()), Err(Error::Domain(_))));
        assert!(reaction_terms(0.5, -1.0, 1.0, &params()).is_err());
    }

    #[test]
    fn q_minimum_sits_between_thresholds() {
        let p = params();
        let q_mid = eval_q(1.125, &p).unwrap();
        for i in 0..=30_000 {
            let v = 3.0 * i as f64 / 30_000.0;
            assert!(eval_q(v, &p).unwrap() >= q_mid - 1e-15, "q({v}) below q(1.125)");
        }
    }

    #[test]
    fn p_plus_q_is_one() {
        let mut p = params();
        for kind in [
            SwitchingKind::TanhSum,
            SwitchingKind::DecreasingOnly,
            SwitchingKind::Piecewise,
        ] {
            p.switching = kind;
            for i in 0..1_000_000 {
                // deterministic low-discrepancy sweep of [0, 10]
                let v = 10.0 * ((i as f64 * 0.618_033_988_749_895) % 1.0);
                let s = p.switch(v);
                assert!((s.p + s.q - 1.0).abs() <= f64::EPSILON, "{kind:?} at v={v}");
                assert!(s.q >= 0.0 && s.q <= 2.0);
            }
        }
    }

    #[test]
    fn piecewise_is_continuous_at_breakpoint() {
        let mut p = params();
        p.switching = SwitchingKind::Piecewise;
        let b = p.breakpoint();
        assert_relative_eq!(b, 1.125, epsilon = 1e-12);
        let left = p.switch(b - 1e-9).q;
        let right = p.switch(b + 1e-9).q;
        assert!((left - right).abs() < 1e-6);
        assert!(p.switch(0.0).q > 0.99 && p.switch(3.0).q > 0.99);
    }

    #[test]
    fn reaction_special_states() {
        let p = params();
        let r = reaction_terms(0.0, 0.0, 1.0, &p).unwrap();
        assert_eq!(r, [0.0, 0.0, -1.0]);

        let r = reaction_terms(1.0, 0.0, 1.0, &p).unwrap();
        let q1 = q_oracle(1.0);
        assert_relative_eq!(r[0], -q1 / 1e-3, max_relative = 1e-13);
        assert_relative_eq!(r[1], q1 / 1e-3, max_relative = 1e-13);
        assert!((r[0] + 500.045).abs() < 1e-3);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn jacobian_exchange_block() {
        let p = params();
        let j = reaction_jacobian(0.0, 0.0, 1.3, &p).unwrap();
        assert_eq!(j[(0, 2)], 0.0);
        assert_eq!(j[(1, 2)], 0.0);

        let j = reaction_jacobian(0.3, 0.6, 1.1, &p).unwrap();
        let s = p.switch(1.1);
        let block = j.fixed_view::<2, 2>(0, 0).into_owned();
        let eig = block.complex_eigenvalues();
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(re[0], -(s.p + s.q) / p.eps, max_relative = 1e-12);
        assert!(re[1].abs() < 1e-9);
    }

    fn fd_jacobian(p: &ModelParams, x: [f64; 3]) -> Matrix3<f64> {
        let h = 1e-6;
        let mut m = Matrix3::zeros();
        for c in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let fp = p.reaction(xp[0], xp[1], xp[2]);
            let fm = p.reaction(xm[0], xm[1], xm[2]);
            for r in 0..3 {
                m[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        m
    }

    proptest! {
        #[test]
        fn jacobian_matches_central_differences(
            u1 in 0.01f64..2.0, u2 in 0.01f64..2.0, v in 0.01f64..3.0,
            a1 in 0.0f64..2.0, a2 in 0.0f64..2.0,
        ) {
            let p = ModelParams { a1, a2, ..params() };
            let exact = reaction_jacobian(u1, u2, v, &p).unwrap();
            let fd = fd_jacobian(&p, [u1, u2, v]);
            let scale = exact.abs().max().max(1.0);
            for (e, f) in exact.iter().zip(fd.iter()) {
                prop_assert!((e - f).abs() <= 1e-5 * scale.max(e.abs()), "{} vs {}", e, f);
            }
        }

        #[test]
        fn exchange_conserves_total(u1 in 0.0f64..3.0, u2 in 0.0f64..3.0, v in 0.0f64..4.0) {
            let r = params().reaction(u1, u2, v);
            prop_assert!((r[0] + r[1]).abs() <= 1e-12 * (r[0].abs() + 1.0));
        }
    }

    #[test]
    fn conserved_steady_state() {
        let p = params();
        let s = constant_steady_conserved(1.0, &p).unwrap();
        assert_relative_eq!(s.v, 1.0);
        assert!((s.u1 - 0.4999546).abs() < 1e-7);
        assert!((s.u2 - 0.5000454).abs() < 1e-7);
        for m in [0.5, 1.0, 1.5] {
            let s = constant_steady_conserved(m, &p).unwrap();
            let r = p.reaction(s.u1, s.u2, s.v);
            assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
        }
        let small = constant_steady_conserved(1e-3, &p).unwrap();
        assert!(small.u1 < 1e-12 && (small.u2 - 1e-3).abs() < 1e-12);
        assert!(constant_steady_conserved(0.0, &p).is_err());
    }

    #[test]
    fn growth_steady_state() {
        let p = params();
        let g = constant_steady_growth(&p).unwrap();
        let c = constant_steady_conserved(1.0, &p).unwrap();
        assert_relative_eq!(g.u1, c.u1, max_relative = 1e-15);
        assert_relative_eq!(g.u2, c.u2, max_relative = 1e-15);
        for (a1, a2) in [(1.0, 1.0), (1.0, 0.5)] {
            let p = ModelParams { a1, a2, ..params() };
            let s = constant_steady_growth(&p).unwrap();
            let r = p.reaction(s.u1, s.u2, s.v);
            assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
        }
        let p = ModelParams {
            switching: SwitchingKind::DecreasingOnly,
            ..params()
        };
        let s = constant_steady_growth(&p).unwrap();
        assert_eq!(s.u1, 0.5);
        assert_eq!(s.u2, 0.5);
    }

    #[test]
    fn validation_names_the_key() {
        let bad = ModelParams { eps: 0.0, ..params() };
        match bad.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "eps"),
            other => panic!("{other:?}"),
        }
        let bad = ModelParams {
            v_sharp: 0.9,
            ..params()
        };
        assert!(bad.validate().is_err());
    }
}
