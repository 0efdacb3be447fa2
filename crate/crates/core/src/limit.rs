//! Fast-reaction limit checks: ε-sweeps of the three-component system against
//! the two-component cross-diffusion system, log-log slope fits, and distances
//! between steady branches.

use serde::{Deserialize, Serialize};

use crate::continuation::Branch;
use crate::cross::{run_cross, CrossState};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::noise::uniform_field;
use crate::rd::{defect_norm, run, RdState, RunSpec, StepControl};

/// How the initial total density is divided between the two groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// On the slow manifold `q u1 = p u2`.
    #[default]
    Manifold,
    /// Half and half.
    Even,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Cells of the 1D grid.
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Strictly decreasing exchange timescales.
    pub eps: Vec<f64>,
    /// Growth rate `r = a1 = a2`.
    pub growth: f64,
    /// Relative amplitude of the noise added to the constant pheromone level.
    pub noise_amplitude: f64,
    pub seed: u64,
    pub split: Split,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 128,
            dt: 1e-5,
            t_end: 1.0,
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            growth: 1.0,
            noise_amplitude: 0.1,
            seed: 20240611,
            split: Split::Manifold,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.len() < 3 {
            return Err(Error::param("eps", "need at least three values"));
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::param("eps", "values must be positive"));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("eps", "values must be strictly decreasing"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "must be positive"));
        }
        if self.n < 4 {
            return Err(Error::param("n", "need at least 4 cells"));
        }
        if !(self.growth >= 0.0) {
            return Err(Error::param("growth", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.noise_amplitude) {
            return Err(Error::param("noise_amplitude", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Final-time norms for one ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    /// `‖(u1 + u2) - u‖` in L².
    pub gap_u: f64,
    /// `‖v^ε - v‖` in L².
    pub gap_v: f64,
    /// `‖q(v) u1 - p(v) u2‖` in L².
    pub defect: f64,
    /// `‖u1 - p(v)(u1 + u2)/(p + q)‖` in L².
    pub slow_split: f64,
}

/// Log-log slopes of each norm against ε; `None` when fewer than three rows succeeded
/// or a norm vanished.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slopes {
    pub gap_u: Option<f64>,
    pub gap_v: Option<f64>,
    pub defect: Option<f64>,
    pub slow_split: Option<f64>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// ε values whose run failed, with the error.
    pub failures: Vec<(f64, Error)>,
    pub slopes: Slopes,
}

impl SweepReport {
    /// Both gap norms strictly decrease along the ε list (all runs must have succeeded).
    pub fn gaps_strictly_decrease(&self) -> bool {
        self.failures.is_empty()
            && self
                .rows
                .windows(2)
                .all(|w| w[1].gap_u < w[0].gap_u && w[1].gap_v < w[0].gap_v)
    }

    /// The last slow-split residual is at most a tenth of the first and at most ten
    /// times the power law fitted to the others predicts.
    pub fn slow_split_consistent(&self) -> bool {
        let rows = &self.rows;
        if rows.len() < 4 || !self.failures.is_empty() {
            return false;
        }
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        let head: Vec<(f64, f64)> = rows[..rows.len() - 1].iter().map(|r| (r.eps, r.slow_split)).collect();
        let Ok((slope, intercept)) = log_fit(&head) else {
            return false;
        };
        let predicted = (intercept + slope * last.eps.ln()).exp();
        last.slow_split <= first.slow_split / 10.0 && last.slow_split <= 10.0 * predicted
    }
}

fn log_fit(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", pairs.len())));
    }
    if let Some(&(x, y)) = pairs
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::Fit(format!("nonpositive pair ({x}, {y})")));
    }
    let n = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Least-squares slope of `ln value` against `ln eps`.
pub fn slope_fit(pairs: &[(f64, f64)]) -> Result<f64> {
    log_fit(pairs).map(|(s, _)| s)
}

/// Shared initial data: constant total density 1 and pheromone `α/β (1 + noise)`.
pub fn sweep_initial(params: &ModelParams, cfg: &SweepConfig) -> Result<(RdState, CrossState)> {
    let grid = Grid::line(cfg.n, params.length)?;
    let noise = uniform_field(&grid, cfg.seed, 0);
    let level = params.alpha / params.beta;
    let v = noise.map(|z| level * (1.0 + cfg.noise_amplitude * z));
    let u = grid.constant(1.0);
    let fraction = match cfg.split {
        Split::Manifold => v
            .values()
            .iter()
            .map(|&x| params.slow_fraction(x))
            .collect::<Result<Vec<_>>>()?,
        Split::Even => vec![0.5; grid.cells()],
    };
    let u2 = Field::new(grid, fraction.iter().map(|f| 1.0 - f).collect())?;
    let u1 = Field::new(grid, fraction)?;
    Ok((RdState::new(0.0, u1, u2, v.clone())?, CrossState::new(0.0, u, v)?))
}

fn row(eps: f64, st: &RdState, limit: &CrossState, params: &ModelParams) -> Result<SweepRow> {
    let gap_u = st.total().zip_map(&limit.u, |a, b| a - b).norm_l2();
    let gap_v = st.v.zip_map(&limit.v, |a, b| a - b).norm_l2();
    let mut split = st.u1.clone();
    for ((s, &tot), &v) in split
        .values_mut()
        .iter_mut()
        .zip(st.total().values())
        .zip(st.v.values())
    {
        let sw = params.switch(v);
        *s -= sw.p * tot / (sw.p + sw.q);
    }
    Ok(SweepRow {
        eps,
        gap_u,
        gap_v,
        defect: defect_norm(st, params),
        slow_split: split.norm_l2(),
    })
}

/// Runs the three-component system for every ε and the limit system once, all
/// concurrently, and compares them at the final time.
pub fn eps_sweep(params: &ModelParams, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let base = params.with_growth(cfg.growth);
    base.validate()?;
    let (rd0, cross0) = sweep_initial(&base, cfg)?;
    let spec = RunSpec {
        t_end: cfg.t_end,
        snapshot_times: Vec::new(),
        series_every: usize::MAX,
    };
    let ctrl = StepControl::new(cfg.dt);

    let (limit, runs) = std::thread::scope(|s| {
        let limit = s.spawn(|| run_cross(&base, cfg.dt, &spec, cross0.clone()).map(|t| t.last));
        let handles: Vec<_> = cfg
            .eps
            .iter()
            .map(|&eps| {
                let p = ModelParams { eps, ..base };
                let init = rd0.clone();
                let spec = &spec;
                s.spawn(move || run(&p, ctrl, spec, init).map(|t| t.last))
            })
            .collect();
        let runs: Vec<Result<RdState>> = handles
            .into_iter()
            .map(|h| h.join().expect("sweep thread panicked"))
            .collect();
        (limit.join().expect("limit thread panicked"), runs)
    });
    let limit = limit?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&eps, outcome) in cfg.eps.iter().zip(runs) {
        match outcome.and_then(|st| row(eps, &st, &limit, &ModelParams { eps, ..base })) {
            Ok(r) => rows.push(r),
            Err(e) => failures.push((eps, e)),
        }
    }
    let fit = |f: fn(&SweepRow) -> f64| slope_fit(&rows.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>()).ok();
    let slopes = Slopes {
        gap_u: fit(|r| r.gap_u),
        gap_v: fit(|r| r.gap_v),
        defect: fit(|r| r.defect),
        slow_split: fit(|r| r.slow_split),
    };
    Ok(SweepReport { rows, failures, slopes })
}

/// Distance between density profiles of an ε-branch and the limit branch at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchDistance {
    pub eps: f64,
    pub parameter: f64,
    /// Which crossing of the parameter value, counted along arclength.
    pub crossing: usize,
    pub distance: f64,
}

fn density_of(branch: &Branch, state: &[f64]) -> Vec<f64> {
    let m = branch.system.components();
    state
        .chunks(m)
        .map(|c| if m == 3 { c[0] + c[1] } else { c[0] })
        .collect()
}

/// Densities interpolated at every crossing of `at`, ordered along arclength.
fn crossings(branch: &Branch, at: f64) -> Vec<Vec<f64>> {
    let side = |p: f64| p >= at;
    branch
        .points
        .windows(2)
        .filter(|w| side(w[0].parameter) != side(w[1].parameter))
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let theta = (at - a.parameter) / (b.parameter - a.parameter);
            density_of(branch, &a.state)
                .iter()
                .zip(density_of(branch, &b.state))
                .map(|(x, y)| (1.0 - theta) * x + theta * y)
                .collect()
        })
        .collect()
}

/// L² distances between `u1 + u2` on each ε-branch and `u` on the limit branch at
/// the parameter values `at`. Crossings are paired in arclength order.
pub fn steady_structure_compare(
    grid: &Grid,
    eps_branches: &[(f64, Branch)],
    limit: &Branch,
    at: &[f64],
) -> Result<Vec<BranchDistance>> {
    let mut out = Vec::new();
    for &x in at {
        let reference = crossings(limit, x);
        if reference.is_empty() {
            return Err(Error::Alignment(format!("limit branch does not reach parameter {x}")));
        }
        for (eps, branch) in eps_branches {
            let profiles = crossings(branch, x);
            if profiles.len() != reference.len() {
                return Err(Error::Alignment(format!(
                    "branch for eps = {eps} crosses {x} {} times, limit branch {} times",
                    profiles.len(),
                    reference.len()
                )));
            }
            for (k, (p, r)) in profiles.iter().zip(&reference).enumerate() {
                if p.len() != grid.cells() || r.len() != grid.cells() {
                    return Err(Error::Alignment("branch states do not match the grid".into()));
                }
                let sq: f64 = p.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(BranchDistance {
                    eps: *eps,
                    parameter: x,
                    crossing: k,
                    distance: (sq * grid.cell_volume()).sqrt(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pairs: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e: &f64| (e, 3.0 * e.sqrt()))
            .collect();
        assert!((slope_fit(&pairs).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_of_constant_data_is_zero() {
        let pairs = [(1e-1, 2.0), (1e-2, 2.0), (1e-3, 2.0)];
        assert!(slope_fit(&pairs).unwrap().abs() < 1e-14);
    }

    #[test]
    fn slope_of_affine_data_matches_direct_least_squares() {
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let pairs: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 3.0 * e + 0.01)).collect();
        // normal equations for y = a + b x in log coordinates, solved by Cramer's rule
        let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let slope = slope_fit(&pairs).unwrap();
        assert!((slope - oracle).abs() < 1e-12);
        assert!(slope > 0.0 && slope < 1.0);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(slope_fit(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::Fit(_))));
        assert!(matches!(
            slope_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            slope_fit(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn config_validation_names_the_key() {
        let bad = SweepConfig {
            eps: vec![1e-2, 1e-1, 1e-3],
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { name: "eps", .. })
        ));
        let short = SweepConfig {
            eps: vec![1e-1, 1e-2],
            ..Default::default()
        };
        assert!(matches!(
            short.validate(),
            Err(Error::InvalidParameter { name: "eps", .. })
        ));
        let dt = SweepConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(matches!(dt.validate(), Err(Error::InvalidParameter { name: "dt", .. })));
    }

    #[test]
    fn manifold_split_has_no_defect() {
        let p = ModelParams::default().with_growth(1.0);
        let (rd, cross) = sweep_initial(
            &p,
            &SweepConfig {
                n: 32,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(defect_norm(&rd, &p) < 1e-14);
        let total = rd.total();
        for (a, b) in total.values().iter().zip(cross.u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn short_sweep_rows_are_ordered_and_nonnegative() {
        let cfg = SweepConfig {
            n: 16,
            dt: 1e-4,
            t_end: 0.05,
            eps: vec![1e-1, 1e-2, 1e-3],
            ..Default::default()
        };
        let report = eps_sweep(&ModelParams::default(), &cfg).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.rows.len(), 3);
        for (r, e) in report.rows.iter().zip(&cfg.eps) {
            assert_eq!(r.eps, *e);
            assert!(r.gap_u >= 0.0 && r.gap_v >= 0.0 && r.defect >= 0.0 && r.slow_split >= 0.0);
        }
        assert!(report.slopes.defect.is_some());
    }
}
