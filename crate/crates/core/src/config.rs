//! Run configuration: a TOML document with flat sections, every key optional
//! and unknown keys rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::continuation::ContinuationControl;
use crate::cross::CrossState;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::limit::SweepConfig;
use crate::linstab::{Scan, Which};
use crate::model::{constant_steady_conserved, constant_steady_growth, ModelParams, SwitchingKind};
use crate::noise::uniform_field;
use crate::rd::{RdState, RunSpec, Scheme, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Three components without growth.
    #[default]
    Rd3Conserved,
    /// Three components with logistic growth.
    Rd3Growth,
    /// Two-component cross-diffusion limit.
    CrossLimit,
}

impl ModelKind {
    pub fn which(self) -> Which {
        match self {
            ModelKind::Rd3Conserved => Which::Conserved,
            _ => Which::Growth,
        }
    }
}

/// `[model]`: model selector and coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// Mean total density of the conserved system.
    #[serde(rename = "M")]
    pub mass: f64,
    /// Shorthand for `a1 = a2 = r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub d: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    #[serde(rename = "D_v")]
    pub d_v: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub v_star: f64,
    pub v_sharp: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub switching: SwitchingKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            kind: ModelKind::default(),
            mass: 1.0,
            r: None,
            d: p.d,
            big_d: p.big_d,
            d_v: p.d_v,
            a1: p.a1,
            a2: p.a2,
            alpha: p.alpha,
            beta: p.beta,
            eps: p.eps,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            v_star: p.v_star,
            v_sharp: p.v_sharp,
            length: p.length,
            switching: p.switching,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ModelParams {
        let p = ModelParams {
            d: self.d,
            big_d: self.big_d,
            d_v: self.d_v,
            a1: self.a1,
            a2: self.a2,
            alpha: self.alpha,
            beta: self.beta,
            eps: self.eps,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            v_star: self.v_star,
            v_sharp: self.v_sharp,
            length: self.length,
            switching: self.switching,
        };
        match self.r {
            Some(r) => p.with_growth(r),
            None => p,
        }
    }

    fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::param("M", format!("must be positive, got {}", self.mass)));
        }
        if self.kind == ModelKind::Rd3Conserved
            && (self.a1 != 0.0 || self.a2 != 0.0 || self.r.is_some_and(|r| r != 0.0))
        {
            return Err(Error::param(
                "a1",
                "the conserved model has no growth; use kind = \"rd3-growth\"",
            ));
        }
        Ok(())
    }
}

/// `[grid]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Cells per side.
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: 1, n: 256 }
    }
}

/// `[time]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot times; empty means the final time only.
    pub snapshots: Vec<f64>,
    /// Steps between time-series rows.
    pub series_every: usize,
    pub scheme: Scheme,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            snapshots: Vec::new(),
            series_every: 100,
            scheme: Scheme::default(),
        }
    }
}

impl TimeSection {
    pub fn run_spec(&self) -> RunSpec {
        let snapshot_times = if self.snapshots.is_empty() {
            vec![self.t_end]
        } else {
            self.snapshots.clone()
        };
        RunSpec {
            t_end: self.t_end,
            snapshot_times,
            series_every: self.series_every,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.snapshots.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) {
            return Err(Error::param("snapshots", "times must lie in [0, t_end]"));
        }
        self.run_spec().validate(self.dt).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTarget {
    /// The pheromone only.
    #[default]
    V,
    /// The density fields only.
    U,
    All,
}

/// `[ic]`: constant steady state plus optional cosine and noise perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcSection {
    pub noise_amplitude: f64,
    pub noise_target: NoiseTarget,
    /// Noise seed; required when `noise_amplitude > 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Amplitude of `cos(k π x / L)` added to the targeted fields.
    pub cos_amplitude: f64,
    pub cos_mode: usize,
}

impl Default for IcSection {
    fn default() -> Self {
        Self {
            noise_amplitude: 0.0,
            noise_target: NoiseTarget::V,
            seed: None,
            cos_amplitude: 0.0,
            cos_mode: 1,
        }
    }
}

impl IcSection {
    fn validate(&self) -> Result<()> {
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            return Err(Error::param("noise_amplitude", "must be nonnegative"));
        }
        if self.noise_amplitude > 0.0 && self.seed.is_none() {
            return Err(Error::param("seed", "is required when noise_amplitude > 0"));
        }
        if !self.cos_amplitude.is_finite() {
            return Err(Error::param("cos_amplitude", "must be finite"));
        }
        Ok(())
    }
}

/// `[output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

/// `[linstab]`: growth-rate table over the model parameter (`M` or `r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinstabSection {
    pub param_min: f64,
    pub param_max: f64,
    pub steps: usize,
    pub n_max: usize,
}

impl Default for LinstabSection {
    fn default() -> Self {
        Self {
            param_min: 0.2,
            param_max: 2.0,
            steps: 181,
            n_max: 64,
        }
    }
}

impl LinstabSection {
    fn validate(&self) -> Result<()> {
        if !(self.param_min > 0.0 && self.param_min < self.param_max) {
            return Err(Error::param("param_min", "need 0 < param_min < param_max"));
        }
        if self.steps < 2 {
            return Err(Error::param("steps", "need at least 2"));
        }
        if self.n_max < 1 {
            return Err(Error::param("n_max", "need at least 1"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.param_max - self.param_min;
        (0..self.steps)
            .map(|k| self.param_min + span * k as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// `[neutral]`: neutral curves in the (parameter, D) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeutralSection {
    pub param_min: f64,
    pub param_max: f64,
    pub param_steps: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub d_steps: usize,
    pub modes: Vec<usize>,
}

impl Default for NeutralSection {
    fn default() -> Self {
        Self {
            param_min: 0.1,
            param_max: 2.5,
            param_steps: 200,
            d_min: 0.01,
            d_max: 0.5,
            d_steps: 200,
            modes: (1..=8).collect(),
        }
    }
}

impl NeutralSection {
    pub fn scan(&self) -> Scan {
        Scan {
            param_min: self.param_min,
            param_max: self.param_max,
            param_steps: self.param_steps,
            d_min: self.d_min,
            d_max: self.d_max,
            d_steps: self.d_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartGuess {
    /// The constant steady state.
    #[default]
    Constant,
    /// Constant state times `1 + amplitude cos(k π x / L)`.
    Cosine,
    /// The cosine guess relaxed by time integration before Newton.
    Relax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Up,
    Down,
    #[default]
    Both,
}

/// `[continuation]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    /// Parameter value of the first point.
    pub start: f64,
    pub guess: StartGuess,
    pub amplitude: f64,
    pub mode: usize,
    pub relax_time: f64,
    pub relax_dt: f64,
    pub direction: Direction,
    /// Number of pitchforks whose crossing branches are followed as well.
    pub follow_pitchforks: usize,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    pub param_min: f64,
    pub param_max: f64,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let c = ContinuationControl::default();
        Self {
            start: 1.0,
            guess: StartGuess::Cosine,
            amplitude: 0.3,
            mode: 1,
            relax_time: 200.0,
            relax_dt: 1e-3,
            direction: Direction::Both,
            follow_pitchforks: 0,
            ds: c.ds,
            ds_min: c.ds_min,
            ds_max: c.ds_max,
            max_steps: 600,
            param_min: 0.3,
            param_max: 2.0,
        }
    }
}

impl ContinuationSection {
    pub fn control(&self) -> ContinuationControl {
        ContinuationControl {
            ds: self.ds,
            ds_min: self.ds_min,
            ds_max: self.ds_max,
            max_steps: self.max_steps,
            param_min: self.param_min,
            param_max: self.param_max,
            ..ContinuationControl::default()
        }
    }

    fn validate(&self) -> Result<()> {
        self.control().validate()?;
        if !(self.start > self.param_min && self.start < self.param_max) {
            return Err(Error::param(
                "start",
                "must lie strictly between param_min and param_max",
            ));
        }
        if self.guess == StartGuess::Relax && !(self.relax_time > 0.0 && self.relax_dt > 0.0) {
            return Err(Error::param("relax_time", "relax_time and relax_dt must be positive"));
        }
        Ok(())
    }
}

/// The whole document. Every section may be omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub ic: IcSection,
    pub output: OutputSection,
    pub linstab: LinstabSection,
    pub neutral: NeutralSection,
    pub continuation: ContinuationSection,
    pub sweep: SweepConfig,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg = read_config(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a configuration document without validating it, so overrides can be
/// applied first.
pub fn read_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.grid.dim == 1 || self.grid.dim == 2) {
            return Err(Error::param("dim", "must be 1 or 2"));
        }
        if self.grid.n < 4 {
            return Err(Error::param("n", "need at least 4 cells"));
        }
        self.time.validate()?;
        self.ic.validate()?;
        self.linstab.validate()?;
        self.neutral.scan().validate()?;
        if self.neutral.modes.is_empty() {
            return Err(Error::param("modes", "need at least one mode"));
        }
        self.continuation.validate()?;
        self.sweep.validate()?;
        Ok(())
    }

    /// Normalised TOML with every default filled in.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn params(&self) -> ModelParams {
        self.model.params()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.model.length)
    }

    pub fn step_control(&self) -> StepControl {
        StepControl::new(self.time.dt).with_scheme(self.time.scheme)
    }

    /// Replaces the noise seed, as the command line `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ic.seed = Some(seed);
        self
    }

    fn perturbation(&self, grid: &Grid, stream: u64, targeted: bool) -> Field {
        let ic = &self.ic;
        if !targeted {
            return grid.zeros();
        }
        let k = ic.cos_mode as f64 * std::f64::consts::PI / self.model.length;
        let cos = grid.from_fn(|x, _| ic.cos_amplitude * (k * x).cos());
        if ic.noise_amplitude > 0.0 {
            let noise = uniform_field(grid, ic.seed.unwrap_or_default(), stream);
            cos.zip_map(&noise, |c, z| c + ic.noise_amplitude * z)
        } else {
            cos
        }
    }

    /// Initial data of the three-component system; negative values are clipped to zero.
    pub fn rd_initial(&self) -> Result<RdState> {
        let grid = self.grid()?;
        let p = self.params();
        let c = match self.model.kind {
            ModelKind::Rd3Conserved => constant_steady_conserved(self.model.mass, &p)?,
            _ => constant_steady_growth(&p)?,
        };
        let on_u = self.ic.noise_target != NoiseTarget::V;
        let on_v = self.ic.noise_target != NoiseTarget::U;
        let clip = |f: Field| f.map(|x| x.max(0.0));
        let u1 = clip(self.perturbation(&grid, 1, on_u).map(|z| c.u1 + z));
        let u2 = clip(self.perturbation(&grid, 2, on_u).map(|z| c.u2 + z));
        let v = clip(self.perturbation(&grid, 0, on_v).map(|z| c.v + z));
        RdState::new(0.0, u1, u2, v)
    }

    /// Initial data of the limit system; negative values are clipped to zero.
    pub fn cross_initial(&self) -> Result<CrossState> {
        let grid = self.grid()?;
        let p = self.params();
        let on_u = self.ic.noise_target != NoiseTarget::V;
        let on_v = self.ic.noise_target != NoiseTarget::U;
        let u = self.perturbation(&grid, 1, on_u).map(|z| (1.0 + z).max(0.0));
        let v = self
            .perturbation(&grid, 0, on_v)
            .map(|z| (p.alpha / p.beta + z).max(0.0));
        CrossState::new(0.0, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("[model]\n").unwrap();
        assert_eq!(cfg.params(), ModelParams::default());
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.dump().contains("v_sharp = 1.25"));
    }

    #[test]
    fn zero_eps_names_the_key() {
        match parse_config("[model]\neps = 0.0\n") {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "eps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_name_the_path() {
        let e = parse_config("[model]\nvsharp = 1.2\n").unwrap_err().to_string();
        assert!(e.contains("vsharp"), "{e}");
        let e = parse_config("[grid]\nn = \"many\"\n").unwrap_err().to_string();
        assert!(e.contains("grid.n"), "{e}");
    }

    #[test]
    fn noise_needs_a_seed() {
        let e = parse_config("[ic]\nnoise_amplitude = 0.1\n").unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { name: "seed", .. }));
        let cfg = read_config("[ic]\nnoise_amplitude = 0.1\n").unwrap().with_seed(4);
        cfg.validate().unwrap();
        assert!(cfg.dump().contains("seed = 4"));
        let e = parse_config("[ic]\nnoise_amplitude = -0.1\n").unwrap_err();
        assert!(matches!(
            e,
            Error::InvalidParameter {
                name: "noise_amplitude",
                ..
            }
        ));
    }

    #[test]
    fn dump_round_trips() {
        let text = "[model]\nkind = \"rd3-growth\"\nr = 1.5\nD = 0.2\n[ic]\nseed = 11\ncos_amplitude = 0.05\n[grid]\ndim = 2\nn = 32\n[time]\nsnapshots = [0.5, 1.0]\nt_end = 1.0\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.params().a1, 1.5);
        let again = parse_config(&cfg.dump()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn conserved_model_rejects_growth() {
        assert!(matches!(
            parse_config("[model]\na1 = 1.0\n"),
            Err(Error::InvalidParameter { name: "a1", .. })
        ));
    }

    #[test]
    fn initial_state_is_seeded() {
        let cfg = parse_config("[ic]\nseed = 5\nnoise_amplitude = 0.01\n[grid]\nn = 64\n").unwrap();
        let a = cfg.rd_initial().unwrap();
        let b = cfg.rd_initial().unwrap();
        assert_eq!(a, b);
        let c = cfg.clone().with_seed(6).rd_initial().unwrap();
        assert_ne!(a.v, c.v);
        assert_eq!(a.u1, c.u1);
        assert!((a.v.max() - a.v.min()) <= 2.0 * cfg.ic.noise_amplitude);
    }
}
