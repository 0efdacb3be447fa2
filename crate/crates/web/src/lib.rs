//! WebAssembly bindings for the browser demo: the dispersion relation of the
//! constant state, its neutral masses, and a live 1D simulation.

use roachlab::config::{NoiseTarget, RunConfig};
use roachlab::linstab::{mode_matrix, parameter_roots, Which};
use roachlab::model::ModelParams;
use roachlab::rd::{RdState, RdStepper};
use wasm_bindgen::prelude::*;

fn params(big_d: f64, v_sharp: f64) -> Result<ModelParams, String> {
    let p = ModelParams {
        big_d,
        v_sharp,
        ..ModelParams::default()
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

/// Growth rate of each cosine mode `0..=n_max` of the constant state with mean mass `mass`.
#[wasm_bindgen]
pub fn growth_rates(mass: f64, big_d: f64, v_sharp: f64, n_max: usize) -> Result<Vec<f64>, String> {
    let p = params(big_d, v_sharp)?;
    (0..=n_max)
        .map(|n| {
            mode_matrix(Which::Conserved, n, mass, &p)
                .map(|m| m.growth_rate())
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Masses in `[lo, hi]` at which cosine mode `mode` changes stability.
#[wasm_bindgen]
pub fn neutral_masses(mode: usize, big_d: f64, v_sharp: f64, lo: f64, hi: f64) -> Result<Vec<f64>, String> {
    let p = params(big_d, v_sharp)?;
    parameter_roots(Which::Conserved, mode, lo, hi, 400, &p).map_err(|e| e.to_string())
}

/// A mass-conserving 1D run started from the constant state plus seeded noise.
#[wasm_bindgen]
pub struct Simulation {
    stepper: RdStepper,
    state: RdState,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, mass: f64, big_d: f64, v_sharp: f64, dt: f64, seed: u64) -> Result<Simulation, String> {
        let mut cfg = RunConfig::default();
        cfg.grid.n = n;
        cfg.model.mass = mass;
        cfg.model.big_d = big_d;
        cfg.model.v_sharp = v_sharp;
        cfg.time.dt = dt;
        cfg.ic.seed = Some(seed);
        cfg.ic.noise_amplitude = 0.05;
        cfg.ic.noise_target = NoiseTarget::All;
        cfg.validate().map_err(|e| e.to_string())?;
        let grid = cfg.grid().map_err(|e| e.to_string())?;
        let stepper = RdStepper::new(&cfg.params(), &grid, cfg.step_control()).map_err(|e| e.to_string())?;
        let state = cfg.rd_initial().map_err(|e| e.to_string())?;
        Ok(Simulation { stepper, state })
    }

    /// Takes `steps` time steps; the state is left unchanged on failure.
    pub fn advance(&mut self, steps: usize) -> Result<(), String> {
        let mut next = self.state.clone();
        for _ in 0..steps {
            self.stepper.step(&mut next).map_err(|e| e.to_string())?;
        }
        self.state = next;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn mass(&self) -> f64 {
        self.state.mass()
    }

    /// Total density `u1 + u2` per cell.
    pub fn density(&self) -> Vec<f64> {
        self.state.total().into_values()
    }

    pub fn pheromone(&self) -> Vec<f64> {
        self.state.v.values().to_vec()
    }
}
