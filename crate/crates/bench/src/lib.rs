//! Shared fixtures for the benchmarks in `benches/`.

use coprop_core::noise::{stream_rng, NoiseRealization, NoiseSigns};
use coprop_core::params::SimulationGrid;
use coprop_core::{Complex64, DispersionRegime, EngineConfig, KerrNoiseConvention, NoiseConfig, ScaledFieldPair};

/// Grid of `n` points over a window of 40, `steps` steps of 1e-4.
pub fn grid(n: usize, steps: usize) -> SimulationGrid {
    SimulationGrid::uniform(n, 40.0, 1e-4, steps)
}

pub fn sech_pair(grid: &SimulationGrid) -> ScaledFieldPair {
    ScaledFieldPair::coherent(grid.taus.iter().map(|&t| Complex64::new(1.0 / t.cosh(), 0.0)).collect())
}

pub fn noise_config(grid: &SimulationGrid) -> NoiseConfig {
    NoiseConfig {
        n_th: 4e-14,
        n0: 1.27e6,
        gamma_scaled: 25.58,
        d_zeta: grid.d_zeta,
        d_tau: grid.d_tau,
        convention: KerrNoiseConvention::Independent,
    }
}

pub fn noise(grid: &SimulationGrid) -> NoiseRealization {
    let mut real = NoiseRealization::zeros(grid.n_tau);
    real.fill(&noise_config(grid), &mut stream_rng(1, 0, 0), NoiseSigns::default());
    real
}

pub fn engine_config(grid: &SimulationGrid, noisy: bool) -> EngineConfig {
    EngineConfig {
        d_zeta: grid.d_zeta,
        n_steps: grid.n_steps,
        gamma_scaled: 25.58,
        regime: DispersionRegime::Anomalous,
        dispersion_enabled: true,
        midpoint_iterations: 4,
        noise: noisy.then(|| noise_config(grid)),
        constrain_conjugate: !noisy,
    }
}
