use coprop_core::demux::IntensityAccumulator;
use coprop_core::noise::trajectory_stream;
use coprop_core::params::SimulationGrid;
use coprop_core::{Complex64, DispersionRegime, EngineConfig, KerrNoiseConvention, NoiseConfig, Propagator, ScaledFieldPair, TrajectoryStream};

fn noisy_setup() -> (SimulationGrid, EngineConfig) {
    let (n, window, d_zeta, steps) = (128, 20.0, 2e-3, 50);
    let grid = SimulationGrid::uniform(n, window, d_zeta, steps);
    let noise = NoiseConfig {
        n_th: 0.0,
        n0: 200.0,
        gamma_scaled: 0.0,
        d_zeta,
        d_tau: grid.d_tau,
        convention: KerrNoiseConvention::Independent,
    };
    let cfg = EngineConfig {
        d_zeta,
        n_steps: steps,
        gamma_scaled: 0.0,
        regime: DispersionRegime::Anomalous,
        dispersion_enabled: true,
        midpoint_iterations: 4,
        noise: Some(noise),
        constrain_conjugate: false,
    };
    (grid, cfg)
}

fn launch(grid: &SimulationGrid, phase: f64) -> ScaledFieldPair {
    let rot = Complex64::from_polar(1.0, phase);
    ScaledFieldPair::coherent(grid.taus.iter().map(|&t| rot * 1.5 / t.cosh()).collect())
}

fn residue(trajectories: usize) -> f64 {
    let (grid, cfg) = noisy_setup();
    let mut prop = Propagator::new(&grid, cfg).unwrap();
    let start = launch(&grid, 0.0);
    let mut acc = IntensityAccumulator::new(grid.n_tau);
    for t in 0..trajectories {
        let (stream, signs) = trajectory_stream(t, false, KerrNoiseConvention::Independent);
        let ts = TrajectoryStream { master_seed: 5, stream, signs };
        acc.add(&prop.propagate(&start, &ts, None).unwrap().final_pair.intensity()).unwrap();
    }
    acc.mean().unwrap().imag_residue
}

#[test]
fn imaginary_residue_shrinks_like_inverse_sqrt_ensemble() {
    let ratio = residue(16) / residue(256);
    assert!((2.0..8.0).contains(&ratio), "residue ratio {ratio} for 16x more trajectories");
}

#[test]
fn global_phase_leaves_trajectory_intensity_unchanged() {
    let (grid, cfg) = noisy_setup();
    let mut prop = Propagator::new(&grid, cfg).unwrap();
    let ts = TrajectoryStream::new(3, 0);
    let a = prop.propagate(&launch(&grid, 0.0), &ts, None).unwrap().final_pair.intensity();
    let b = prop.propagate(&launch(&grid, 1.1), &ts, None).unwrap().final_pair.intensity();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-10 * scale, "diff {diff}");
}
