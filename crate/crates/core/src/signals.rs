//! Launch-field synthesis: the weak Gaussian quantum pulse, the 16-QAM
//! classical waveform and their scaled superposition.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ScaledUnits, SimulationGrid, WdmPlan, HBAR};
use crate::spectral::Spectral;

/// The two positive-P fields φ and φ⁺ on the τ grid at position ζ.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledFieldPair {
    pub phi: Vec<Complex64>,
    pub phi_plus: Vec<Complex64>,
    pub zeta: f64,
}

impl ScaledFieldPair {
    /// A pair with φ⁺ = φ* at ζ = 0.
    pub fn coherent(phi: Vec<Complex64>) -> Self {
        let phi_plus = phi.iter().map(|z| z.conj()).collect();
        Self { phi, phi_plus, zeta: 0.0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self { phi: vec![Complex64::ZERO; n], phi_plus: vec![Complex64::ZERO; n], zeta: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Pointwise φ φ⁺, the positive-P estimator of the normally ordered intensity.
    pub fn intensity(&self) -> Vec<Complex64> {
        self.phi.iter().zip(&self.phi_plus).map(|(a, b)| a * b).collect()
    }

    /// Largest |φ⁺ - φ*| relative to the largest |φ|.
    pub fn conjugate_defect(&self) -> f64 {
        let scale = self.phi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return self.phi_plus.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        let d = self
            .phi
            .iter()
            .zip(&self.phi_plus)
            .map(|(a, b)| (a.conj() - b).norm())
            .fold(0.0, f64::max);
        d / scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QamConfig {
    /// Root-raised-cosine roll-off, in (0, 1].
    pub roll_off: f64,
    /// Symbol count; `None` fills the whole τ window.
    pub n_symbols: Option<usize>,
    pub symbol_seed: u64,
    /// Draw a fresh symbol sequence for every independent noise stream.
    pub vary_per_trajectory: bool,
}

impl Default for QamConfig {
    fn default() -> Self {
        Self { roll_off: 0.25, n_symbols: None, symbol_seed: 1, vary_per_trajectory: false }
    }
}

impl QamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.roll_off > 0.0 && self.roll_off <= 1.0) {
            return Err(Error::InvalidSignal(format!("roll_off {} outside (0, 1]", self.roll_off)));
        }
        if self.n_symbols == Some(0) {
            return Err(Error::InvalidSignal("n_symbols must be positive".into()));
        }
        Ok(())
    }
}

/// Gray-coded 16-QAM point for a 4-bit word, scaled to unit mean power.
pub fn qam16_symbol(word: u8) -> Complex64 {
    fn level(bits: u8) -> f64 {
        match bits & 0b11 {
            0b00 => -3.0,
            0b01 => -1.0,
            0b11 => 1.0,
            _ => 3.0,
        }
    }
    Complex64::new(level(word >> 2), level(word)) / 10f64.sqrt()
}

pub fn random_symbols(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| qam16_symbol(rng.random_range(0..16u8))).collect()
}

/// Root-raised-cosine amplitude response at normalized frequency
/// `f = |Ω| Ts / 2π`.
pub fn rrc_response(f: f64, roll_off: f64) -> f64 {
    let f = f.abs();
    let lo = (1.0 - roll_off) / 2.0;
    let hi = (1.0 + roll_off) / 2.0;
    if f <= lo {
        1.0
    } else if f <= hi {
        (0.5 * (1.0 + (PI / roll_off * (f - lo)).cos())).sqrt()
    } else {
        0.0
    }
}

fn symbol_count(config: &QamConfig, symbol_period: f64, grid: &SimulationGrid) -> Result<usize> {
    let fit = (grid.tau_window / symbol_period).floor() as usize;
    match config.n_symbols {
        Some(0) => Err(Error::InvalidSignal("n_symbols must be positive".into())),
        Some(n) if n > fit.max(1) => Err(Error::InvalidSignal(format!(
            "{n} symbols of period {symbol_period} do not fit the window {}",
            grid.tau_window
        ))),
        Some(n) => Ok(n),
        None => Ok(fit.max(1)),
    }
}

/// 16-QAM waveform Q(τ) with unit mean power over its occupied span.
///
/// `symbol_period` is in scaled time units (Ts / t0).
pub fn qam16_waveform(config: &QamConfig, symbol_period: f64, grid: &SimulationGrid) -> Result<Vec<Complex64>> {
    config.validate()?;
    let n = symbol_count(config, symbol_period, grid)?;
    let symbols = random_symbols(n, config.symbol_seed);
    qam16_waveform_from_symbols(&symbols, config.roll_off, symbol_period, grid)
}

/// Pulse-shapes an explicit symbol sequence. Symbols sit at
/// `-window/2 + (s + 1/2) Ts`; the sum of RRC pulses is evaluated exactly in
/// the frequency domain, so the result is periodic and strictly band-limited.
pub fn qam16_waveform_from_symbols(
    symbols: &[Complex64],
    roll_off: f64,
    symbol_period: f64,
    grid: &SimulationGrid,
) -> Result<Vec<Complex64>> {
    if symbols.is_empty() {
        return Err(Error::InvalidSignal("no symbols".into()));
    }
    if !(roll_off > 0.0 && roll_off <= 1.0) {
        return Err(Error::InvalidSignal(format!("roll_off {roll_off} outside (0, 1]")));
    }
    if !(symbol_period > 0.0) {
        return Err(Error::InvalidSignal("symbol period must be positive".into()));
    }
    let band_edge = (1.0 + roll_off) * PI / symbol_period;
    grid.check_frequency(band_edge)?;

    let n = grid.n_tau;
    let mut spectrum = vec![Complex64::ZERO; n];
    // Positions measured from the first sample, which is where the DFT puts t = 0.
    let starts: Vec<f64> = (0..symbols.len()).map(|s| (s as f64 + 0.5) * symbol_period).collect();
    for (bin, &k) in spectrum.iter_mut().zip(&grid.wavenumbers) {
        let h = rrc_response(k * symbol_period / (2.0 * PI), roll_off);
        if h == 0.0 {
            continue;
        }
        let sum: Complex64 = symbols
            .iter()
            .zip(&starts)
            .map(|(sym, &t)| sym * Complex64::from_polar(1.0, -k * t))
            .sum();
        *bin = sum * h;
    }
    let mut wave = spectrum;
    Spectral::new(n).inverse_raw(&mut wave);

    let first = grid.taus[0] + starts[0] - symbol_period / 2.0;
    let last = first + symbols.len() as f64 * symbol_period;
    let (sum, count) = wave
        .iter()
        .zip(&grid.taus)
        .filter(|(_, &t)| t >= first && t < last)
        .fold((0.0, 0usize), |(s, c), (z, _)| (s + z.norm_sqr(), c + 1));
    if count == 0 || sum == 0.0 {
        return Err(Error::InvalidSignal("waveform has no power on the grid".into()));
    }
    let scale = 1.0 / (sum / count as f64).sqrt();
    wave.iter_mut().for_each(|z| *z *= scale);
    Ok(wave)
}

/// Peak power [W] of the quantum Gaussian pulse, ħω μ / (t0 √π).
pub fn quantum_peak_power(mu: f64, t0: f64, omega_q: f64) -> f64 {
    HBAR * omega_q * mu / (t0 * PI.sqrt())
}

/// Quantum pulse amplitude [√W] on the scaled grid:
/// √(ħω_q μ / (t0 √π)) exp(-τ²/2) exp(iΩ_q τ).
pub fn quantum_pulse(mu: f64, t0: f64, omega_q: f64, offset: f64, grid: &SimulationGrid) -> Result<Vec<Complex64>> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidSignal(format!("mean photon number {mu} is negative")));
    }
    grid.check_frequency(offset)?;
    let amp = quantum_peak_power(mu, t0, omega_q).sqrt();
    Ok(grid
        .taus
        .iter()
        .map(|&t| Complex64::from_polar(amp * (-t * t / 2.0).exp(), offset * t))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    /// Classical launch power P0 [W].
    pub classical_power: f64,
    pub quantum_mean_photons: f64,
    /// Quantum pulse width t0 [s].
    pub quantum_pulse_width: f64,
    pub quantum_channel: u32,
    pub classical_channel: u32,
}

/// Scaled launch field φ(0, τ) = √(γ_nl L_d) [√P0 Q e^{iΩ_j τ} + pulse], φ⁺ = φ*.
pub fn compose_launch(
    spec: &LaunchSpec,
    qam: &[Complex64],
    pulse: &[Complex64],
    units: &ScaledUnits,
    plan: &WdmPlan,
    grid: &SimulationGrid,
) -> Result<ScaledFieldPair> {
    if qam.len() != grid.n_tau {
        return Err(Error::LengthMismatch(qam.len(), grid.n_tau));
    }
    if pulse.len() != grid.n_tau {
        return Err(Error::LengthMismatch(pulse.len(), grid.n_tau));
    }
    if !(spec.classical_power >= 0.0) {
        return Err(Error::InvalidSignal(format!("launch power {} is negative", spec.classical_power)));
    }
    let omega_j = plan.channel_offset(spec.classical_channel, spec.quantum_pulse_width)?;
    grid.check_frequency(omega_j)?;
    let scale = units.power_scale.sqrt();
    let classical = spec.classical_power.sqrt();
    let phi = qam
        .iter()
        .zip(pulse)
        .zip(&grid.taus)
        .map(|((q, p), &t)| scale * (classical * q * Complex64::from_polar(1.0, omega_j * t) + p))
        .collect();
    Ok(ScaledFieldPair::coherent(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_scaled_units, itu_angular_frequency, itu_wavelength, PhysicalParams};
    use approx::assert_relative_eq;

    fn grid(n: usize, window: f64) -> SimulationGrid {
        SimulationGrid::uniform(n, window, 1e-3, 10)
    }

    #[test]
    fn constellation_has_unit_power() {
        let mean: f64 = (0..16u8).map(|w| qam16_symbol(w).norm_sqr()).sum::<f64>() / 16.0;
        assert_relative_eq!(mean, 1.0, max_relative = 1e-14);
        // 16 distinct points, Gray neighbours differ by one bit
        let pts: Vec<_> = (0..16u8).map(qam16_symbol).collect();
        for (i, a) in pts.iter().enumerate() {
            for (j, b) in pts.iter().enumerate() {
                if i != j {
                    assert!((a - b).norm() > 0.1);
                    if (a - b).norm() < 2.0 / 10f64.sqrt() + 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{i} {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn quantum_pulse_energy() {
        let p = PhysicalParams::default();
        let g = grid(4096, 40.0);
        let omega = itu_angular_frequency(38).unwrap();
        let pulse = quantum_pulse(0.4, p.t0, omega, 0.0, &g).unwrap();
        // ∫|A|² dt with dt = t0 dτ
        let energy: f64 = pulse.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.d_tau * p.t0;
        assert_relative_eq!(energy, 0.4 * HBAR * omega, max_relative = 1e-6);
        assert!((energy - 5.1e-20).abs() < 0.1e-20);

        let zero = quantum_pulse(0.0, p.t0, omega, 0.0, &g).unwrap();
        assert!(zero.iter().all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn pulse_offset_only_shifts_spectrum() {
        let g = grid(1024, 20.0);
        let dk = g.wavenumbers[1];
        let shift = 40;
        let a = quantum_pulse(1.0, 1e-10, 1e15, 0.0, &g).unwrap();
        let b = quantum_pulse(1.0, 1e-10, 1e15, shift as f64 * dk, &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.norm() - y.norm()).abs() < 1e-15 * a[512].norm());
        }
        let mut sp = Spectral::new(1024);
        let (mut fa, mut fb) = (a.clone(), b.clone());
        sp.forward(&mut fa);
        sp.forward(&mut fb);
        for i in 0..1024 {
            let j = (i + shift) % 1024;
            assert!((fa[i].norm() - fb[j].norm()).abs() < 1e-12 * fa[0].norm());
        }
    }

    #[test]
    fn rejects_bad_qam_config() {
        let g = grid(256, 20.0);
        let bad = QamConfig { roll_off: 0.0, ..Default::default() };
        assert!(qam16_waveform(&bad, 2.0, &g).is_err());
        let bad = QamConfig { roll_off: 1.5, ..Default::default() };
        assert!(qam16_waveform(&bad, 2.0, &g).is_err());
        let bad = QamConfig { n_symbols: Some(0), ..Default::default() };
        assert!(qam16_waveform(&bad, 2.0, &g).is_err());
        assert!(qam16_waveform_from_symbols(&[], 0.25, 2.0, &g).is_err());
    }

    #[test]
    fn waveform_is_normalized_and_deterministic() {
        let g = grid(2048, 40.0);
        let cfg = QamConfig::default();
        let a = qam16_waveform(&cfg, 2.83, &g).unwrap();
        let b = qam16_waveform(&cfg, 2.83, &g).unwrap();
        assert_eq!(a, b);
        let mean = a.iter().map(|z| z.norm_sqr()).sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        let other = qam16_waveform(&QamConfig { symbol_seed: 2, ..cfg }, 2.83, &g).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn waveform_is_band_limited() {
        let g = grid(2048, 40.0);
        let ts = 2.83;
        let beta = 0.25;
        let mut q = qam16_waveform(&QamConfig::default(), ts, &g).unwrap();
        Spectral::new(2048).forward(&mut q);
        let edge = (1.0 + beta) * PI / ts;
        let outside: f64 = q.iter().zip(&g.wavenumbers).filter(|(_, k)| k.abs() > edge).map(|(z, _)| z.norm_sqr()).sum();
        let total: f64 = q.iter().map(|z| z.norm_sqr()).sum();
        assert!(outside / total < 1e-25, "{}", outside / total);
    }

    #[test]
    fn constant_symbols_give_flat_envelope() {
        let g = grid(4096, 60.0);
        let ts = 2.0;
        let syms = vec![qam16_symbol(0b0110); 30];
        let q = qam16_waveform_from_symbols(&syms, 0.25, ts, &g).unwrap();
        let mid: Vec<f64> = q[1024..3072].iter().map(|z| z.norm()).collect();
        let lo = mid.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mid.iter().cloned().fold(0.0, f64::max);
        assert!((hi - lo) / hi < 1e-6, "{lo} {hi}");
    }

    #[test]
    fn launch_composition() {
        let p = PhysicalParams::default();
        let u = derive_scaled_units(&p, itu_wavelength(38).unwrap()).unwrap();
        let plan = WdmPlan::new(38, 39).unwrap();
        let g = crate::params::build_grid(&plan, &u, &p, &Default::default()).unwrap();
        let ts = 4.0 / (p.bit_rate * p.t0);
        let q = qam16_waveform(&QamConfig::default(), ts, &g).unwrap();
        let omega_q = itu_angular_frequency(38).unwrap();
        let pulse = quantum_pulse(p.mu, p.t0, omega_q, 0.0, &g).unwrap();

        // classical scale sqrt(gamma_nl L_d P0) at 1 mW
        assert!(((u.power_scale * 1e-3).sqrt() - 0.93).abs() < 0.005);

        let spec = |p0: f64, mu: f64| LaunchSpec {
            classical_power: p0,
            quantum_mean_photons: mu,
            quantum_pulse_width: p.t0,
            quantum_channel: 38,
            classical_channel: 39,
        };
        let zero_pulse = vec![Complex64::ZERO; g.n_tau];
        let z = compose_launch(&spec(0.0, 0.0), &q, &zero_pulse, &u, &plan, &g).unwrap();
        assert!(z.phi.iter().all(|v| *v == Complex64::ZERO));

        let pair = compose_launch(&spec(1e-3, p.mu), &q, &pulse, &u, &plan, &g).unwrap();
        assert_eq!(pair.conjugate_defect(), 0.0);
        assert_eq!(pair.zeta, 0.0);

        // spectrally disjoint parts: energies add
        let total: f64 = pair.phi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let classical: f64 = q.iter().map(|z| z.norm_sqr()).sum::<f64>() * u.power_scale * 1e-3;
        let quantum: f64 = pulse.iter().map(|z| z.norm_sqr()).sum::<f64>() * u.power_scale;
        assert_relative_eq!(total, classical + quantum, max_relative = 1e-3);

        // two disjoint spectral supports around 0 and Ω_j
        let mut spec_phi = pair.phi.clone();
        Spectral::new(g.n_tau).forward(&mut spec_phi);
        let omega_j = plan.channel_offset(39, p.t0).unwrap();
        let near = |c: f64, w: f64| -> f64 {
            spec_phi.iter().zip(&g.wavenumbers).filter(|(_, k)| (*k - c).abs() < w).map(|(z, _)| z.norm_sqr()).sum()
        };
        let all: f64 = spec_phi.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(near(0.0, 10.0) + near(omega_j, 10.0), all, max_relative = 1e-9);
        assert!(near(omega_j, 10.0) > 1e6 * near(0.0, 10.0));

        let short = vec![Complex64::ZERO; 3];
        assert!(matches!(compose_launch(&spec(1e-3, 0.4), &short, &pulse, &u, &plan, &g), Err(Error::LengthMismatch(..))));
    }
}
