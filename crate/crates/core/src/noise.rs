//! Discretized positive-P noise fields.
//!
//! Loss noise ξ_L, ξ_L⁺ is complex with ⟨ξ_L ξ_L⁺⟩ = 2γ n_th / n0 and vanishing
//! auto-correlations. Kerr noise ξ_E, ξ_E⁺ is real with strength 1/n0; how the
//! two Kerr fields correlate is selected by [`KerrNoiseConvention`]. All
//! fields are white: per-cell variances carry a 1/(Δζ Δτ) factor.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{BOLTZMANN, HBAR};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KerrNoiseConvention {
    /// ξ_E and ξ_E⁺ independent, each with autocovariance δδ/n0.
    #[default]
    Independent,
    /// ξ_E⁺ = ξ_E, so ⟨ξ_E ξ_E⁺⟩ = δδ/n0.
    Cross,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub n_th: f64,
    pub n0: f64,
    pub gamma_scaled: f64,
    pub d_zeta: f64,
    pub d_tau: f64,
    pub convention: KerrNoiseConvention,
}

impl NoiseConfig {
    /// Per-cell ⟨ξ_L ξ_L⁺⟩.
    pub fn loss_cross_moment(&self) -> f64 {
        (2.0 * self.gamma_scaled * self.n_th / self.n0) / (self.d_zeta * self.d_tau)
    }

    /// Per-cell variance of each Kerr field.
    pub fn kerr_variance(&self) -> f64 {
        (1.0 / self.n0) / (self.d_zeta * self.d_tau)
    }
}

/// Bose-Einstein occupation 1 / (exp(ħω / k_B T) - 1); zero at T = 0.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if temperature < 0.0 || temperature.is_nan() {
        return Err(Error::NegativeTemperature(temperature));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (BOLTZMANN * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Sign flips applied to one noise stream. Every pattern leaves the joint
/// noise distribution unchanged, so mixing patterns keeps ensemble averages
/// unbiased while cancelling odd-order noise terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSigns {
    /// Applied to ξ_L, ξ_L⁺ and ξ_E.
    pub phi: f64,
    /// Applied to ξ_E⁺.
    pub phi_plus: f64,
}

impl Default for NoiseSigns {
    fn default() -> Self {
        Self { phi: 1.0, phi_plus: 1.0 }
    }
}

const QUARTET: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];

/// Maps a trajectory index onto its noise stream and sign pattern.
///
/// With antithetic sampling, consecutive trajectories share a stream: groups of
/// four under the independent convention (all sign pairs), groups of two under
/// the cross convention where ξ_E⁺ must follow ξ_E.
pub fn trajectory_stream(trajectory: usize, antithetic: bool, convention: KerrNoiseConvention) -> (u64, NoiseSigns) {
    if !antithetic {
        return (trajectory as u64, NoiseSigns::default());
    }
    let group = antithetic_group_size(convention);
    let (s, sp) = match convention {
        KerrNoiseConvention::Independent => QUARTET[trajectory % 4],
        KerrNoiseConvention::Cross => {
            let s = if trajectory.is_multiple_of(2) { 1.0 } else { -1.0 };
            (s, s)
        }
    };
    ((trajectory / group) as u64, NoiseSigns { phi: s, phi_plus: sp })
}

pub fn antithetic_group_size(convention: KerrNoiseConvention) -> usize {
    match convention {
        KerrNoiseConvention::Independent => 4,
        KerrNoiseConvention::Cross => 2,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the (master, stream, step) counter triple.
pub fn stream_seed(master_seed: u64, stream: u64, step: u64) -> [u8; 32] {
    let h = splitmix64(splitmix64(splitmix64(master_seed) ^ stream) ^ step);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(h.wrapping_add(i as u64)).to_le_bytes());
    }
    seed
}

pub fn stream_rng(master_seed: u64, stream: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(master_seed, stream, step))
}

/// One ζ step worth of noise on the τ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub xi_l: Vec<Complex64>,
    pub xi_l_plus: Vec<Complex64>,
    pub xi_e: Vec<f64>,
    pub xi_e_plus: Vec<f64>,
}

impl NoiseRealization {
    pub fn zeros(n: usize) -> Self {
        Self {
            xi_l: vec![Complex64::ZERO; n],
            xi_l_plus: vec![Complex64::ZERO; n],
            xi_e: vec![0.0; n],
            xi_e_plus: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.xi_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi_e.is_empty()
    }

    /// Overwrites all four fields: Kerr noise is drawn first, then loss noise.
    pub fn fill<R: Rng + ?Sized>(&mut self, config: &NoiseConfig, rng: &mut R, signs: NoiseSigns) {
        fill_kerr(config, rng, &mut self.xi_e, &mut self.xi_e_plus);
        fill_loss(config, rng, &mut self.xi_l, &mut self.xi_l_plus);
        if signs.phi != 1.0 {
            self.xi_e.iter_mut().for_each(|x| *x *= signs.phi);
            self.xi_l.iter_mut().for_each(|x| *x *= signs.phi);
            self.xi_l_plus.iter_mut().for_each(|x| *x *= signs.phi);
        }
        let plus_sign = match config.convention {
            KerrNoiseConvention::Independent => signs.phi_plus,
            KerrNoiseConvention::Cross => signs.phi,
        };
        if plus_sign != 1.0 {
            self.xi_e_plus.iter_mut().for_each(|x| *x *= plus_sign);
        }
    }
}

fn fill_kerr<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, xi_e: &mut [f64], xi_e_plus: &mut [f64]) {
    let var = config.kerr_variance();
    if !(var > 0.0) || !var.is_finite() {
        xi_e.fill(0.0);
        xi_e_plus.fill(0.0);
        return;
    }
    let sd = var.sqrt();
    for x in xi_e.iter_mut() {
        *x = sd * rng.sample::<f64, _>(StandardNormal);
    }
    match config.convention {
        KerrNoiseConvention::Independent => {
            for x in xi_e_plus.iter_mut() {
                *x = sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        KerrNoiseConvention::Cross => xi_e_plus.copy_from_slice(xi_e),
    }
}

fn fill_loss<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, xi_l: &mut [Complex64], xi_l_plus: &mut [Complex64]) {
    let c = config.loss_cross_moment();
    if !(c > 0.0) || !c.is_finite() {
        xi_l.fill(Complex64::ZERO);
        xi_l_plus.fill(Complex64::ZERO);
        return;
    }
    let s = (c / 2.0).sqrt();
    for (l, lp) in xi_l.iter_mut().zip(xi_l_plus.iter_mut()) {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        *l = Complex64::new(s * a, s * b);
        *lp = Complex64::new(s * a, -s * b);
    }
}

/// ξ_L = √(c/2)(a + ib), ξ_L⁺ = √(c/2)(a - ib) per cell.
pub fn sample_loss_noise<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut xi_l = vec![Complex64::ZERO; n];
    let mut xi_l_plus = vec![Complex64::ZERO; n];
    fill_loss(config, rng, &mut xi_l, &mut xi_l_plus);
    (xi_l, xi_l_plus)
}

pub fn sample_kerr_noise<R: Rng + ?Sized>(config: &NoiseConfig, rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xi_e = vec![0.0; n];
    let mut xi_e_plus = vec![0.0; n];
    fill_kerr(config, rng, &mut xi_e, &mut xi_e_plus);
    (xi_e, xi_e_plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::itu_angular_frequency;

    fn config(n_th: f64, n0: f64) -> NoiseConfig {
        NoiseConfig { n_th, n0, gamma_scaled: 25.6, d_zeta: 0.5, d_tau: 0.25, convention: KerrNoiseConvention::Independent }
    }

    #[test]
    fn thermal_occupation_limits() {
        let omega = itu_angular_frequency(38).unwrap();
        let n = thermal_occupation(300.0, omega).unwrap();
        // ħω/k_BT = 31.0 at 193.8 THz, 300 K
        let x = HBAR * omega / (BOLTZMANN * 300.0);
        assert!((x - 31.0).abs() < 0.05, "{x}");
        assert!(n > 2e-14 && n < 6e-14, "{n}");
        assert_eq!(thermal_occupation(0.0, omega).unwrap(), 0.0);
        assert!(thermal_occupation(1e-3, omega).unwrap() == 0.0);
        assert!(matches!(thermal_occupation(-1.0, omega), Err(Error::NegativeTemperature(_))));
        let t = HBAR * omega / (BOLTZMANN * std::f64::consts::LN_2);
        assert!((thermal_occupation(t, omega).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_occupation_gives_zero_loss_noise() {
        let mut rng = stream_rng(1, 0, 0);
        let (l, lp) = sample_loss_noise(&config(0.0, 1e6), &mut rng, 128);
        assert!(l.iter().chain(&lp).all(|z| *z == Complex64::ZERO));
    }

    #[test]
    fn infinite_photon_scale_silences_kerr_noise() {
        let mut rng = stream_rng(1, 0, 0);
        let (e, ep) = sample_kerr_noise(&config(0.0, f64::INFINITY), &mut rng, 64);
        assert!(e.iter().chain(&ep).all(|x| *x == 0.0));
    }

    #[test]
    fn streams_are_reproducible() {
        let cfg = config(1.0, 1.0);
        let mut a = NoiseRealization::zeros(32);
        let mut b = NoiseRealization::zeros(32);
        a.fill(&cfg, &mut stream_rng(9, 3, 17), NoiseSigns::default());
        b.fill(&cfg, &mut stream_rng(9, 3, 17), NoiseSigns::default());
        assert_eq!(a, b);
        b.fill(&cfg, &mut stream_rng(9, 3, 18), NoiseSigns::default());
        assert_ne!(a, b);
    }

    #[test]
    fn halving_step_doubles_variance() {
        let a = config(1.0, 2.0);
        let b = NoiseConfig { d_zeta: a.d_zeta / 2.0, ..a.clone() };
        assert_eq!(b.kerr_variance(), 2.0 * a.kerr_variance());
        assert_eq!(b.loss_cross_moment(), 2.0 * a.loss_cross_moment());
    }

    #[test]
    fn antithetic_patterns() {
        let pats: Vec<_> = (0..8).map(|t| trajectory_stream(t, true, KerrNoiseConvention::Independent)).collect();
        assert_eq!(pats[0].0, 0);
        assert_eq!(pats[3].0, 0);
        assert_eq!(pats[4].0, 1);
        let signs: Vec<_> = pats[..4].iter().map(|p| (p.1.phi, p.1.phi_plus)).collect();
        assert_eq!(signs, QUARTET.to_vec());
        let (s, c) = trajectory_stream(3, true, KerrNoiseConvention::Cross);
        assert_eq!(s, 1);
        assert_eq!(c.phi, c.phi_plus);
        assert_eq!(trajectory_stream(5, false, KerrNoiseConvention::Independent), (5, NoiseSigns::default()));
    }

    #[test]
    fn signs_flip_fields() {
        let cfg = config(1.0, 1.0);
        let mut a = NoiseRealization::zeros(16);
        let mut b = NoiseRealization::zeros(16);
        a.fill(&cfg, &mut stream_rng(1, 1, 1), NoiseSigns::default());
        b.fill(&cfg, &mut stream_rng(1, 1, 1), NoiseSigns { phi: -1.0, phi_plus: 1.0 });
        for i in 0..16 {
            assert_eq!(a.xi_e[i], -b.xi_e[i]);
            assert_eq!(a.xi_e_plus[i], b.xi_e_plus[i]);
            assert_eq!(a.xi_l[i], -b.xi_l[i]);
        }
    }
}
