//! Thin wrapper over `rustfft` with unitary normalization.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self { n, forward, inverse, scratch: vec![Complex64::ZERO; len] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `sum_j x_j exp(-i 2π jk/n)`.
    pub fn forward_raw(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Unnormalized inverse transform.
    pub fn inverse_raw(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
    }

    /// Unitary forward transform.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward_raw(buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Unitary inverse transform.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse_raw(buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Applies a diagonal spectral multiplier in place: F⁻¹[m · F[buf]].
    pub fn apply_multiplier(&mut self, buf: &mut [Complex64], multiplier: &[Complex64]) {
        debug_assert_eq!(buf.len(), multiplier.len());
        self.forward_raw(buf);
        let s = 1.0 / self.n as f64;
        for (z, m) in buf.iter_mut().zip(multiplier) {
            *z *= m * s;
        }
        self.inverse_raw(buf);
    }

    /// Applies a real spectral mask in place.
    pub fn apply_mask(&mut self, buf: &mut [Complex64], mask: &[f64]) {
        debug_assert_eq!(buf.len(), mask.len());
        self.forward_raw(buf);
        let s = 1.0 / self.n as f64;
        for (z, m) in buf.iter_mut().zip(mask) {
            *z *= m * s;
        }
        self.inverse_raw(buf);
    }
}

/// Σ|z|² over the samples.
pub fn energy(buf: &[Complex64]) -> f64 {
    buf.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_round_trip_preserves_norm() {
        let mut sp = Spectral::new(64);
        let orig: Vec<Complex64> = (0..64).map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64).cos())).collect();
        let mut buf = orig.clone();
        sp.forward(&mut buf);
        assert!((energy(&buf) - energy(&orig)).abs() < 1e-12 * energy(&orig));
        sp.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn unit_multiplier_is_identity() {
        let mut sp = Spectral::new(32);
        let orig: Vec<Complex64> = (0..32).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let mut buf = orig.clone();
        sp.apply_multiplier(&mut buf, &vec![Complex64::ONE; 32]);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
