//! A plain split-step NLSE solver written without the engine's building
//! blocks: direct O(N²) DFTs and an exactly solved implicit midpoint for the
//! self-phase term. Slow, but an independent check on the engine's
//! deterministic mode.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::engine::DispersionRegime;

#[derive(Clone, Debug)]
pub struct ReferenceSolver {
    n: usize,
    d_zeta: f64,
    twiddle: Vec<Complex64>,
    half_step: Vec<Complex64>,
}

impl ReferenceSolver {
    /// Solver for dφ/dζ = (i/2)(1 ∓ k²)φ - γφ + i|φ|²φ on `n` samples over a
    /// periodic window of length `tau_window`.
    pub fn new(n: usize, tau_window: f64, d_zeta: f64, gamma: f64, regime: DispersionRegime) -> Self {
        let twiddle = (0..n).map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64)).collect();
        let s = match regime {
            DispersionRegime::Anomalous => -1.0,
            DispersionRegime::Normal => 1.0,
        };
        let half_step = (0..n)
            .map(|m| {
                let signed = if 2 * m < n { m as f64 } else { m as f64 - n as f64 };
                let k = 2.0 * PI * signed / tau_window;
                (Complex64::new(-gamma, 0.5 * (1.0 + s * k * k)) * (d_zeta / 2.0)).exp()
            })
            .collect();
        Self { n, d_zeta, twiddle, half_step }
    }

    fn dft(&self, x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|m| {
                let mut acc = Complex64::ZERO;
                for (j, v) in x.iter().enumerate() {
                    let w = self.twiddle[(j * m) % n];
                    acc += v * if inverse { w.conj() } else { w };
                }
                acc
            })
            .collect()
    }

    fn linear(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut spec = self.dft(x, false);
        for (z, m) in spec.iter_mut().zip(&self.half_step) {
            *z *= m;
        }
        let inv = 1.0 / self.n as f64;
        self.dft(&spec, true).into_iter().map(|z| z * inv).collect()
    }

    /// Midpoint rule for dφ/dζ = i|φ|²φ: with h = Δζ/2 the midpoint
    /// m = φ / (1 - i h x) where x = |m|² solves x (1 + h² x²) = |φ|².
    fn nonlinear(&self, x: &mut [Complex64]) {
        let h = self.d_zeta / 2.0;
        for z in x.iter_mut() {
            let p = z.norm_sqr();
            let mut u = p;
            for _ in 0..50 {
                let f = u + h * h * u * u * u - p;
                let df = 1.0 + 3.0 * h * h * u * u;
                let next = u - f / df;
                if (next - u).abs() <= 1e-16 * p.max(f64::MIN_POSITIVE) {
                    u = next;
                    break;
                }
                u = next;
            }
            let mid = *z / Complex64::new(1.0, -h * u);
            *z = 2.0 * mid - *z;
        }
    }

    pub fn step(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut a = self.linear(phi);
        self.nonlinear(&mut a);
        self.linear(&a)
    }

    pub fn propagate(&self, phi: &[Complex64], n_steps: usize) -> Vec<Complex64> {
        let mut cur = phi.to_vec();
        for _ in 0..n_steps {
            cur = self.step(&cur);
        }
        cur
    }
}

/// max |a - b| / max |b|.
pub fn max_relative_difference(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
