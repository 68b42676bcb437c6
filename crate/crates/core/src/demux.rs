//! Quantum-channel demultiplexing and the width-ratio crosstalk metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SimulationGrid, WdmPlan};
use crate::signals::ScaledFieldPair;
use crate::spectral::Spectral;

/// Residues above this fraction of the peak intensity are flagged.
pub const IMAG_RESIDUE_WARNING: f64 = 0.01;

/// Brick-wall passband `[center - half_width, center + half_width)` on the
/// scaled angular-frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BandFilter {
    pub center: f64,
    pub half_width: f64,
    pub mask: Vec<f64>,
}

impl BandFilter {
    pub fn new(center: f64, half_width: f64, grid: &SimulationGrid) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Config(format!("band half-width {half_width} must be positive")));
        }
        let nyq = grid.nyquist();
        if center + half_width > nyq * (1.0 + 1e-12) || center - half_width < -nyq * (1.0 + 1e-12) {
            let offset = if center >= 0.0 { center + half_width } else { center - half_width };
            return Err(Error::BeyondNyquist { offset, nyquist: nyq });
        }
        // Edges that land on a bin up to rounding are resolved half-open.
        let eps = 1e-9 * (2.0 * std::f64::consts::PI / grid.tau_window);
        let lo = center - half_width - eps;
        let hi = center + half_width - eps;
        let mask = grid.wavenumbers.iter().map(|&k| if k >= lo && k < hi { 1.0 } else { 0.0 }).collect();
        Ok(Self { center, half_width, mask })
    }

    /// Passband of one ITU channel: its offset ± half the channel spacing.
    pub fn for_channel(plan: &WdmPlan, channel: u32, t0: f64, grid: &SimulationGrid) -> Result<Self> {
        let center = plan.channel_offset(channel, t0)?;
        Self::new(center, plan.spacing * t0 / 2.0, grid)
    }

    pub fn complement(&self) -> Self {
        Self { mask: self.mask.iter().map(|m| 1.0 - m).collect(), ..self.clone() }
    }

    pub fn extract_with(&self, pair: &ScaledFieldPair, spectral: &mut Spectral) -> ScaledFieldPair {
        let mut out = pair.clone();
        spectral.apply_mask(&mut out.phi, &self.mask);
        spectral.apply_mask(&mut out.phi_plus, &self.mask);
        out
    }
}

/// Restricts both fields to the filter's band.
pub fn bandpass_extract(pair: &ScaledFieldPair, filter: &BandFilter) -> Result<ScaledFieldPair> {
    if pair.phi.len() != filter.mask.len() || pair.phi_plus.len() != filter.mask.len() {
        return Err(Error::LengthMismatch(pair.phi.len(), filter.mask.len()));
    }
    let mut spectral = Spectral::new(filter.mask.len());
    Ok(filter.extract_with(pair, &mut spectral))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanIntensity {
    /// Real part of the ensemble-averaged φ_q φ_q⁺.
    pub profile: Vec<f64>,
    /// Largest |imaginary part| of the average.
    pub imag_residue: f64,
    pub peak: f64,
}

impl MeanIntensity {
    pub fn statistics_warning(&self) -> bool {
        self.imag_residue > IMAG_RESIDUE_WARNING * self.peak
    }
}

/// Running sum of complex intensities, added in a caller-fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityAccumulator {
    pub sum: Vec<Complex64>,
    pub count: usize,
}

impl IntensityAccumulator {
    pub fn new(n: usize) -> Self {
        Self { sum: vec![Complex64::ZERO; n], count: 0 }
    }

    pub fn add(&mut self, intensity: &[Complex64]) -> Result<()> {
        if intensity.len() != self.sum.len() {
            return Err(Error::LengthMismatch(intensity.len(), self.sum.len()));
        }
        for (s, v) in self.sum.iter_mut().zip(intensity) {
            *s += v;
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.sum.len() != self.sum.len() {
            return Err(Error::LengthMismatch(other.sum.len(), self.sum.len()));
        }
        for (s, v) in self.sum.iter_mut().zip(&other.sum) {
            *s += v;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self) -> Result<MeanIntensity> {
        if self.count == 0 {
            return Err(Error::EmptyProfile);
        }
        let inv = 1.0 / self.count as f64;
        let profile: Vec<f64> = self.sum.iter().map(|z| z.re * inv).collect();
        let imag_residue = self.sum.iter().map(|z| (z.im * inv).abs()).fold(0.0, f64::max);
        let peak = profile.iter().cloned().fold(0.0, f64::max);
        Ok(MeanIntensity { profile, imag_residue, peak })
    }
}

/// Pointwise average of φ_q φ_q⁺ over trajectories, in the given order.
pub fn mean_intensity(trajectories: &[ScaledFieldPair]) -> Result<MeanIntensity> {
    let first = trajectories.first().ok_or(Error::EmptyProfile)?;
    let mut acc = IntensityAccumulator::new(first.len());
    for t in trajectories {
        acc.add(&t.intensity())?;
    }
    acc.mean()
}

/// Intensity-weighted centered RMS width over the whole grid.
pub fn rms_width(profile: &[f64], taus: &[f64]) -> Result<f64> {
    rms_width_windowed(profile, taus, 1.0)
}

/// Intensity-weighted centered RMS width over the central `window_fraction`
/// of the samples.
pub fn rms_width_windowed(profile: &[f64], taus: &[f64], window_fraction: f64) -> Result<f64> {
    if profile.len() != taus.len() {
        return Err(Error::LengthMismatch(profile.len(), taus.len()));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Config(format!("window fraction {window_fraction} must lie in (0, 1]")));
    }
    let n = profile.len();
    let trim = ((n as f64) * (1.0 - window_fraction) / 2.0).round() as usize;
    let (p, t) = (&profile[trim..n - trim], &taus[trim..n - trim]);

    let w: f64 = p.iter().sum();
    if !(w > 0.0) {
        return Err(Error::EmptyProfile);
    }
    let mean = p.iter().zip(t).map(|(a, x)| a * x).sum::<f64>() / w;
    let var = p.iter().zip(t).map(|(a, x)| a * (x - mean) * (x - mean)).sum::<f64>() / w;
    if var < 0.0 || !var.is_finite() {
        return Err(Error::NegativeVariance(var));
    }
    Ok(var.sqrt())
}

/// Band intensities of one ensemble, summed per antithetic group.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRun {
    /// Identifies grid, fiber and quantum-signal settings shared by the
    /// co-propagation and dark-fiber runs.
    pub fingerprint: String,
    pub master_seed: u64,
    pub taus: Vec<f64>,
    pub groups: Vec<IntensityAccumulator>,
}

impl EnsembleRun {
    pub fn trajectories(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn total(&self) -> Result<IntensityAccumulator> {
        let mut acc = IntensityAccumulator::new(self.taus.len());
        for g in &self.groups {
            acc.merge(g)?;
        }
        Ok(acc)
    }

    fn total_without(&self, skip: usize) -> Result<IntensityAccumulator> {
        let mut acc = IntensityAccumulator::new(self.taus.len());
        for (i, g) in self.groups.iter().enumerate() {
            if i != skip {
                acc.merge(g)?;
            }
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkResult {
    pub c_value: f64,
    pub rms_co: f64,
    pub rms_df: f64,
    pub ensemble_size: usize,
    /// Jackknife over antithetic groups; NaN with fewer than two groups.
    pub standard_error: f64,
    pub imag_residue: f64,
    pub statistics_warning: bool,
    pub fingerprint: String,
    pub master_seed: u64,
}

/// C = rms_co / rms_df over the central `window_fraction` of the window.
pub fn crosstalk_ratio(co: &EnsembleRun, dark: &EnsembleRun, window_fraction: f64) -> Result<CrosstalkResult> {
    if co.fingerprint != dark.fingerprint {
        return Err(Error::RunMismatch(format!("configuration {} vs {}", co.fingerprint, dark.fingerprint)));
    }
    if co.master_seed != dark.master_seed {
        return Err(Error::RunMismatch(format!("master seed {} vs {}", co.master_seed, dark.master_seed)));
    }
    if co.taus != dark.taus {
        return Err(Error::RunMismatch("time grids differ".into()));
    }
    if co.groups.len() != dark.groups.len() || co.groups.iter().zip(&dark.groups).any(|(a, b)| a.count != b.count) {
        return Err(Error::RunMismatch("ensemble layouts differ".into()));
    }

    let ratio = |a: &IntensityAccumulator, b: &IntensityAccumulator| -> Result<(f64, f64, f64, MeanIntensity, MeanIntensity)> {
        let (ma, mb) = (a.mean()?, b.mean()?);
        let ra = rms_width_windowed(&ma.profile, &co.taus, window_fraction)?;
        let rb = rms_width_windowed(&mb.profile, &co.taus, window_fraction)?;
        Ok((ra / rb, ra, rb, ma, mb))
    };

    let (c_value, rms_co, rms_df, mco, mdf) = ratio(&co.total()?, &dark.total()?)?;
    let g = co.groups.len();
    let standard_error = if g >= 2 {
        let mut loo = Vec::with_capacity(g);
        for i in 0..g {
            loo.push(ratio(&co.total_without(i)?, &dark.total_without(i)?)?.0);
        }
        let m = loo.iter().sum::<f64>() / g as f64;
        ((g as f64 - 1.0) / g as f64 * loo.iter().map(|c| (c - m) * (c - m)).sum::<f64>()).sqrt()
    } else {
        f64::NAN
    };
    Ok(CrosstalkResult {
        c_value,
        rms_co,
        rms_df,
        ensemble_size: co.trajectories(),
        standard_error,
        imag_residue: mco.imag_residue.max(mdf.imag_residue),
        statistics_warning: mco.statistics_warning() || mdf.statistics_warning(),
        fingerprint: co.fingerprint.clone(),
        master_seed: co.master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::energy;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> SimulationGrid {
        // bins of 2π/8 ≈ 0.785
        SimulationGrid::uniform(512, 8.0 * std::f64::consts::PI, 1e-3, 1)
    }

    fn tone(g: &SimulationGrid, k: f64, amp: f64) -> Vec<Complex64> {
        g.taus.iter().map(|&t| Complex64::from_polar(amp, k * t)).collect()
    }

    #[test]
    fn mask_is_half_open() {
        let g = grid();
        // bins are 2π / 8π = 0.25 apart, so ±1 falls exactly on bins
        let f = BandFilter::new(0.0, 1.0, &g).unwrap();
        let inside: Vec<f64> = g.wavenumbers.iter().zip(&f.mask).filter(|(_, &m)| m == 1.0).map(|(k, _)| *k).collect();
        assert_eq!(inside.len(), 8);
        assert!(inside.iter().any(|&k| (k + 1.0).abs() < 1e-12));
        assert!(inside.iter().all(|&k| k < 1.0 - 1e-12));
        let f = BandFilter::new(0.0, 0.9, &g).unwrap();
        assert_eq!(f.mask.iter().sum::<f64>(), 7.0);
    }

    #[test]
    fn band_beyond_nyquist_rejected() {
        let g = grid();
        assert!(matches!(BandFilter::new(g.nyquist(), 1.0, &g), Err(Error::BeyondNyquist { .. })));
    }

    #[test]
    fn in_band_field_passes_unchanged() {
        let g = grid();
        let f = BandFilter::new(0.0, 5.0, &g).unwrap();
        let p = ScaledFieldPair::coherent(tone(&g, 2.0 * 2.0 * std::f64::consts::PI / g.tau_window, 0.3));
        let out = bandpass_extract(&p, &f).unwrap();
        for (a, b) in out.phi.iter().zip(&p.phi) {
            assert!((a - b).norm() < 1e-12 * 0.3);
        }
    }

    #[test]
    fn out_of_band_tone_removed() {
        let g = grid();
        let dk = 2.0 * std::f64::consts::PI / g.tau_window;
        let f = BandFilter::new(0.0, 4.0 * dk, &g).unwrap();
        let p = ScaledFieldPair::coherent(tone(&g, 16.0 * dk, 1.0));
        let out = bandpass_extract(&p, &f).unwrap();
        assert!(energy(&out.phi) < 1e-20 * energy(&p.phi));
    }

    #[test]
    fn two_tones_keep_in_band_one() {
        let g = grid();
        let dk = 2.0 * std::f64::consts::PI / g.tau_window;
        let f = BandFilter::new(0.0, 4.0 * dk, &g).unwrap();
        let a = tone(&g, 1.0 * dk, 0.7);
        let b = tone(&g, 9.0 * dk, 1.3);
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let out = bandpass_extract(&ScaledFieldPair::coherent(sum), &f).unwrap();
        for (x, y) in out.phi.iter().zip(&a) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_split() {
        let g = grid();
        let f = BandFilter::new(1.0, 3.0, &g).unwrap();
        let phi: Vec<Complex64> = g.taus.iter().map(|&t| Complex64::new((-t * t).exp(), (t * 0.3).sin() * (-t * t / 4.0).exp())).collect();
        let p = ScaledFieldPair::coherent(phi);
        let a = bandpass_extract(&p, &f).unwrap();
        let b = bandpass_extract(&p, &f.complement()).unwrap();
        let total = energy(&p.phi);
        assert_relative_eq!(energy(&a.phi) + energy(&b.phi), total, max_relative = 1e-10);
    }

    #[test]
    fn deterministic_mean_intensity() {
        let g = grid();
        let p = ScaledFieldPair::coherent(tone(&g, 0.0, 2.0));
        let m = mean_intensity(std::slice::from_ref(&p)).unwrap();
        assert!(m.profile.iter().all(|v| (v - 4.0).abs() < 1e-12));
        assert_eq!(m.imag_residue, 0.0);
        let many = mean_intensity(&vec![p; 5]).unwrap();
        assert_eq!(many.profile, m.profile);
        assert!(mean_intensity(&[]).is_err());
    }

    #[test]
    fn gaussian_width() {
        let n = 4096;
        let d = 40.0 / n as f64;
        let taus: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * d).collect();
        let t0 = 1.7;
        let prof: Vec<f64> = taus.iter().map(|t| (-t * t / (t0 * t0)).exp()).collect();
        assert_relative_eq!(rms_width(&prof, &taus).unwrap(), t0 / 2f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn two_point_width() {
        let taus = [-2.0, -1.0, 0.0, 1.0, 2.0];
        assert_relative_eq!(rms_width(&[1.0, 0.0, 0.0, 0.0, 1.0], &taus).unwrap(), 2.0);
        assert!(matches!(rms_width(&[0.0; 5], &taus), Err(Error::EmptyProfile)));
    }

    #[test]
    fn window_fraction_trims_edges() {
        let taus: Vec<f64> = (0..10).map(|i| i as f64 - 5.0).collect();
        let mut prof = vec![0.0; 10];
        prof[0] = 100.0;
        prof[4] = 1.0;
        prof[6] = 1.0;
        assert_relative_eq!(rms_width_windowed(&prof, &taus, 0.8).unwrap(), 1.0);
    }

    fn run(profiles: &[Vec<f64>], fp: &str) -> EnsembleRun {
        let n = profiles[0].len();
        let taus = (0..n).map(|i| i as f64 - n as f64 / 2.0).collect();
        let groups = profiles
            .iter()
            .map(|p| {
                let mut a = IntensityAccumulator::new(n);
                a.add(&p.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()).unwrap();
                a
            })
            .collect();
        EnsembleRun { fingerprint: fp.into(), master_seed: 3, taus, groups }
    }

    fn bump(n: usize, w: f64) -> Vec<f64> {
        (0..n).map(|i| (-((i as f64 - n as f64 / 2.0) / w).powi(2)).exp()).collect()
    }

    #[test]
    fn identical_runs_give_unity() {
        let r = run(&[bump(64, 3.0), bump(64, 3.2)], "a");
        let c = crosstalk_ratio(&r, &r, 0.8).unwrap();
        assert_eq!(c.c_value, 1.0);
        assert_eq!(c.standard_error, 0.0);
        assert_eq!(c.ensemble_size, 2);
    }

    #[test]
    fn wider_co_run_raises_c() {
        let co = run(&[bump(64, 4.0), bump(64, 4.0)], "a");
        let df = run(&[bump(64, 3.0), bump(64, 3.0)], "a");
        let c = crosstalk_ratio(&co, &df, 0.8).unwrap();
        assert!(c.c_value > 1.0);
        assert_relative_eq!(c.c_value, c.rms_co / c.rms_df);
    }

    #[test]
    fn single_group_has_no_error_bar() {
        let r = run(&[bump(64, 3.0)], "a");
        assert!(crosstalk_ratio(&r, &r, 0.8).unwrap().standard_error.is_nan());
    }

    #[test]
    fn mismatches_rejected() {
        let a = run(&[bump(64, 3.0)], "a");
        let b = run(&[bump(64, 3.0)], "b");
        assert!(matches!(crosstalk_ratio(&a, &b, 0.8), Err(Error::RunMismatch(_))));
        let mut c = a.clone();
        c.master_seed = 9;
        assert!(matches!(crosstalk_ratio(&a, &c, 0.8), Err(Error::RunMismatch(_))));
        let d = run(&[bump(64, 3.0), bump(64, 3.0)], "a");
        assert!(matches!(crosstalk_ratio(&a, &d, 0.8), Err(Error::RunMismatch(_))));
    }

    proptest! {
        #[test]
        fn width_is_shift_invariant(shift in -10i32..10, w in 1.0f64..5.0) {
            let n = 256;
            let taus: Vec<f64> = (0..n).map(|i| i as f64 - 128.0).collect();
            let base = bump(n, w);
            let mut moved = vec![0.0; n];
            for (i, &v) in base.iter().enumerate() {
                let j = i as i32 + shift;
                if (0..n as i32).contains(&j) {
                    moved[j as usize] = v;
                }
            }
            let a = rms_width(&base, &taus).unwrap();
            let b = rms_width(&moved, &taus).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a);
        }

        #[test]
        fn width_scales_with_time_axis(s in 0.1f64..10.0) {
            let taus: Vec<f64> = (0..64).map(|i| i as f64 - 32.0).collect();
            let scaled: Vec<f64> = taus.iter().map(|t| t * s).collect();
            let p = bump(64, 5.0);
            let a = rms_width(&p, &taus).unwrap();
            let b = rms_width(&p, &scaled).unwrap();
            prop_assert!((b - s * a).abs() < 1e-9 * b);
        }
    }
}
