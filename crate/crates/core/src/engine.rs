//! Split-step propagation of the coupled positive-P field equations.
//!
//! Each step applies a linear half-step in the spectral domain, the
//! nonlinear-plus-noise operator by a semi-implicit midpoint fixed-point
//! iteration, and a second linear half-step. In the spectral domain the linear
//! operator is `(i/2)(1 + s k²) - γ` with `s = -1` for anomalous and `s = +1`
//! for normal dispersion; φ⁺ evolves under the complex-conjugate multiplier.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::demux::BandFilter;
use crate::error::{Error, Result};
use crate::noise::{stream_rng, NoiseConfig, NoiseRealization, NoiseSigns};
use crate::params::SimulationGrid;
use crate::signals::ScaledFieldPair;
use crate::spectral::Spectral;

const I: Complex64 = Complex64::new(0.0, 1.0);
const SQRT_I: Complex64 = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
const SQRT_MINUS_I: Complex64 = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionRegime {
    Normal,
    Anomalous,
}

impl DispersionRegime {
    pub fn from_beta2(beta2: f64) -> Self {
        if beta2 < 0.0 {
            Self::Anomalous
        } else {
            Self::Normal
        }
    }

    /// +1 normal, -1 anomalous.
    pub fn sign(self) -> f64 {
        match self {
            Self::Normal => 1.0,
            Self::Anomalous => -1.0,
        }
    }
}

/// Spectral multipliers for one linear half-step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOperators {
    pub linear_half_phi: Vec<Complex64>,
    pub linear_half_phi_plus: Vec<Complex64>,
    pub dispersion_sign: f64,
}

impl StepOperators {
    /// `exp(((i/2)(1 + s k²) - γ) Δζ/2)` per wavenumber, and its conjugate for φ⁺.
    /// With `dispersion_enabled = false` the k² term is dropped.
    pub fn new(wavenumbers: &[f64], d_zeta: f64, gamma_scaled: f64, regime: DispersionRegime, dispersion_enabled: bool) -> Self {
        let s = regime.sign();
        let linear_half_phi: Vec<Complex64> = wavenumbers
            .iter()
            .map(|&k| {
                let k2 = if dispersion_enabled { k * k } else { 0.0 };
                let phase = 0.5 * (1.0 + s * k2) * d_zeta / 2.0;
                Complex64::from_polar((-gamma_scaled * d_zeta / 2.0).exp(), phase)
            })
            .collect();
        let linear_half_phi_plus = linear_half_phi.iter().map(|m| m.conj()).collect();
        Self { linear_half_phi, linear_half_phi_plus, dispersion_sign: s }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub d_zeta: f64,
    pub n_steps: usize,
    pub gamma_scaled: f64,
    pub regime: DispersionRegime,
    pub dispersion_enabled: bool,
    pub midpoint_iterations: usize,
    /// `None` runs without stochastic terms.
    pub noise: Option<NoiseConfig>,
    /// Evolve φ only and hold φ⁺ = φ*.
    pub constrain_conjugate: bool,
}

impl EngineConfig {
    pub fn zeta_max(&self) -> f64 {
        self.d_zeta * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_zeta > 0.0) || !self.d_zeta.is_finite() {
            return Err(Error::Config(format!("step size {} must be positive", self.d_zeta)));
        }
        if self.midpoint_iterations == 0 {
            return Err(Error::Config("midpoint_iterations must be at least 1".into()));
        }
        if !(self.gamma_scaled >= 0.0) {
            return Err(Error::Config("attenuation must be non-negative".into()));
        }
        Ok(())
    }
}

/// Same configuration with all noise removed and φ⁺ tied to φ*; the result is
/// a plain split-step NLSE solver.
pub fn deterministic_mode(config: &EngineConfig) -> EngineConfig {
    EngineConfig { noise: None, constrain_conjugate: true, ..config.clone() }
}

/// Identifies the noise stream a trajectory draws from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryStream {
    pub master_seed: u64,
    pub stream: u64,
    pub signs: NoiseSigns,
}

impl TrajectoryStream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Self { master_seed, stream, signs: NoiseSigns::default() }
    }
}

/// Which band-filtered intensities to keep while propagating.
#[derive(Clone, Debug)]
pub struct SnapshotPlan {
    pub interval: f64,
    pub filter: Option<BandFilter>,
}

impl SnapshotPlan {
    /// Step indices of the floor(ζ_max / interval) + 1 snapshots.
    pub fn steps(&self, d_zeta: f64, n_steps: usize) -> Vec<usize> {
        let zeta_max = d_zeta * n_steps as f64;
        let count = (zeta_max / self.interval * (1.0 + 1e-12)).floor() as usize + 1;
        (0..count)
            .map(|k| ((k as f64 * self.interval / d_zeta).round() as usize).min(n_steps))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub zeta: f64,
    /// φ φ⁺ (band-filtered when the plan has a filter).
    pub intensity: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationRecord {
    pub snapshots: Vec<Snapshot>,
    pub final_pair: ScaledFieldPair,
}

/// F⁻¹[m F[φ]] for φ and F⁻¹[m* F[φ⁺]] for φ⁺.
pub fn linear_half_step(pair: &mut ScaledFieldPair, ops: &StepOperators, spectral: &mut Spectral) {
    spectral.apply_multiplier(&mut pair.phi, &ops.linear_half_phi);
    spectral.apply_multiplier(&mut pair.phi_plus, &ops.linear_half_phi_plus);
}

/// Largest fixed-point corrections of the last two midpoint iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MidpointResidual {
    pub previous: f64,
    pub last: f64,
}

impl MidpointResidual {
    fn diverged(&self, scale: f64) -> bool {
        self.last > self.previous && self.last > 1e-10 * scale.max(f64::MIN_POSITIVE)
    }
}

/// Semi-implicit midpoint update of the nonlinear and noise terms, given the
/// fields after the first linear half-step. Iterates
/// `φ̄⁽ⁱ⁾ = φ̄⁽⁰⁾ + (Δζ/2)[iφ̄⁺⁽ⁱ⁻¹⁾(φ̄⁽ⁱ⁻¹⁾)² + ξ_L + √i ξ_E φ̄⁽ⁱ⁻¹⁾]` (and the
/// mirrored φ⁺ equation) and returns `2φ̄⁽ⁿ⁾ - φ̄⁽⁰⁾` in place.
pub fn nonlinear_midpoint_step(
    pair: &mut ScaledFieldPair,
    noise: Option<&NoiseRealization>,
    d_zeta: f64,
    iterations: usize,
) -> Result<MidpointResidual> {
    let (residual, scale) = midpoint_free(pair, noise, d_zeta, iterations);
    if iterations >= 2 && residual.diverged(scale) {
        return Err(Error::MidpointDivergence { step: 0, previous: residual.previous, last: residual.last });
    }
    Ok(residual)
}

fn midpoint_free(
    pair: &mut ScaledFieldPair,
    noise: Option<&NoiseRealization>,
    d_zeta: f64,
    iterations: usize,
) -> (MidpointResidual, f64) {
    let h = d_zeta / 2.0;
    let mut res = MidpointResidual::default();
    let mut scale = 0.0f64;
    for j in 0..pair.phi.len() {
        let a0 = pair.phi[j];
        let b0 = pair.phi_plus[j];
        let (l, lp, e, ep) = match noise {
            Some(n) => (n.xi_l[j], n.xi_l_plus[j], SQRT_I * n.xi_e[j], SQRT_MINUS_I * n.xi_e_plus[j]),
            None => (Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO),
        };
        let (mut a, mut b) = (a0, b0);
        for it in 1..=iterations {
            let an = a0 + h * (I * b * a * a + l + e * a);
            let bn = b0 + h * (-I * a * b * b + lp + ep * b);
            if it + 1 >= iterations {
                let r = (an - a).norm() + (bn - b).norm();
                if it == iterations {
                    res.last = res.last.max(r);
                } else {
                    res.previous = res.previous.max(r);
                }
            }
            a = an;
            b = bn;
        }
        scale = scale.max(a0.norm() + b0.norm());
        pair.phi[j] = 2.0 * a - a0;
        pair.phi_plus[j] = 2.0 * b - b0;
    }
    (res, scale)
}

fn midpoint_constrained(phi: &mut [Complex64], d_zeta: f64, iterations: usize) -> (MidpointResidual, f64) {
    let h = d_zeta / 2.0;
    let mut res = MidpointResidual::default();
    let mut scale = 0.0f64;
    for z in phi.iter_mut() {
        let a0 = *z;
        let mut a = a0;
        for it in 1..=iterations {
            let an = a0 + h * I * a.norm_sqr() * a;
            if it + 1 >= iterations {
                let r = 2.0 * (an - a).norm();
                if it == iterations {
                    res.last = res.last.max(r);
                } else {
                    res.previous = res.previous.max(r);
                }
            }
            a = an;
        }
        scale = scale.max(2.0 * a0.norm());
        *z = 2.0 * a - a0;
    }
    (res, scale)
}

/// Reusable propagation workspace for one grid and configuration.
#[derive(Clone, Debug)]
pub struct Propagator {
    config: EngineConfig,
    ops: StepOperators,
    spectral: Spectral,
    noise: NoiseRealization,
    n: usize,
}

impl Propagator {
    pub fn new(grid: &SimulationGrid, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let ops = StepOperators::new(
            &grid.wavenumbers,
            config.d_zeta,
            config.gamma_scaled,
            config.regime,
            config.dispersion_enabled,
        );
        Ok(Self {
            ops,
            spectral: Spectral::new(grid.n_tau),
            noise: NoiseRealization::zeros(grid.n_tau),
            n: grid.n_tau,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn operators(&self) -> &StepOperators {
        &self.ops
    }

    /// Propagates `initial` from its ζ over `n_steps` steps. Deterministic for a
    /// given configuration and stream.
    pub fn propagate(
        &mut self,
        initial: &ScaledFieldPair,
        stream: &TrajectoryStream,
        snapshots: Option<&SnapshotPlan>,
    ) -> Result<PropagationRecord> {
        if initial.phi.len() != self.n || initial.phi_plus.len() != self.n {
            return Err(Error::LengthMismatch(initial.phi.len(), self.n));
        }
        let cfg = self.config.clone();
        let snap_steps = snapshots.map(|p| p.steps(cfg.d_zeta, cfg.n_steps)).unwrap_or_default();
        let mut next_snap = 0;
        let mut record = Vec::with_capacity(snap_steps.len());

        let mut pair = initial.clone();
        if cfg.constrain_conjugate {
            pair.phi_plus = conjugate(&pair.phi);
        }
        let zeta0 = pair.zeta;

        for step in 0..=cfg.n_steps {
            while next_snap < snap_steps.len() && snap_steps[next_snap] == step {
                if cfg.constrain_conjugate {
                    pair.phi_plus = conjugate(&pair.phi);
                }
                let plan = snapshots.expect("snapshot steps imply a plan");
                record.push(Snapshot { zeta: pair.zeta, intensity: self.band_intensity(&pair, plan.filter.as_ref()) });
                next_snap += 1;
            }
            if step == cfg.n_steps {
                break;
            }
            self.step(&mut pair, stream, step)?;
            pair.zeta = zeta0 + (step + 1) as f64 * cfg.d_zeta;
        }
        if cfg.constrain_conjugate {
            pair.phi_plus = conjugate(&pair.phi);
        }
        Ok(PropagationRecord { snapshots: record, final_pair: pair })
    }

    fn step(&mut self, pair: &mut ScaledFieldPair, stream: &TrajectoryStream, step: usize) -> Result<()> {
        let cfg = &self.config;
        let (res, scale) = if cfg.constrain_conjugate {
            self.spectral.apply_multiplier(&mut pair.phi, &self.ops.linear_half_phi);
            let out = midpoint_constrained(&mut pair.phi, cfg.d_zeta, cfg.midpoint_iterations);
            self.spectral.apply_multiplier(&mut pair.phi, &self.ops.linear_half_phi);
            out
        } else {
            linear_half_step(pair, &self.ops, &mut self.spectral);
            let noise = match &cfg.noise {
                Some(nc) => {
                    let mut rng = stream_rng(stream.master_seed, stream.stream, step as u64);
                    self.noise.fill(nc, &mut rng, stream.signs);
                    Some(&self.noise)
                }
                None => None,
            };
            let out = midpoint_free(pair, noise, cfg.d_zeta, cfg.midpoint_iterations);
            linear_half_step(pair, &self.ops, &mut self.spectral);
            out
        };
        if cfg.midpoint_iterations >= 2 && res.diverged(scale) {
            return Err(Error::MidpointDivergence { step, previous: res.previous, last: res.last });
        }
        let check = pair.phi.iter().chain(&pair.phi_plus).fold(0.0, |s, z| s + z.re.abs() + z.im.abs());
        if !check.is_finite() {
            return Err(Error::NonFinite { step });
        }
        Ok(())
    }

    fn band_intensity(&mut self, pair: &ScaledFieldPair, filter: Option<&BandFilter>) -> Vec<Complex64> {
        match filter {
            Some(f) => f.extract_with(pair, &mut self.spectral).intensity(),
            None => pair.intensity(),
        }
    }
}

fn conjugate(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().map(|z| z.conj()).collect()
}

/// ∫ φ φ⁺ dτ (real part).
pub fn photon_number(pair: &ScaledFieldPair, d_tau: f64) -> f64 {
    pair.phi.iter().zip(&pair.phi_plus).map(|(a, b)| (a * b).re).sum::<f64>() * d_tau
}
