//! Fiber constants, scaled units, the ITU channel plan and the discrete
//! simulation grid.
//!
//! Fields are simulated as complex envelopes relative to the carrier of a
//! reference channel, so a channel enters the equations only through its
//! scaled offset `(j - reference) * Δω * t0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant [J s] (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant [J/K] (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// First and last ITU channels of the C-band 100 GHz grid.
pub const ITU_FIRST_CHANNEL: u32 = 16;
pub const ITU_LAST_CHANNEL: u32 = 59;

const ITU_ANCHOR_HZ: f64 = 190.0e12;
const ITU_STEP_HZ: f64 = 0.1e12;

/// Converts a power loss in dB/km into an amplitude attenuation rate [1/m].
pub fn db_per_km_to_alpha_amp(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0 / 2.0 / 1.0e3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Pulse duration [s]; also the time unit of the scaled equations.
    pub t0: f64,
    /// Group velocity dispersion [s^2/m]; negative is anomalous.
    pub beta2: f64,
    /// Kerr coefficient [1/(W m)].
    pub gamma_nl: f64,
    /// Amplitude attenuation [1/m].
    pub alpha_amp: f64,
    /// Reservoir temperature [K].
    pub temperature: f64,
    /// Fiber length [m].
    pub fiber_length: f64,
    /// Mean photon number of the quantum pulse.
    pub mu: f64,
    /// Classical bit rate [bit/s].
    pub bit_rate: f64,
    /// Group index, only needed to convert scaled fields back to photon flux.
    pub group_index: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            t0: std::f64::consts::SQRT_2 * 100e-12,
            beta2: -18e-27,
            gamma_nl: 0.78e-3,
            alpha_amp: db_per_km_to_alpha_amp(0.2),
            temperature: 300.0,
            fiber_length: 50e3,
            mu: 0.4,
            bit_rate: 10e9,
            group_index: 1.468,
        }
    }
}

impl PhysicalParams {
    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        check(self.t0.is_finite() && self.t0 > 0.0, "t0 must be positive");
        check(self.beta2.is_finite() && self.beta2 != 0.0, "beta2 must be non-zero");
        check(self.gamma_nl.is_finite() && self.gamma_nl > 0.0, "gamma_nl must be positive");
        check(self.alpha_amp.is_finite() && self.alpha_amp >= 0.0, "alpha_amp must be non-negative");
        check(self.temperature.is_finite() && self.temperature >= 0.0, "temperature must be non-negative");
        check(self.fiber_length.is_finite() && self.fiber_length > 0.0, "fiber_length must be positive");
        check(self.mu.is_finite() && self.mu >= 0.0, "mu must be non-negative");
        check(self.bit_rate.is_finite() && self.bit_rate > 0.0, "bit_rate must be positive");
        check(self.group_index.is_finite() && self.group_index >= 1.0, "group_index must be at least 1");
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    /// Classical symbol rate [baud]; 16-QAM carries four bits per symbol.
    pub fn symbol_rate(&self) -> f64 {
        self.bit_rate / 4.0
    }

    pub fn is_anomalous(&self) -> bool {
        self.beta2 < 0.0
    }
}

/// Derived dimensionless units of the scaled field equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledUnits {
    /// L_d = t0^2 / |beta2| [m].
    pub dispersion_length: f64,
    /// Attenuation per unit ζ.
    pub gamma_scaled: f64,
    /// Photon-number scale of the positive-P noise.
    pub n0: f64,
    /// Fiber length in dispersion lengths.
    pub zeta_max: f64,
    /// Reference carrier angular frequency [rad/s].
    pub omega0: f64,
    /// gamma_nl * L_d [1/W]; scaled field = sqrt(power_scale * P).
    pub power_scale: f64,
}

pub fn derive_scaled_units(params: &PhysicalParams, reference_wavelength: f64) -> Result<ScaledUnits> {
    params.validate()?;
    if !(reference_wavelength > 1.2e-6 && reference_wavelength < 1.7e-6) {
        return Err(Error::InvalidParams(format!(
            "reference wavelength {reference_wavelength} m outside (1.2 µm, 1.7 µm)"
        )));
    }
    let omega0 = 2.0 * PI * SPEED_OF_LIGHT / reference_wavelength;
    let dispersion_length = params.t0 * params.t0 / params.beta2.abs();
    Ok(ScaledUnits {
        dispersion_length,
        gamma_scaled: params.alpha_amp * dispersion_length,
        n0: params.t0 / (HBAR * omega0 * dispersion_length * params.gamma_nl),
        zeta_max: params.fiber_length / dispersion_length,
        omega0,
        power_scale: params.gamma_nl * dispersion_length,
    })
}

fn check_channel(channel: u32) -> Result<()> {
    if (ITU_FIRST_CHANNEL..=ITU_LAST_CHANNEL).contains(&channel) {
        Ok(())
    } else {
        Err(Error::ChannelOutOfBand(channel))
    }
}

/// Center frequency [Hz] of an ITU channel on the 100 GHz grid.
pub fn itu_frequency(channel: u32) -> Result<f64> {
    check_channel(channel)?;
    Ok(ITU_ANCHOR_HZ + channel as f64 * ITU_STEP_HZ)
}

/// Vacuum wavelength [m] of an ITU channel.
pub fn itu_wavelength(channel: u32) -> Result<f64> {
    Ok(SPEED_OF_LIGHT / itu_frequency(channel)?)
}

/// Angular carrier frequency [rad/s] of an ITU channel.
pub fn itu_angular_frequency(channel: u32) -> Result<f64> {
    Ok(2.0 * PI * itu_frequency(channel)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WdmPlan {
    /// Channel spacing Δω [rad/s].
    pub spacing: f64,
    /// Channel whose carrier is the baseband origin.
    pub reference_channel: u32,
    pub quantum_channel: u32,
    pub classical_channel: u32,
}

impl WdmPlan {
    pub fn new(quantum_channel: u32, classical_channel: u32) -> Result<Self> {
        let plan = Self {
            spacing: 2.0 * PI * 100e9,
            reference_channel: quantum_channel,
            quantum_channel,
            classical_channel,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        check_channel(self.reference_channel)?;
        check_channel(self.quantum_channel)?;
        check_channel(self.classical_channel)?;
        if self.quantum_channel == self.classical_channel {
            return Err(Error::InvalidPlan(format!(
                "quantum and classical signals share channel {}",
                self.quantum_channel
            )));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::InvalidPlan("channel spacing must be positive".into()));
        }
        Ok(())
    }

    pub fn with_classical(&self, classical_channel: u32) -> Result<Self> {
        let plan = Self { classical_channel, ..self.clone() };
        plan.validate()?;
        Ok(plan)
    }

    /// Scaled angular offset of `channel` from the reference carrier.
    pub fn channel_offset(&self, channel: u32, t0: f64) -> Result<f64> {
        check_channel(channel)?;
        Ok((channel as f64 - self.reference_channel as f64) * self.spacing * t0)
    }

    /// Group-delay walk-off [s] between the two occupied channels over the fiber.
    pub fn walk_off(&self, params: &PhysicalParams) -> f64 {
        let sep = (self.classical_channel as f64 - self.quantum_channel as f64).abs();
        params.beta2.abs() * self.spacing * sep * params.fiber_length
    }
}

/// How the discrete grid is sized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridPolicy {
    /// Nyquist bandwidth over (largest offset + signal bandwidth).
    pub nyquist_factor: f64,
    /// Pulse widths of margin added to the walk-off window.
    pub window_pulse_widths: f64,
    /// Propagation steps over the full fiber.
    pub steps: usize,
    /// Lower bound on the sample count (rounded up to a power of two).
    pub min_points: usize,
    /// Refuse grids larger than this.
    pub max_points: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            nyquist_factor: 1.5,
            window_pulse_widths: 8.0,
            steps: 2000,
            min_points: 0,
            max_points: 1 << 22,
        }
    }
}

/// Half-bandwidth (scaled) reserved around the quantum pulse, eight spectral
/// standard deviations of the unit-width Gaussian.
pub const QUANTUM_HALF_BANDWIDTH: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationGrid {
    pub n_tau: usize,
    pub tau_window: f64,
    pub d_tau: f64,
    pub d_zeta: f64,
    pub n_steps: usize,
    /// Scaled angular frequencies in FFT order.
    pub wavenumbers: Vec<f64>,
    /// Sample times, with τ = 0 at index n_tau / 2.
    pub taus: Vec<f64>,
}

impl SimulationGrid {
    /// Builds a grid from an explicit size, window and step; used directly by
    /// the solver tests and indirectly through [`build_grid`].
    pub fn uniform(n_tau: usize, tau_window: f64, d_zeta: f64, n_steps: usize) -> Self {
        let d_tau = tau_window / n_tau as f64;
        let half = (n_tau / 2) as isize;
        let taus = (0..n_tau).map(|i| (i as isize - half) as f64 * d_tau).collect();
        Self {
            n_tau,
            tau_window,
            d_tau,
            d_zeta,
            n_steps,
            wavenumbers: angular_wavenumbers(n_tau, d_tau),
            taus,
        }
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.d_tau
    }

    pub fn zeta_max(&self) -> f64 {
        self.d_zeta * self.n_steps as f64
    }

    pub fn check_frequency(&self, offset: f64) -> Result<()> {
        if offset.abs() < self.nyquist() {
            Ok(())
        } else {
            Err(Error::BeyondNyquist { offset, nyquist: self.nyquist() })
        }
    }
}

/// Angular frequencies of a length-`n` DFT with sample spacing `d_tau`, in
/// FFT order (0, 1, .., n/2 - 1, -n/2, .., -1) times 2π / (n d_tau).
pub fn angular_wavenumbers(n: usize, d_tau: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * d_tau);
    (0..n)
        .map(|i| {
            let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// Window length [scaled] the grid must exceed to hold the quantum pulse
/// and the walk-off to the farthest of `channels`.
pub fn required_window(plan: &WdmPlan, units: &ScaledUnits, params: &PhysicalParams, policy: &GridPolicy, channels: &[u32]) -> f64 {
    let spacing = plan.spacing * params.t0;
    let max_sep = channels
        .iter()
        .chain([&plan.classical_channel])
        .map(|&c| (c as f64 - plan.quantum_channel as f64).abs())
        .fold(0.0, f64::max);
    let walk_off = max_sep * spacing * units.zeta_max;
    let width = (1.0 + units.zeta_max * units.zeta_max).sqrt();
    walk_off + policy.window_pulse_widths * width
}

pub fn build_grid(plan: &WdmPlan, units: &ScaledUnits, params: &PhysicalParams, policy: &GridPolicy) -> Result<SimulationGrid> {
    build_grid_covering(plan, units, params, policy, &[])
}

/// Like [`build_grid`], but also accommodates every channel in `extra`, so a
/// whole channel sweep can share one grid.
pub fn build_grid_covering(
    plan: &WdmPlan,
    units: &ScaledUnits,
    params: &PhysicalParams,
    policy: &GridPolicy,
    extra: &[u32],
) -> Result<SimulationGrid> {
    plan.validate()?;
    params.validate()?;
    for &c in extra {
        check_channel(c)?;
    }
    if policy.steps == 0 {
        return Err(Error::Config("grid.steps must be positive".into()));
    }
    if !(policy.nyquist_factor >= 1.0) || !(policy.window_pulse_widths > 0.0) {
        return Err(Error::Config("grid.nyquist_factor must be >= 1 and window_pulse_widths > 0".into()));
    }

    let spacing = plan.spacing * params.t0;
    let mut max_offset = 0.0f64;
    for &c in extra.iter().chain([&plan.quantum_channel, &plan.classical_channel]) {
        max_offset = max_offset.max(plan.channel_offset(c, params.t0)?.abs());
    }
    let classical_bw = 2.0 * PI * params.symbol_rate() * params.t0;
    let signal_bw = classical_bw.max(QUANTUM_HALF_BANDWIDTH);
    let quantum_edge = plan.channel_offset(plan.quantum_channel, params.t0)?.abs() + spacing / 2.0;
    let nyquist = (policy.nyquist_factor * (max_offset + signal_bw)).max(quantum_edge * 1.01);
    let d_tau_max = PI / nyquist;

    // Snap the window to whole periods of the channel spacing so that every
    // channel offset falls exactly on a DFT bin.
    let cell = 2.0 * PI / spacing;
    let need = required_window(plan, units, params, policy, extra);
    let tau_window = ((need / cell).floor() + 1.0) * cell;

    let required = ((tau_window / d_tau_max).ceil() as usize)
        .max(policy.min_points)
        .max(2)
        .next_power_of_two();
    if required > policy.max_points {
        return Err(Error::GridTooLarge { required, cap: policy.max_points });
    }
    Ok(SimulationGrid::uniform(
        required,
        tau_window,
        units.zeta_max / policy.steps as f64,
        policy.steps,
    ))
}
