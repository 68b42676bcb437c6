//! Run configuration: JSON, strict keys, physical defaults.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{antithetic_group_size, KerrNoiseConvention};
use crate::params::{GridPolicy, PhysicalParams, WdmPlan, ITU_FIRST_CHANNEL, ITU_LAST_CHANNEL};
use crate::signals::QamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub channel_spacing_hz: f64,
    pub quantum_channel: u32,
    /// Classical channel for sweeps that do not vary it.
    pub classical_channel: u32,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { channel_spacing_hz: 100e9, quantum_channel: 38, classical_channel: 39 }
    }
}

impl PlanConfig {
    pub fn wdm_plan(&self, classical_channel: u32) -> Result<WdmPlan> {
        let plan = WdmPlan {
            spacing: 2.0 * PI * self.channel_spacing_hz,
            reference_channel: self.quantum_channel,
            quantum_channel: self.quantum_channel,
            classical_channel,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Stochastic positive-P trajectories.
    #[default]
    PositiveP,
    /// A single noise-free trajectory with φ⁺ = φ*.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    pub mode: NoiseMode,
    pub kerr_convention: KerrNoiseConvention,
    /// Group trajectories into sign-flipped copies of one noise stream.
    pub antithetic: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self { mode: NoiseMode::PositiveP, kerr_convention: KerrNoiseConvention::Independent, antithetic: true }
    }
}

fn default_channels() -> Vec<u32> {
    (ITU_FIRST_CHANNEL..=ITU_LAST_CHANNEL).filter(|&c| c != PlanConfig::default().quantum_channel).collect()
}

fn default_channel_powers() -> Vec<f64> {
    vec![1e-3, 10e-3]
}

fn default_power_list() -> Vec<f64> {
    (0..=6).map(|i| 1e-4 * 10f64.powf(i as f64 / 2.0)).collect()
}

fn default_power_channels() -> Vec<u32> {
    vec![39, 40]
}

fn default_t0_values() -> Vec<f64> {
    [25e-12, 50e-12, 75e-12, 100e-12].iter().map(|t| t * std::f64::consts::SQRT_2).collect()
}

fn default_pulse_power() -> f64 {
    1e-3
}

fn default_colormap_powers() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1]
}

fn default_snapshots() -> usize {
    100
}

/// What to vary. Powers are launch powers in watts, pulse widths in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    Channel {
        #[serde(default = "default_channels")]
        channels: Vec<u32>,
        #[serde(default = "default_channel_powers")]
        powers: Vec<f64>,
    },
    Power {
        #[serde(default = "default_power_list")]
        powers: Vec<f64>,
        #[serde(default = "default_power_channels")]
        classical_channels: Vec<u32>,
    },
    PulseWidth {
        #[serde(default = "default_t0_values")]
        t0_values: Vec<f64>,
        #[serde(default = "default_pulse_power")]
        power: f64,
    },
    Colormap {
        #[serde(default = "default_colormap_powers")]
        powers: Vec<f64>,
        /// Number of ζ intervals between snapshots over the fiber.
        #[serde(default = "default_snapshots")]
        snapshots: usize,
    },
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::Channel { channels: default_channels(), powers: default_channel_powers() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalParams,
    pub plan: PlanConfig,
    pub qam: QamConfig,
    pub grid: GridPolicy,
    pub noise: NoiseSettings,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub midpoint_iterations: usize,
    /// Central fraction of the τ window used for RMS moments.
    pub rms_window_fraction: f64,
    pub sweep: SweepSpec,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            physical: PhysicalParams::default(),
            plan: PlanConfig::default(),
            qam: QamConfig::default(),
            grid: GridPolicy::default(),
            noise: NoiseSettings::default(),
            ensemble_size: 64,
            master_seed: 1,
            midpoint_iterations: 4,
            rms_window_fraction: 0.8,
            sweep: SweepSpec::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self.physical.violations().into_iter().map(|v| format!("physical: {v}")).collect();
        let channel_ok = |c: u32| (ITU_FIRST_CHANNEL..=ITU_LAST_CHANNEL).contains(&c);
        let q = self.plan.quantum_channel;

        if !(self.plan.channel_spacing_hz.is_finite() && self.plan.channel_spacing_hz > 0.0) {
            out.push("plan: channel_spacing_hz must be positive".into());
        }
        if !channel_ok(q) {
            out.push(format!("plan: quantum_channel {q} outside {ITU_FIRST_CHANNEL}..={ITU_LAST_CHANNEL}"));
        }
        let mut check_classical = |ctx: &str, c: u32| {
            if !channel_ok(c) {
                out.push(format!("{ctx}: channel {c} outside {ITU_FIRST_CHANNEL}..={ITU_LAST_CHANNEL}"));
            } else if c == q {
                out.push(format!("{ctx}: classical channel {c} equals the quantum channel"));
            }
        };
        check_classical("plan.classical_channel", self.plan.classical_channel);
        match &self.sweep {
            SweepSpec::Channel { channels, .. } => channels.iter().for_each(|&c| check_classical("sweep.channels", c)),
            SweepSpec::Power { classical_channels, .. } => {
                classical_channels.iter().for_each(|&c| check_classical("sweep.classical_channels", c))
            }
            _ => {}
        }

        if let Err(e) = self.qam.validate() {
            out.push(format!("qam: {e}"));
        }
        let g = &self.grid;
        if !(g.nyquist_factor >= 1.0) {
            out.push("grid: nyquist_factor must be at least 1".into());
        }
        if !(g.window_pulse_widths > 0.0) {
            out.push("grid: window_pulse_widths must be positive".into());
        }
        if g.steps == 0 {
            out.push("grid: steps must be positive".into());
        }
        if g.min_points > g.max_points {
            out.push("grid: min_points exceeds max_points".into());
        }
        if self.ensemble_size == 0 {
            out.push("ensemble_size must be positive".into());
        } else if self.noise.mode == NoiseMode::PositiveP && self.noise.antithetic {
            let k = antithetic_group_size(self.noise.kerr_convention);
            if !self.ensemble_size.is_multiple_of(k) {
                out.push(format!("ensemble_size {} must be a multiple of {k} with antithetic sampling", self.ensemble_size));
            }
        }
        if self.midpoint_iterations == 0 {
            out.push("midpoint_iterations must be positive".into());
        }
        if !(self.rms_window_fraction > 0.0 && self.rms_window_fraction <= 1.0) {
            out.push("rms_window_fraction must lie in (0, 1]".into());
        }

        let power_ok = |p: &f64| p.is_finite() && *p >= 0.0;
        match &self.sweep {
            SweepSpec::Channel { channels, powers } => {
                if channels.is_empty() {
                    out.push("sweep.channels is empty".into());
                }
                if powers.is_empty() || !powers.iter().all(power_ok) {
                    out.push("sweep.powers must be a non-empty list of non-negative watts".into());
                }
            }
            SweepSpec::Power { powers, classical_channels } => {
                if classical_channels.is_empty() {
                    out.push("sweep.classical_channels is empty".into());
                }
                if powers.is_empty() || !powers.iter().all(power_ok) {
                    out.push("sweep.powers must be a non-empty list of non-negative watts".into());
                }
            }
            SweepSpec::PulseWidth { t0_values, power } => {
                if t0_values.is_empty() || !t0_values.iter().all(|t| t.is_finite() && *t > 0.0) {
                    out.push("sweep.t0_values must be a non-empty list of positive durations".into());
                }
                if !power_ok(power) {
                    out.push("sweep.power must be non-negative".into());
                }
            }
            SweepSpec::Colormap { powers, snapshots } => {
                if powers.is_empty() || !powers.iter().all(power_ok) {
                    out.push("sweep.powers must be a non-empty list of non-negative watts".into());
                }
                if *snapshots == 0 {
                    out.push("sweep.snapshots must be positive".into());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{} problem(s):\n  - {}", v.len(), v.join("\n  - "))))
        }
    }

    /// Reduced preset: channels 34-42 around the quantum channel, 16
    /// trajectories and at least 2^14 grid points.
    pub fn desk_scale(mut self) -> Self {
        self.ensemble_size = 16;
        self.grid.min_points = self.grid.min_points.max(1 << 14);
        if let SweepSpec::Channel { channels, .. } = &mut self.sweep {
            *channels = (34..=42).filter(|&c| c != self.plan.quantum_channel).collect();
        }
        self
    }

    /// Trajectories actually run per ensemble.
    pub fn effective_ensemble(&self) -> usize {
        match self.noise.mode {
            NoiseMode::PositiveP => self.ensemble_size,
            NoiseMode::Off => 1,
        }
    }
}

/// Parses a JSON config; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let p = &cfg.physical;
        assert_eq!(p.t0, std::f64::consts::SQRT_2 * 100e-12);
        assert_eq!(p.mu, 0.4);
        assert_eq!(p.temperature, 300.0);
        assert_eq!(p.fiber_length, 50e3);
        assert_eq!(p.gamma_nl, 0.78e-3);
        assert_eq!(p.beta2, -18e-27);
        assert_eq!(p.bit_rate, 10e9);
        assert_eq!(cfg.plan.channel_spacing_hz, 100e9);
        assert_eq!(cfg.ensemble_size, 64);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_config(r#"{"physical": {"beta3": 1.0}}"#).unwrap_err().to_string();
        assert!(err.contains("beta3"), "{err}");
        let err = parse_config("{\n  \"ensemble\": 3\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_config(r#"{"sweep": {"kind": "power", "channels": [39]}}"#).is_err());
    }

    #[test]
    fn classical_on_quantum_channel_rejected() {
        let err = parse_config(r#"{"plan": {"classical_channel": 38}}"#).unwrap_err().to_string();
        assert!(err.contains("equals the quantum channel"), "{err}");
    }

    #[test]
    fn every_violation_listed() {
        let err = parse_config(r#"{"physical": {"t0": -1, "mu": -2}, "ensemble_size": 6, "rms_window_fraction": 2}"#)
            .unwrap_err()
            .to_string();
        for needle in ["t0", "mu", "ensemble_size", "rms_window_fraction"] {
            assert!(err.contains(needle), "{needle} missing from {err}");
        }
        assert!(err.starts_with("config error: 4 problem(s)"), "{err}");
    }

    #[test]
    fn sweep_variants_parse_with_defaults() {
        let cfg = parse_config(r#"{"sweep": {"kind": "power"}}"#).unwrap();
        match cfg.sweep {
            SweepSpec::Power { powers, classical_channels } => {
                assert_eq!(classical_channels, vec![39, 40]);
                assert_eq!(powers.len(), 7);
                assert!((powers[0] - 1e-4).abs() < 1e-18 && (powers[6] - 0.1).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let cfg = parse_config(r#"{"sweep": {"kind": "pulse_width", "t0_values": [1e-11]}}"#).unwrap();
        assert_eq!(cfg.sweep, SweepSpec::PulseWidth { t0_values: vec![1e-11], power: 1e-3 });
        let cfg = parse_config(r#"{"sweep": {"kind": "colormap"}}"#).unwrap();
        assert!(matches!(cfg.sweep, SweepSpec::Colormap { snapshots: 100, .. }));
    }

    #[test]
    fn desk_scale_preset() {
        let cfg = RunConfig::default().desk_scale();
        assert_eq!(cfg.ensemble_size, 16);
        assert_eq!(cfg.grid.min_points, 1 << 14);
        assert_eq!(cfg.sweep, SweepSpec::Channel { channels: vec![34, 35, 36, 37, 39, 40, 41, 42], powers: vec![1e-3, 1e-2] });
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig { master_seed: 99, sweep: SweepSpec::Colormap { powers: vec![0.5], snapshots: 3 }, ..Default::default() };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
