//! Sweep planning and ensemble execution.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{NoiseMode, RunConfig, SweepSpec};
use crate::demux::{crosstalk_ratio, BandFilter, EnsembleRun, IntensityAccumulator};
use crate::engine::{deterministic_mode, DispersionRegime, EngineConfig, Propagator, SnapshotPlan, TrajectoryStream};
use crate::error::{Error, Result};
use crate::noise::{antithetic_group_size, thermal_occupation, trajectory_stream, NoiseConfig, NoiseSigns};
use crate::params::{build_grid_covering, derive_scaled_units, itu_angular_frequency, itu_wavelength, PhysicalParams, ScaledUnits, SimulationGrid, WdmPlan};
use crate::signals::{compose_launch, qam16_waveform, quantum_peak_power, quantum_pulse, LaunchSpec, QamConfig};
use crate::spectral::Spectral;

/// Trajectories handed to the thread pool at once; results are reduced in
/// index order after each batch.
const BATCH: usize = 8;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub workers: usize,
    /// Record wall-clock time per row (makes CSVs run-dependent).
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1), timings: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub c: f64,
    pub c_stderr: f64,
    pub rms_co: f64,
    pub rms_df: f64,
    pub seed: u64,
    pub walltime_s: Option<f64>,
}

/// Per-point details that do not fit the CSV table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub seed: u64,
    pub classical_channel: u32,
    pub power_w: f64,
    pub t0_s: f64,
    pub quantum_peak_power_w: f64,
    pub ensemble_size: usize,
    pub imag_residue: Option<f64>,
    pub statistics_warning: bool,
    pub fingerprint: Option<String>,
    pub n_tau: Option<usize>,
    pub tau_window: Option<f64>,
    pub error: Option<String>,
}

/// Ensemble-mean band intensity on a (ζ, τ) lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Colormap {
    pub zetas: Vec<f64>,
    pub taus: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSpec {
    pub x: f64,
    pub classical_channel: u32,
    pub power: f64,
    pub t0: f64,
    pub snapshots: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSpec {
    pub name: String,
    pub x_label: String,
    /// Channels the shared grid must resolve.
    pub grid_channels: Vec<u32>,
    pub points: Vec<PointSpec>,
    /// Flag whether C rises strictly along the series.
    pub check_monotonic: bool,
}

impl SeriesSpec {
    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

fn sorted_unique<T: Copy + PartialOrd>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("validated values are comparable"));
    v.dedup();
    v
}

/// Splits the configured sweep into series of points, each ordered by its
/// independent variable.
pub fn plan_sweep(cfg: &RunConfig) -> Vec<SeriesSpec> {
    let t0 = cfg.physical.t0;
    let classical = cfg.plan.classical_channel;
    match &cfg.sweep {
        SweepSpec::Channel { channels, powers } => {
            let channels = sorted_unique(channels);
            sorted_unique(powers)
                .into_iter()
                .map(|p| SeriesSpec {
                    name: format!("channel_sweep_p0_{p}W"),
                    x_label: "classical_channel".into(),
                    grid_channels: channels.clone(),
                    points: channels.iter().map(|&c| PointSpec { x: c as f64, classical_channel: c, power: p, t0, snapshots: None }).collect(),
                    check_monotonic: false,
                })
                .collect()
        }
        SweepSpec::Power { powers, classical_channels } => {
            let channels = sorted_unique(classical_channels);
            let powers = sorted_unique(powers);
            channels
                .iter()
                .map(|&c| SeriesSpec {
                    name: format!("power_sweep_ch{c}"),
                    x_label: "power_w".into(),
                    grid_channels: channels.clone(),
                    points: powers.iter().map(|&p| PointSpec { x: p, classical_channel: c, power: p, t0, snapshots: None }).collect(),
                    check_monotonic: true,
                })
                .collect()
        }
        SweepSpec::PulseWidth { t0_values, power } => vec![SeriesSpec {
            name: "pulse_width_sweep".into(),
            x_label: "t0_s".into(),
            grid_channels: vec![classical],
            points: sorted_unique(t0_values)
                .into_iter()
                .map(|t| PointSpec { x: t, classical_channel: classical, power: *power, t0: t, snapshots: None })
                .collect(),
            check_monotonic: false,
        }],
        SweepSpec::Colormap { powers, snapshots } => vec![SeriesSpec {
            name: "colormap_summary".into(),
            x_label: "power_w".into(),
            grid_channels: vec![classical],
            points: sorted_unique(powers)
                .into_iter()
                .map(|p| PointSpec { x: p, classical_channel: classical, power: p, t0, snapshots: Some(*snapshots) })
                .collect(),
            check_monotonic: false,
        }],
    }
}

/// Everything shared by the co-propagation and dark-fiber runs of a point.
#[derive(Clone, Debug)]
pub struct PointSetup {
    pub physical: PhysicalParams,
    pub units: ScaledUnits,
    pub grid: SimulationGrid,
    pub pulse: Vec<Complex64>,
    pub engine: EngineConfig,
    pub filter: BandFilter,
    pub omega_q: f64,
    pub fingerprint: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a JSON value, hex encoded.
pub fn json_digest(value: &serde_json::Value) -> String {
    hex(&Sha256::digest(value.to_string().as_bytes()))
}

pub fn build_setup(cfg: &RunConfig, t0: f64, grid_channels: &[u32]) -> Result<PointSetup> {
    let physical = PhysicalParams { t0, ..cfg.physical.clone() };
    let q = cfg.plan.quantum_channel;
    let plan = cfg.plan.wdm_plan(grid_channels.first().copied().unwrap_or(cfg.plan.classical_channel))?;
    let units = derive_scaled_units(&physical, itu_wavelength(q)?)?;
    let grid = build_grid_covering(&plan, &units, &physical, &cfg.grid, grid_channels)?;
    let omega_q = itu_angular_frequency(q)?;
    let pulse = quantum_pulse(physical.mu, t0, omega_q, plan.channel_offset(q, t0)?, &grid)?;
    let base = EngineConfig {
        d_zeta: grid.d_zeta,
        n_steps: grid.n_steps,
        gamma_scaled: units.gamma_scaled,
        regime: DispersionRegime::from_beta2(physical.beta2),
        dispersion_enabled: true,
        midpoint_iterations: cfg.midpoint_iterations,
        noise: None,
        constrain_conjugate: false,
    };
    let engine = match cfg.noise.mode {
        NoiseMode::PositiveP => EngineConfig {
            noise: Some(NoiseConfig {
                n_th: thermal_occupation(physical.temperature, omega_q)?,
                n0: units.n0,
                gamma_scaled: units.gamma_scaled,
                d_zeta: grid.d_zeta,
                d_tau: grid.d_tau,
                convention: cfg.noise.kerr_convention,
            }),
            ..base
        },
        NoiseMode::Off => deterministic_mode(&base),
    };
    let filter = BandFilter::for_channel(&plan, q, t0, &grid)?;
    let fingerprint = json_digest(&serde_json::json!({
        "physical": physical,
        "quantum_channel": q,
        "spacing": plan.spacing,
        "grid": [grid.n_tau as f64, grid.tau_window, grid.d_zeta, grid.n_steps as f64],
        "noise": cfg.noise,
        "ensemble_size": cfg.ensemble_size,
        "qam": cfg.qam,
        "midpoint_iterations": cfg.midpoint_iterations,
    }))[..16]
        .to_string();
    Ok(PointSetup { physical, units, grid, pulse, engine, filter, omega_q, fingerprint })
}

/// Result of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointOutcome {
    pub row: SweepRow,
    pub record: PointRecord,
    pub colormap: Option<Colormap>,
}

/// Executes sweep points, caching grids and dark-fiber ensembles.
pub struct Runner<'a> {
    cfg: &'a RunConfig,
    opts: RunOptions,
    pool: rayon::ThreadPool,
    setups: HashMap<String, Arc<PointSetup>>,
    darks: HashMap<String, Arc<EnsembleRun>>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a RunConfig, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self { cfg, opts, pool, setups: HashMap::new(), darks: HashMap::new() })
    }

    pub fn setup(&mut self, t0: f64, grid_channels: &[u32]) -> Result<Arc<PointSetup>> {
        let key = format!("{}|{grid_channels:?}", t0.to_bits());
        if let Some(s) = self.setups.get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(build_setup(self.cfg, t0, grid_channels)?);
        self.setups.insert(key, s.clone());
        Ok(s)
    }

    fn dark(&mut self, setup: &PointSetup) -> Result<Arc<EnsembleRun>> {
        if let Some(d) = self.darks.get(&setup.fingerprint) {
            return Ok(d.clone());
        }
        let plan = self.cfg.plan.wdm_plan(self.cfg.plan.classical_channel)?;
        let (run, _) = self.ensemble(setup, &plan, 0.0, None)?;
        let run = Arc::new(run);
        self.darks.insert(setup.fingerprint.clone(), run.clone());
        Ok(run)
    }

    /// Runs the configured ensemble at one launch power. Snapshot intensities,
    /// when requested, are averaged over all trajectories.
    pub fn ensemble(
        &self,
        setup: &PointSetup,
        plan: &WdmPlan,
        power: f64,
        snapshots: Option<&SnapshotPlan>,
    ) -> Result<(EnsembleRun, Option<Vec<IntensityAccumulator>>)> {
        let cfg = self.cfg;
        let n = setup.grid.n_tau;
        let trajectories = cfg.effective_ensemble();
        let noisy = cfg.noise.mode == NoiseMode::PositiveP;
        let group = if noisy && cfg.noise.antithetic { antithetic_group_size(cfg.noise.kerr_convention) } else { 1 };
        let symbol_period = 1.0 / (setup.physical.symbol_rate() * setup.physical.t0);
        let shared_qam = if cfg.qam.vary_per_trajectory { None } else { Some(qam16_waveform(&cfg.qam, symbol_period, &setup.grid)?) };

        let mut groups = vec![IntensityAccumulator::new(n); trajectories.div_ceil(group)];
        let mut snaps: Option<Vec<IntensityAccumulator>> = None;
        let run_one = |i: usize| -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
            let (stream, signs) = if noisy {
                trajectory_stream(i, cfg.noise.antithetic, cfg.noise.kerr_convention)
            } else {
                (0, NoiseSigns::default())
            };
            let own;
            let qam = match &shared_qam {
                Some(q) => q,
                None => {
                    let qc = QamConfig { symbol_seed: cfg.qam.symbol_seed.wrapping_add(stream), ..cfg.qam.clone() };
                    own = qam16_waveform(&qc, symbol_period, &setup.grid)?;
                    &own
                }
            };
            let spec = LaunchSpec {
                classical_power: power,
                quantum_mean_photons: setup.physical.mu,
                quantum_pulse_width: setup.physical.t0,
                quantum_channel: plan.quantum_channel,
                classical_channel: plan.classical_channel,
            };
            let launch = compose_launch(&spec, qam, &setup.pulse, &setup.units, plan, &setup.grid)?;
            let mut prop = Propagator::new(&setup.grid, setup.engine.clone())?;
            let stream = TrajectoryStream { master_seed: cfg.master_seed, stream, signs };
            let rec = prop.propagate(&launch, &stream, snapshots)?;
            let band = setup.filter.extract_with(&rec.final_pair, &mut Spectral::new(n)).intensity();
            Ok((band, rec.snapshots.into_iter().map(|s| s.intensity).collect()))
        };

        for start in (0..trajectories).step_by(BATCH) {
            let idx: Vec<usize> = (start..(start + BATCH).min(trajectories)).collect();
            let out: Vec<Result<_>> = self.pool.install(|| idx.par_iter().map(|&i| run_one(i)).collect());
            for (i, r) in idx.into_iter().zip(out) {
                let (band, snap) = r?;
                groups[i / group].add(&band)?;
                if snapshots.is_some() {
                    let accs = snaps.get_or_insert_with(|| vec![IntensityAccumulator::new(n); snap.len()]);
                    for (a, s) in accs.iter_mut().zip(&snap) {
                        a.add(s)?;
                    }
                }
            }
        }
        let run = EnsembleRun { fingerprint: setup.fingerprint.clone(), master_seed: cfg.master_seed, taus: setup.grid.taus.clone(), groups };
        Ok((run, snaps))
    }

    pub fn run_point(&mut self, series: &SeriesSpec, point: &PointSpec) -> PointOutcome {
        let started = Instant::now();
        let omega_q = itu_angular_frequency(self.cfg.plan.quantum_channel).unwrap_or(f64::NAN);
        let mut record = PointRecord {
            x: point.x,
            seed: self.cfg.master_seed,
            classical_channel: point.classical_channel,
            power_w: point.power,
            t0_s: point.t0,
            quantum_peak_power_w: quantum_peak_power(self.cfg.physical.mu, point.t0, omega_q),
            ensemble_size: self.cfg.effective_ensemble(),
            imag_residue: None,
            statistics_warning: false,
            fingerprint: None,
            n_tau: None,
            tau_window: None,
            error: None,
        };
        let mut row = SweepRow {
            x: point.x,
            c: f64::NAN,
            c_stderr: f64::NAN,
            rms_co: f64::NAN,
            rms_df: f64::NAN,
            seed: self.cfg.master_seed,
            walltime_s: None,
        };
        let mut colormap = None;
        match self.compute_point(series, point) {
            Ok((setup, res, cmap)) => {
                row.c = res.c_value;
                row.c_stderr = res.standard_error;
                row.rms_co = res.rms_co;
                row.rms_df = res.rms_df;
                record.imag_residue = Some(res.imag_residue);
                record.statistics_warning = res.statistics_warning;
                record.fingerprint = Some(res.fingerprint);
                record.n_tau = Some(setup.grid.n_tau);
                record.tau_window = Some(setup.grid.tau_window);
                colormap = cmap;
            }
            Err(e) => record.error = Some(e.to_string()),
        }
        if self.opts.timings {
            row.walltime_s = Some(started.elapsed().as_secs_f64());
        }
        PointOutcome { row, record, colormap }
    }

    fn compute_point(&mut self, series: &SeriesSpec, point: &PointSpec) -> Result<(Arc<PointSetup>, crate::demux::CrosstalkResult, Option<Colormap>)> {
        let setup = self.setup(point.t0, &series.grid_channels)?;
        let plan = self.cfg.plan.wdm_plan(point.classical_channel)?;
        setup.grid.check_frequency(plan.channel_offset(point.classical_channel, point.t0)?)?;
        let dark = self.dark(&setup)?;
        let snap_plan = point.snapshots.map(|s| SnapshotPlan { interval: setup.grid.zeta_max() / s as f64, filter: Some(setup.filter.clone()) });
        let (co, snaps) = if point.power == 0.0 && snap_plan.is_none() {
            ((*dark).clone(), None)
        } else {
            self.ensemble(&setup, &plan, point.power, snap_plan.as_ref())?
        };
        let res = crosstalk_ratio(&co, &dark, self.cfg.rms_window_fraction)?;
        let colormap = match (snaps, snap_plan) {
            (Some(accs), Some(sp)) => {
                let zetas = sp.steps(setup.grid.d_zeta, setup.grid.n_steps).into_iter().map(|s| s as f64 * setup.grid.d_zeta).collect();
                let rows = accs.iter().map(|a| a.mean().map(|m| m.profile)).collect::<Result<_>>()?;
                Some(Colormap { zetas, taus: setup.grid.taus.clone(), rows })
            }
            _ => None,
        };
        Ok((setup, res, colormap))
    }
}

/// Rows and records of one completed series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesResult {
    pub spec: SeriesSpec,
    pub outcomes: Vec<PointOutcome>,
}

impl SeriesResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.outcomes.iter().map(|o| o.row.clone()).collect()
    }
}

pub fn strictly_increasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].c > w[0].c)
}

/// Runs every point of the configured sweep in memory.
pub fn run_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<SeriesResult>> {
    let mut runner = Runner::new(cfg, opts.clone())?;
    Ok(plan_sweep(cfg)
        .into_iter()
        .map(|spec| {
            let outcomes = spec.points.iter().map(|p| runner.run_point(&spec, p)).collect();
            SeriesResult { spec, outcomes }
        })
        .collect())
}

fn expect_kind(cfg: &RunConfig, ok: bool, kind: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("expected a {kind} sweep, found {:?}", cfg.sweep)))
    }
}

pub fn run_channel_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<SeriesResult>> {
    expect_kind(cfg, matches!(cfg.sweep, SweepSpec::Channel { .. }), "channel")?;
    run_sweep(cfg, opts)
}

pub fn run_power_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<SeriesResult>> {
    expect_kind(cfg, matches!(cfg.sweep, SweepSpec::Power { .. }), "power")?;
    run_sweep(cfg, opts)
}

pub fn run_pulsewidth_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<SeriesResult>> {
    expect_kind(cfg, matches!(cfg.sweep, SweepSpec::PulseWidth { .. }), "pulse_width")?;
    run_sweep(cfg, opts)
}

pub fn run_colormap(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<SeriesResult>> {
    expect_kind(cfg, matches!(cfg.sweep, SweepSpec::Colormap { .. }), "colormap")?;
    run_sweep(cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_plan_orders_points() {
        let cfg = RunConfig { sweep: SweepSpec::Channel { channels: vec![40, 36, 39], powers: vec![0.01, 0.001] }, ..Default::default() };
        let plan = plan_sweep(&cfg);
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].name, "channel_sweep_p0_0.001W");
        let xs: Vec<f64> = plan[0].points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![36.0, 39.0, 40.0]);
        assert_eq!(plan[1].points[0].power, 0.01);
    }

    #[test]
    fn power_plan_has_one_series_per_channel() {
        let cfg = RunConfig { sweep: SweepSpec::Power { powers: vec![1e-3, 1e-4], classical_channels: vec![40, 39] }, ..Default::default() };
        let plan = plan_sweep(&cfg);
        assert_eq!(plan.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), vec!["power_sweep_ch39", "power_sweep_ch40"]);
        assert!(plan.iter().all(|s| s.check_monotonic && s.points[0].x == 1e-4));
        assert_eq!(plan[0].grid_channels, vec![39, 40]);
    }

    #[test]
    fn pulse_width_points_carry_t0() {
        let cfg = RunConfig { sweep: SweepSpec::PulseWidth { t0_values: vec![2e-11, 1e-11], power: 2e-3 }, ..Default::default() };
        let plan = plan_sweep(&cfg);
        assert_eq!(plan[0].points[0].t0, 1e-11);
        assert_eq!(plan[0].points[1].power, 2e-3);
    }

    #[test]
    fn setup_fingerprint_ignores_classical_settings() {
        let cfg = RunConfig::default();
        let a = build_setup(&cfg, cfg.physical.t0, &[39]).unwrap();
        let b = build_setup(&RunConfig { plan: super::super::config::PlanConfig { classical_channel: 40, ..cfg.plan.clone() }, ..cfg.clone() }, cfg.physical.t0, &[39]).unwrap();
        assert_eq!(a.fingerprint, b.fingerprint);
        let c = build_setup(&RunConfig { master_seed: 5, ensemble_size: 8, ..cfg.clone() }, cfg.physical.t0, &[39]).unwrap();
        assert_ne!(a.fingerprint, c.fingerprint);
        // the quantum band is one channel wide around the origin
        assert_eq!(a.filter.center, 0.0);
    }

    #[test]
    fn monotonic_check() {
        let row = |c| SweepRow { x: 0.0, c, c_stderr: 0.0, rms_co: 1.0, rms_df: 1.0, seed: 1, walltime_s: None };
        assert!(strictly_increasing(&[row(1.0), row(1.1)]));
        assert!(!strictly_increasing(&[row(1.0), row(1.0)]));
    }
}
