//! Positive-P simulation of a weak quantum pulse co-propagating with 16-QAM
//! classical traffic in a WDM fiber link.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demux;
pub mod engine;
pub mod error;
pub mod harness;
pub mod noise;
pub mod params;
pub mod reference;
pub mod signals;
pub mod spectral;

pub use num_complex::Complex64;

pub use demux::{BandFilter, CrosstalkResult, EnsembleRun, IntensityAccumulator, MeanIntensity};
pub use engine::{DispersionRegime, EngineConfig, PropagationRecord, Propagator, SnapshotPlan, StepOperators, TrajectoryStream};
pub use error::{Error, Result};
pub use noise::{KerrNoiseConvention, NoiseConfig, NoiseRealization, NoiseSigns};
pub use params::{GridPolicy, PhysicalParams, ScaledUnits, SimulationGrid, WdmPlan};
pub use signals::{LaunchSpec, QamConfig, ScaledFieldPair};
