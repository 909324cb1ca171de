//! Simulation and analysis of single-carrier resolving charge-integrating
//! photodetectors read out by correlated double sampling.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below fix the scalar for callers that do not care.

// `!(x > 0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimation;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod readout;
pub mod rng;
pub mod scalar;
pub mod source;
pub mod stats;

pub use error::{Error, Result};
pub use estimation::{
    build_histogram, classify, discrimination_error, eq2_density, estimate_qe, fit_mixture,
    goodness_of_fit, log_likelihood, sigma_from_dark, ClassifyMode, FitOptions, GoodnessOfFit,
    Histogram, Mixture, MixtureFit, PoissonCutoff,
};
pub use model::{
    carriers_from_voltage, snr, snr_voltage, volts_per_carrier, DetectorParams, ELEMENTARY_CHARGE,
};
pub use noise::{cds_sigma, cds_voltage_variance, psd_value, NoiseSpec, PsdNoise};
pub use readout::{extract_events, simulate_run, FrameRecord, FrameRun, RunConfig, RunSummary};
pub use rng::StreamFamily;
pub use scalar::Real;
pub use source::{mean_carriers, sample_photocarriers, PulseConfig, SamplingMode};

pub type DetectorParamsF64 = DetectorParams<f64>;
pub type NoiseSpecF64 = NoiseSpec<f64>;
pub type PsdNoiseF64 = PsdNoise<f64>;
pub type PulseConfigF64 = PulseConfig<f64>;
pub type RunConfigF64 = RunConfig<f64>;
pub type FrameRunF64 = FrameRun<f64>;
pub type MixtureF64 = Mixture<f64>;
pub type MixtureFitF64 = MixtureFit<f64>;
pub type HistogramF64 = Histogram<f64>;

pub type DetectorParamsF32 = DetectorParams<f32>;
pub type NoiseSpecF32 = NoiseSpec<f32>;
pub type PulseConfigF32 = PulseConfig<f32>;
pub type RunConfigF32 = RunConfig<f32>;
pub type MixtureF32 = Mixture<f32>;
pub type MixtureFitF32 = MixtureFit<f32>;
