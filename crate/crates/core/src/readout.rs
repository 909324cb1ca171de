//! Frame loop of the charge-integration readout.
//!
//! Each frame adds photo-carriers and leakage carriers to the gate node, the
//! CDS readout reports the added charge plus Gaussian read noise, and the gate
//! is cleared after the measurement once the accumulated output voltage
//! reaches the reset threshold.
//!
//! Random draws for frame `i` come from stream `i` of the run seed, so the
//! draw phase runs in parallel; the accumulate/reset pass is a sequential scan.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{volts_per_carrier, DetectorParams};
use crate::noise::{cds_sigma, sample_read_noise, NoiseSpec};
use crate::rng::StreamFamily;
use crate::scalar::Real;
use crate::source::{poisson_draw, sample_photocarriers, PulseConfig, SamplingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig<T> {
    n_frames: u64,
    detector: DetectorParams<T>,
    noise: NoiseSpec<T>,
    source: Option<PulseConfig<T>>,
    frame_rate: T,
    seed: u64,
    sampling: SamplingMode,
    sigma_override: Option<T>,
}

impl<T: Real> RunConfig<T> {
    /// `source = None` is a dark run. With a source, `frame_rate` must equal its
    /// repetition rate.
    pub fn new(
        n_frames: u64,
        detector: DetectorParams<T>,
        noise: NoiseSpec<T>,
        source: Option<PulseConfig<T>>,
        frame_rate: T,
        seed: u64,
    ) -> Result<Self> {
        if n_frames == 0 {
            return Err(invalid("n_frames", "must be >= 1"));
        }
        if !(frame_rate > T::zero()) || !frame_rate.is_finite() {
            return Err(invalid(
                "frame_rate",
                format!("must be > 0, got {frame_rate}"),
            ));
        }
        if let Some(src) = &source {
            if src.rep_rate() != frame_rate {
                return Err(invalid(
                    "frame_rate",
                    format!(
                        "{frame_rate} Hz differs from the source repetition rate {} Hz",
                        src.rep_rate()
                    ),
                ));
            }
        }
        Ok(Self {
            n_frames,
            detector,
            noise,
            source,
            frame_rate,
            seed,
            sampling: SamplingMode::Direct,
            sigma_override: None,
        })
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    /// Replaces the noise model's σ with `sigma_e` (may be zero).
    pub fn with_sigma_override(mut self, sigma_e: T) -> Result<Self> {
        if !(sigma_e >= T::zero()) || !sigma_e.is_finite() {
            return Err(invalid("sigma_e", format!("must be >= 0, got {sigma_e}")));
        }
        self.sigma_override = Some(sigma_e);
        Ok(self)
    }

    pub fn n_frames(&self) -> u64 {
        self.n_frames
    }
    pub fn detector(&self) -> &DetectorParams<T> {
        &self.detector
    }
    pub fn noise(&self) -> &NoiseSpec<T> {
        &self.noise
    }
    pub fn source(&self) -> Option<&PulseConfig<T>> {
        self.source.as_ref()
    }
    pub fn frame_rate(&self) -> T {
        self.frame_rate
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn sampling(&self) -> SamplingMode {
        self.sampling
    }

    /// Mean leakage carriers per frame.
    pub fn leakage_per_frame(&self) -> T {
        self.detector.leakage_rate() / self.frame_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord<T> {
    pub frame_index: u64,
    pub true_carriers: u64,
    pub leakage_carriers: u64,
    /// Gate charge after this frame's carriers arrive, before any reset.
    pub accumulated_carriers: u64,
    /// CDS difference for this frame in electrons, read noise included.
    pub measured_delta_e: T,
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRun<T> {
    pub config: RunConfig<T>,
    pub frames: Vec<FrameRecord<T>>,
    pub sigma_e_used: T,
}

struct FrameDraw<T> {
    true_carriers: u64,
    leakage_carriers: u64,
    noise: T,
}

pub fn simulate_run<T: Real>(cfg: &RunConfig<T>) -> Result<FrameRun<T>> {
    let sigma = match cfg.sigma_override {
        Some(s) => s,
        None => cds_sigma(&cfg.noise, &cfg.detector)?,
    };
    let streams = StreamFamily::new(cfg.seed);
    let leak_mean = cfg.leakage_per_frame().as_f64();

    let draws: Vec<FrameDraw<T>> = (0..cfg.n_frames)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i);
            let true_carriers = match &cfg.source {
                Some(src) => sample_photocarriers(src, &cfg.detector, &mut rng, cfg.sampling),
                None => 0,
            };
            let leakage_carriers = poisson_draw(leak_mean, &mut rng);
            let noise = sample_read_noise(sigma, &mut rng);
            FrameDraw {
                true_carriers,
                leakage_carriers,
                noise,
            }
        })
        .collect();

    let vpc = volts_per_carrier(&cfg.detector);
    let threshold = cfg.detector.reset_threshold();
    let mut accumulator = 0u64;
    let frames = draws
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let added = d.true_carriers + d.leakage_carriers;
            accumulator += added;
            let accumulated_carriers = accumulator;
            let reset = T::from_count(accumulated_carriers) * vpc >= threshold;
            if reset {
                accumulator = 0;
            }
            FrameRecord {
                frame_index: i as u64,
                true_carriers: d.true_carriers,
                leakage_carriers: d.leakage_carriers,
                accumulated_carriers,
                measured_delta_e: T::from_count(added) + d.noise,
                reset,
            }
        })
        .collect();

    Ok(FrameRun {
        config: cfg.clone(),
        frames,
        sigma_e_used: sigma,
    })
}

/// Measured values of every non-reset frame, in frame order.
pub fn extract_events<T: Real>(run: &FrameRun<T>) -> Vec<T> {
    run.frames
        .iter()
        .filter(|f| !f.reset)
        .map(|f| f.measured_delta_e)
        .collect()
}

pub const FRAMES_CSV_HEADER: &str =
    "frame_index,true_carriers,leakage_carriers,accumulated_carriers,measured_delta_e,reset";

pub fn write_frames_csv<T: Real, W: Write>(run: &FrameRun<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "{FRAMES_CSV_HEADER}")?;
    for f in &run.frames {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            f.frame_index,
            f.true_carriers,
            f.leakage_carriers,
            f.accumulated_carriers,
            f.measured_delta_e,
            f.reset
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub n_frames: u64,
    pub n_events: u64,
    pub n_resets: u64,
    pub sigma_e_used: f64,
    pub total_true_carriers: u64,
    pub total_leakage_carriers: u64,
    pub expected_mean_carriers: f64,
    pub expected_leakage_per_frame: f64,
    pub event_mean: Option<f64>,
    /// Unbiased sample standard deviation of the events.
    pub event_sigma: Option<f64>,
}

impl RunSummary {
    pub fn from_run<T: Real>(run: &FrameRun<T>) -> Self {
        let events: Vec<f64> = extract_events(run).into_iter().map(Real::as_f64).collect();
        let n = events.len();
        let mean = (n > 0).then(|| events.iter().sum::<f64>() / n as f64);
        let sigma = (n > 1).then(|| {
            let m = mean.unwrap();
            (events.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        let cfg = &run.config;
        Self {
            n_frames: run.frames.len() as u64,
            n_events: n as u64,
            n_resets: run.frames.iter().filter(|f| f.reset).count() as u64,
            sigma_e_used: run.sigma_e_used.as_f64(),
            total_true_carriers: run.frames.iter().map(|f| f.true_carriers).sum(),
            total_leakage_carriers: run.frames.iter().map(|f| f.leakage_carriers).sum(),
            expected_mean_carriers: cfg
                .source()
                .map(|s| crate::source::mean_carriers(s, cfg.detector()).as_f64())
                .unwrap_or(0.0),
            expected_leakage_per_frame: cfg.leakage_per_frame().as_f64(),
            event_mean: mean,
            event_sigma: sigma,
        }
    }
}
