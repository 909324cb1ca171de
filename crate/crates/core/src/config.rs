//! On-disk run configuration.
//!
//! Values are stored in engineering units (pF, mV, e/h) and converted to SI
//! when a [`RunConfig`] is built. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::DetectorParams;
use crate::noise::{
    NoiseSpec, PsdNoise, CALIBRATED_DELTA_T_CDS, CALIBRATED_F_CUTOFF, CALIBRATED_F_MIN,
};
use crate::noise::{CALIBRATED_PSD_AT_1HZ, CALIBRATED_S_WHITE};
use crate::readout::RunConfig;
use crate::scalar::Real;
use crate::source::{PulseConfig, SamplingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub c_input_pf: f64,
    pub g_m: f64,
    pub eta_q: f64,
    pub eta_c: f64,
    pub leakage_per_hour: f64,
    pub reset_threshold_mv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectNoiseSection {
    pub sigma_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdNoiseSection {
    pub s_white_v2hz: f64,
    pub a_pink_v2: f64,
    pub f_cutoff_hz: f64,
    /// Defaults to half the frame period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t_cds_s: Option<f64>,
    pub f_min_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseSection {
    Direct(DirectNoiseSection),
    Psd(PsdNoiseSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub mean_photons: f64,
    pub pulse_width_s: f64,
    pub rep_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_frames: u64,
    pub seed: u64,
    /// Frame rate of a dark run; with a source it must match the source rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_rate_hz: Option<f64>,
    #[serde(default)]
    pub sampling: SamplingMode,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub detector: DetectorSection,
    pub noise: NoiseSection,
    pub source: Option<SourceSection>,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl Config {
    /// The 0.054 pF device at 40 Hz with the calibrated spectrum and 1.6719
    /// photons per pulse at the fiber.
    pub fn reference_default() -> Self {
        Config {
            detector: DetectorSection {
                c_input_pf: 0.054,
                g_m: 1.0,
                eta_q: 0.8,
                eta_c: 0.8,
                leakage_per_hour: 500.0,
                reset_threshold_mv: 30.0,
            },
            noise: NoiseSection::Psd(PsdNoiseSection {
                s_white_v2hz: CALIBRATED_S_WHITE,
                a_pink_v2: CALIBRATED_PSD_AT_1HZ - CALIBRATED_S_WHITE,
                f_cutoff_hz: CALIBRATED_F_CUTOFF,
                delta_t_cds_s: Some(CALIBRATED_DELTA_T_CDS),
                f_min_hz: CALIBRATED_F_MIN,
            }),
            source: Some(SourceSection {
                mean_photons: 1.6719,
                pulse_width_s: 2.5e-3,
                rep_rate_hz: 40.0,
            }),
            run: RunSection {
                n_frames: 10_000,
                seed: 42,
                rep_rate_hz: None,
                sampling: SamplingMode::Direct,
            },
            output: OutputSection::default(),
        }
    }

    pub fn frame_rate(&self) -> Result<f64> {
        match (&self.source, self.run.rep_rate_hz) {
            (Some(s), Some(r)) if r != s.rep_rate_hz => Err(invalid(
                "run.rep_rate_hz",
                format!(
                    "{r} Hz differs from source.rep_rate_hz {} Hz",
                    s.rep_rate_hz
                ),
            )),
            (Some(s), _) => Ok(s.rep_rate_hz),
            (None, Some(r)) => Ok(r),
            (None, None) => Err(invalid("run.rep_rate_hz", "required when source is null")),
        }
    }

    pub fn detector_params<T: Real>(&self) -> Result<DetectorParams<T>> {
        let d = &self.detector;
        DetectorParams::new(
            T::lit(d.c_input_pf * 1e-12),
            T::lit(d.g_m),
            T::lit(d.eta_q),
            T::lit(d.eta_c),
            T::lit(d.leakage_per_hour / 3600.0),
            T::lit(d.reset_threshold_mv * 1e-3),
        )
    }

    pub fn noise_spec<T: Real>(&self) -> Result<NoiseSpec<T>> {
        match &self.noise {
            NoiseSection::Direct(d) => NoiseSpec::direct(T::lit(d.sigma_e)),
            NoiseSection::Psd(p) => {
                let dt = match p.delta_t_cds_s {
                    Some(dt) => dt,
                    None => 0.5 / self.frame_rate()?,
                };
                NoiseSpec::psd(PsdNoise::new(
                    T::lit(p.s_white_v2hz),
                    T::lit(p.a_pink_v2),
                    T::lit(p.f_cutoff_hz),
                    T::lit(dt),
                    T::lit(p.f_min_hz),
                )?)
            }
        }
    }

    pub fn pulse_config<T: Real>(&self) -> Result<Option<PulseConfig<T>>> {
        self.source
            .as_ref()
            .map(|s| {
                PulseConfig::new(
                    T::lit(s.mean_photons),
                    T::lit(s.pulse_width_s),
                    T::lit(s.rep_rate_hz),
                )
            })
            .transpose()
    }

    pub fn run_config<T: Real>(&self) -> Result<RunConfig<T>> {
        let rc = RunConfig::new(
            self.run.n_frames,
            self.detector_params()?,
            self.noise_spec()?,
            self.pulse_config()?,
            T::lit(self.frame_rate()?),
            self.run.seed,
        )?;
        Ok(rc.with_sampling(self.run.sampling))
    }
}
