//! Attenuated coherent pulses: photons at the fiber, coupling and quantum
//! efficiency losses, and photo-carrier draws.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::DetectorParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig<T> {
    mean_photons_at_fiber: T,
    pulse_width: T,
    rep_rate: T,
}

impl<T: Real> PulseConfig<T> {
    /// `pulse_width` in seconds, `rep_rate` in Hz; the pulse must fit in one period.
    pub fn new(mean_photons_at_fiber: T, pulse_width: T, rep_rate: T) -> Result<Self> {
        if !(mean_photons_at_fiber >= T::zero()) || !mean_photons_at_fiber.is_finite() {
            return Err(invalid(
                "mean_photons",
                format!("must be >= 0, got {mean_photons_at_fiber}"),
            ));
        }
        if !(pulse_width > T::zero()) {
            return Err(invalid(
                "pulse_width",
                format!("must be > 0, got {pulse_width}"),
            ));
        }
        if !(rep_rate > T::zero()) || !rep_rate.is_finite() {
            return Err(invalid("rep_rate", format!("must be > 0, got {rep_rate}")));
        }
        if !(pulse_width < rep_rate.recip()) {
            return Err(invalid(
                "pulse_width",
                format!(
                    "{pulse_width} s does not fit in the {} s frame period",
                    rep_rate.recip()
                ),
            ));
        }
        Ok(Self {
            mean_photons_at_fiber,
            pulse_width,
            rep_rate,
        })
    }

    /// 2.5 ms pulses at 40 Hz.
    pub fn reference_pulses(mean_photons_at_fiber: T) -> Result<Self> {
        Self::new(mean_photons_at_fiber, T::lit(2.5e-3), T::lit(40.0))
    }

    pub fn mean_photons_at_fiber(&self) -> T {
        self.mean_photons_at_fiber
    }
    pub fn pulse_width(&self) -> T {
        self.pulse_width
    }
    pub fn rep_rate(&self) -> T {
        self.rep_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One Poisson draw at the carrier mean.
    #[default]
    Direct,
    /// Poisson photons at the fiber, then binomial thinning by η_c·η_q.
    TwoStage,
}

pub fn mean_carriers<T: Real>(cfg: &PulseConfig<T>, p: &DetectorParams<T>) -> T {
    cfg.mean_photons_at_fiber * p.eta_c() * p.eta_q()
}

pub(crate) fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

pub fn sample_photocarriers<T: Real, R: Rng + ?Sized>(
    cfg: &PulseConfig<T>,
    p: &DetectorParams<T>,
    rng: &mut R,
    mode: SamplingMode,
) -> u64 {
    match mode {
        SamplingMode::Direct => poisson_draw(mean_carriers(cfg, p).as_f64(), rng),
        SamplingMode::TwoStage => {
            let photons = poisson_draw(cfg.mean_photons_at_fiber.as_f64(), rng);
            let keep = (p.eta_c() * p.eta_q()).as_f64();
            if photons == 0 || keep <= 0.0 {
                return 0;
            }
            Binomial::new(photons, keep.min(1.0))
                .expect("probability in [0, 1]")
                .sample(rng)
        }
    }
}
