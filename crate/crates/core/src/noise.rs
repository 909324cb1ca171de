//! Readout noise: a white + 1/f voltage PSD, the correlated-double-sampling
//! variance integral, and Gaussian read-noise draws.
//!
//! CDS differences two instantaneous samples of the follower output taken
//! `delta_t_cds` apart, which filters the PSD with `4 sin²(π f Δt)`. The
//! amplifier chain is a one-pole low-pass at `f_cutoff`. The variance is
//!
//! ```text
//! σ_V² = ∫_{f_min}^{∞} (S_w + A/f) · 4 sin²(π f Δt) / (1 + (f/f_c)²) df
//! ```
//!
//! evaluated by adaptive quadrature up to `max(100 f_c, 100/Δt)` plus an
//! asymptotic tail beyond that point.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{volts_per_carrier, DetectorParams};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::scalar::Real;

/// Parametric voltage-noise spectrum with CDS timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdNoise<T> {
    /// White level, V²/Hz.
    pub s_white: T,
    /// 1/f coefficient, V² (PSD contribution `a_pink / f`).
    pub a_pink: T,
    /// One-pole low-pass cutoff, Hz.
    pub f_cutoff: T,
    /// Separation of the two CDS samples, s.
    pub delta_t_cds: T,
    /// Lower integration bound, Hz.
    pub f_min: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseSpec<T> {
    /// Charge-referred σ given directly, electrons rms.
    Direct {
        sigma_e: T,
    },
    Psd(PsdNoise<T>),
}

impl<T: Real> PsdNoise<T> {
    pub fn new(s_white: T, a_pink: T, f_cutoff: T, delta_t_cds: T, f_min: T) -> Result<Self> {
        let zero = T::zero();
        if !(s_white >= zero) || !(a_pink >= zero) {
            return Err(invalid("s_white/a_pink", "PSD levels must be >= 0"));
        }
        if s_white == zero && a_pink == zero {
            return Err(invalid(
                "s_white/a_pink",
                "white and 1/f levels cannot both be zero",
            ));
        }
        if !(f_cutoff > zero) || !f_cutoff.is_finite() {
            return Err(invalid("f_cutoff", format!("must be > 0, got {f_cutoff}")));
        }
        if !(delta_t_cds > zero) || !delta_t_cds.is_finite() {
            return Err(invalid(
                "delta_t_cds",
                format!("must be > 0, got {delta_t_cds}"),
            ));
        }
        if !(f_min > zero) {
            return Err(invalid("f_min", format!("must be > 0, got {f_min}")));
        }
        if !(f_min < f_cutoff) {
            return Err(invalid(
                "f_min",
                format!("must be below f_cutoff ({f_min} >= {f_cutoff})"),
            ));
        }
        Ok(Self {
            s_white,
            a_pink,
            f_cutoff,
            delta_t_cds,
            f_min,
        })
    }

    fn psd(&self, f: T) -> T {
        self.s_white + self.a_pink / f
    }

    fn low_pass(&self, f: T) -> T {
        let r = f / self.f_cutoff;
        T::one() / (T::one() + r * r)
    }
}

impl<T: Real> NoiseSpec<T> {
    pub fn direct(sigma_e: T) -> Result<Self> {
        if !(sigma_e > T::zero()) || !sigma_e.is_finite() {
            return Err(invalid("sigma_e", format!("must be > 0, got {sigma_e}")));
        }
        Ok(NoiseSpec::Direct { sigma_e })
    }

    pub fn psd(noise: PsdNoise<T>) -> Result<Self> {
        let n = PsdNoise::new(
            noise.s_white,
            noise.a_pink,
            noise.f_cutoff,
            noise.delta_t_cds,
            noise.f_min,
        )?;
        Ok(NoiseSpec::Psd(n))
    }

    /// Spectrum calibrated against the 40 Hz device: √S(1 Hz) = 500 nV/√Hz and
    /// a CDS σ that, combined with 500 e/h leakage shot noise, gives 0.26 e rms
    /// in the dark. Regenerate with `cargo run -p cipd-core --example calibrate_noise`.
    pub fn reference_calibrated() -> Self {
        NoiseSpec::Psd(PsdNoise {
            s_white: T::lit(CALIBRATED_S_WHITE),
            a_pink: T::lit(CALIBRATED_PSD_AT_1HZ - CALIBRATED_S_WHITE),
            f_cutoff: T::lit(CALIBRATED_F_CUTOFF),
            delta_t_cds: T::lit(CALIBRATED_DELTA_T_CDS),
            f_min: T::lit(CALIBRATED_F_MIN),
        })
    }
}

pub const CALIBRATED_PSD_AT_1HZ: f64 = 2.5e-13;
pub const CALIBRATED_F_CUTOFF: f64 = 20.0;
pub const CALIBRATED_DELTA_T_CDS: f64 = 12.5e-3;
pub const CALIBRATED_F_MIN: f64 = 0.01;
pub const CALIBRATED_S_WHITE: f64 = 2.592_807_621_806e-15;

/// Voltage noise PSD at `f`, V²/Hz.
pub fn psd_value<T: Real>(spec: &NoiseSpec<T>, f: T) -> Result<T> {
    match spec {
        NoiseSpec::Direct { .. } => Err(Error::WrongNoiseMode { expected: "psd" }),
        NoiseSpec::Psd(n) => {
            if !(f > T::zero()) {
                return Err(invalid("f", format!("frequency must be > 0, got {f}")));
            }
            Ok(n.psd(f))
        }
    }
}

/// CDS output-voltage variance, V².
pub fn cds_voltage_variance<T: Real>(noise: &PsdNoise<T>, opts: QuadratureOptions) -> Result<T> {
    let dt = noise.delta_t_cds;
    let period = dt.recip();
    let hundred = T::lit(100.0);
    let upper = (hundred * noise.f_cutoff).max(hundred * period);
    let pi = T::PI();
    let four = T::lit(4.0);
    let integrand = |f: T| {
        let s = (pi * f * dt).sin();
        noise.psd(f) * four * s * s * noise.low_pass(f)
    };

    // Log-spaced panels below the first CDS null, one panel per period above it.
    let mut bps = Vec::new();
    let knee = period.min(upper);
    if knee > noise.f_min {
        let decades = (knee / noise.f_min).log10();
        let n_log = (decades * T::lit(20.0))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        for k in 0..n_log {
            let t = T::from_usize(k).unwrap() / T::from_usize(n_log).unwrap();
            bps.push(noise.f_min * (knee / noise.f_min).powf(t));
        }
        bps.push(knee);
    } else {
        bps.push(noise.f_min);
    }
    let mut last = *bps.last().unwrap();
    let mut k = (last / period).floor() + T::one();
    loop {
        let next = k * period;
        if next >= upper {
            break;
        }
        if next > last {
            bps.push(next);
            last = next;
        }
        k = k + T::one();
    }
    if upper > last {
        bps.push(upper);
    }

    let body = integrate(integrand, &bps, opts)?;

    // Beyond `upper`: 4 sin² = 2 - 2 cos(ωf); the cosine part integrates by
    // parts to 2 g(F) sin(ωF)/ω at leading order.
    let omega = T::lit(2.0) * pi * dt;
    let fc = noise.f_cutoff;
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let tail_white = noise.s_white * fc * (fc / upper).atan();
    let tail_pink = half * noise.a_pink * (T::one() + (fc / upper) * (fc / upper)).ln();
    let g_upper = noise.psd(upper) * noise.low_pass(upper);
    let tail = two * (tail_white + tail_pink) + two * g_upper * (omega * upper).sin() / omega;
    Ok(body.value + tail)
}

/// Charge-referred CDS readout noise, electrons rms.
pub fn cds_sigma<T: Real>(spec: &NoiseSpec<T>, p: &DetectorParams<T>) -> Result<T> {
    match spec {
        NoiseSpec::Direct { sigma_e } => Ok(*sigma_e),
        NoiseSpec::Psd(n) => {
            let var = cds_voltage_variance(n, QuadratureOptions::default())?;
            Ok(var.max(T::zero()).sqrt() / volts_per_carrier(p))
        }
    }
}

/// One zero-mean Gaussian read-noise draw, electrons.
pub fn sample_read_noise<T: Real, R: Rng + ?Sized>(sigma_e: T, rng: &mut R) -> T {
    if sigma_e == T::zero() {
        return T::zero();
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma_e * T::lit(z)
}

/// Splits a fixed `S(1 Hz)` between white and 1/f so that the CDS noise equals
/// `target_sigma_e`. The variance is linear in both levels, so the split has a
/// closed form once the unit-white and unit-pink variances are known.
pub fn calibrate_white_level<T: Real>(
    psd_at_1hz: T,
    f_cutoff: T,
    delta_t_cds: T,
    f_min: T,
    target_sigma_e: T,
    p: &DetectorParams<T>,
) -> Result<PsdNoise<T>> {
    let opts = QuadratureOptions {
        rel_tol: 1e-10,
        ..Default::default()
    };
    let unit_white = cds_voltage_variance(
        &PsdNoise::new(T::one(), T::zero(), f_cutoff, delta_t_cds, f_min)?,
        opts,
    )?;
    let unit_pink = cds_voltage_variance(
        &PsdNoise::new(T::zero(), T::one(), f_cutoff, delta_t_cds, f_min)?,
        opts,
    )?;
    let vpc = volts_per_carrier(p);
    let target_var = (target_sigma_e * vpc).powi(2);
    let s_white = (target_var - psd_at_1hz * unit_pink) / (unit_white - unit_pink);
    if !(s_white >= T::zero() && s_white <= psd_at_1hz) {
        return Err(Error::Calibration(format!(
            "white level {s_white:e} outside [0, {psd_at_1hz:e}]; pure 1/f gives {:.4} e, pure white gives {:.4} e",
            (psd_at_1hz * unit_pink).sqrt() / vpc,
            (psd_at_1hz * unit_white).sqrt() / vpc,
        )));
    }
    PsdNoise::new(s_white, psd_at_1hz - s_white, f_cutoff, delta_t_cds, f_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn white(s: f64, fc: f64, dt: f64) -> PsdNoise<f64> {
        PsdNoise::new(s, 0.0, fc, dt, 0.01).unwrap()
    }

    #[test]
    fn psd_examples() {
        let cal = NoiseSpec::<f64>::reference_calibrated();
        assert!((psd_value(&cal, 1.0).unwrap() - 2.5e-13).abs() < 1e-25);
        let w = NoiseSpec::psd(white(3e-14, 100.0, 0.01)).unwrap();
        for f in [0.1, 1.0, 10.0, 1e3] {
            assert_eq!(psd_value(&w, f).unwrap(), 3e-14);
        }
        let mixed =
            NoiseSpec::psd(PsdNoise::new(1e-14f64, 2.4e-13, 100.0, 0.01, 0.01).unwrap()).unwrap();
        assert!((psd_value(&mixed, 10.0).unwrap() - 3.4e-14).abs() < 1e-26);
        assert!(psd_value(&mixed, 0.0).is_err());
        assert!(psd_value(&mixed, -1.0).is_err());
        assert_eq!(
            psd_value(&NoiseSpec::direct(0.3).unwrap(), 1.0),
            Err(Error::WrongNoiseMode { expected: "psd" })
        );
    }

    #[test]
    fn psd_monotone_in_frequency() {
        let spec = NoiseSpec::psd(PsdNoise::new(1e-14, 2e-13, 100.0, 0.01, 0.01).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let v = psd_value(&spec, k as f64 * 0.37).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn white_noise_matches_closed_form() {
        // Two samples through a one-pole low-pass: σ² = π S f_c (1 - e^{-2π f_c Δt}).
        for (s, fc, dt) in [
            (1e-14, 1000.0, 0.0125),
            (4e-15, 200.0, 0.05),
            (2e-13, 50.0, 0.4),
        ] {
            let var =
                cds_voltage_variance(&white(s, fc, dt), QuadratureOptions::default()).unwrap();
            let closed = std::f64::consts::PI * s * fc;
            assert!((var - closed).abs() / closed < 5e-3, "{var} vs {closed}");
        }
    }

    #[test]
    fn variance_vanishes_with_zero_sample_separation() {
        let mut prev = f64::INFINITY;
        for dt in [1e-3, 1e-4, 1e-5, 1e-6] {
            let var = cds_voltage_variance(&white(1e-14, 1000.0, dt), QuadratureOptions::default())
                .unwrap();
            assert!(var < prev);
            prev = var;
        }
        let closed = std::f64::consts::PI * 1e-14 * 1000.0;
        assert!(prev / closed < 1e-2);
    }

    #[test]
    fn shipped_calibration_matches_solver() {
        let p = DetectorParams::<f64>::reference_device();
        let read_sigma = (0.26f64.powi(2) - p.leakage_rate() / 40.0).sqrt();
        let solved = calibrate_white_level(
            CALIBRATED_PSD_AT_1HZ,
            CALIBRATED_F_CUTOFF,
            CALIBRATED_DELTA_T_CDS,
            CALIBRATED_F_MIN,
            read_sigma,
            &p,
        )
        .unwrap();
        assert!((solved.s_white - CALIBRATED_S_WHITE).abs() / CALIBRATED_S_WHITE < 1e-6);
        let sigma = cds_sigma(&NoiseSpec::reference_calibrated(), &p).unwrap();
        assert!((sigma - read_sigma).abs() < 1e-6, "{sigma}");
        assert!((sigma - 0.26).abs() < 0.01);
    }

    #[test]
    fn calibration_infeasible_at_kilohertz_bandwidth() {
        let p = DetectorParams::<f64>::reference_device();
        let err = calibrate_white_level(2.5e-13, 1000.0, 0.0125, 0.01, 0.25, &p).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)));
    }

    #[test]
    fn direct_mode_passes_sigma_through() {
        let p = DetectorParams::<f64>::reference_device();
        assert_eq!(
            cds_sigma(&NoiseSpec::direct(0.31).unwrap(), &p).unwrap(),
            0.31
        );
        assert!(NoiseSpec::direct(0.0).is_err());
    }

    #[test]
    fn rejects_invalid_spectra() {
        assert!(PsdNoise::new(0.0, 0.0, 100.0, 0.01, 0.01).is_err());
        assert!(PsdNoise::new(-1e-14, 0.0, 100.0, 0.01, 0.01).is_err());
        assert!(PsdNoise::new(1e-14, 0.0, 100.0, 0.01, 200.0).is_err());
        assert!(PsdNoise::new(1e-14, 0.0, 100.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn zero_sigma_draws_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_read_noise(0.0f64, &mut rng), 0.0);
        }
    }

    #[test]
    fn read_noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_read_noise(0.26, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 0.26).abs() < 1e-3, "{}", var.sqrt());
        // 2Φ(-0.5/0.26) = erfc(0.5/(0.26√2))
        let expected = statrs::function::erf::erfc(0.5 / (0.26 * std::f64::consts::SQRT_2));
        assert!((expected - 0.0545).abs() < 5e-4);
        let frac = draws.iter().filter(|x| x.abs() > 0.5).count() as f64 / n as f64;
        assert!((frac - expected).abs() < 2e-3, "{frac}");
    }

    #[test]
    fn read_noise_is_seed_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..1000)
                .map(|_| sample_read_noise(0.3f64, &mut rng).to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(99), draw(99));
        assert_ne!(draw(99), draw(100));
    }
}
