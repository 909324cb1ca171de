//! Device constants and the charge-to-voltage relations of the source-follower readout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Static constants of one charge-integration detector.
///
/// Construction validates every field, so the accessor methods and the
/// free functions in this module never re-check them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams<T> {
    c_input: T,
    g_m: T,
    eta_q: T,
    eta_c: T,
    leakage_rate: T,
    reset_threshold: T,
}

impl<T: Real> DetectorParams<T> {
    /// * `c_input` - gate node capacitance in farads
    /// * `g_m` - source-follower voltage gain
    /// * `eta_q`, `eta_c` - quantum and fiber coupling efficiency
    /// * `leakage_rate` - electrons per second
    /// * `reset_threshold` - output volts at which the gate is reset
    pub fn new(
        c_input: T,
        g_m: T,
        eta_q: T,
        eta_c: T,
        leakage_rate: T,
        reset_threshold: T,
    ) -> Result<Self> {
        let zero = T::zero();
        let one = T::one();
        if !(c_input > zero) || !c_input.is_finite() {
            return Err(invalid("c_input", format!("must be > 0, got {c_input}")));
        }
        if !(g_m > zero && g_m <= one) {
            return Err(invalid("g_m", format!("must be in (0, 1], got {g_m}")));
        }
        if !(eta_q >= zero && eta_q <= one) {
            return Err(invalid("eta_q", format!("must be in [0, 1], got {eta_q}")));
        }
        if !(eta_c >= zero && eta_c <= one) {
            return Err(invalid("eta_c", format!("must be in [0, 1], got {eta_c}")));
        }
        if !(leakage_rate >= zero) || !leakage_rate.is_finite() {
            return Err(invalid(
                "leakage_rate",
                format!("must be >= 0, got {leakage_rate}"),
            ));
        }
        if !(reset_threshold > zero) {
            return Err(invalid(
                "reset_threshold",
                format!("must be > 0, got {reset_threshold}"),
            ));
        }
        Ok(Self {
            c_input,
            g_m,
            eta_q,
            eta_c,
            leakage_rate,
            reset_threshold,
        })
    }

    /// The 40 Hz device: 0.054 pF, unity follower gain, 80 % quantum and
    /// coupling efficiency, 500 e/h leakage, reset at 30 mV.
    pub fn reference_device() -> Self {
        Self::new(
            T::lit(0.054e-12),
            T::one(),
            T::lit(0.8),
            T::lit(0.8),
            T::lit(500.0 / 3600.0),
            T::lit(30e-3),
        )
        .expect("reference device parameters are valid")
    }

    pub fn c_input(&self) -> T {
        self.c_input
    }
    pub fn g_m(&self) -> T {
        self.g_m
    }
    pub fn eta_q(&self) -> T {
        self.eta_q
    }
    pub fn eta_c(&self) -> T {
        self.eta_c
    }
    /// Electrons per second.
    pub fn leakage_rate(&self) -> T {
        self.leakage_rate
    }
    /// Volts.
    pub fn reset_threshold(&self) -> T {
        self.reset_threshold
    }
    pub fn q_e(&self) -> T {
        T::lit(ELEMENTARY_CHARGE)
    }

    /// Copy with a different input capacitance (validated).
    pub fn with_c_input(self, c_input: T) -> Result<Self> {
        Self::new(
            c_input,
            self.g_m,
            self.eta_q,
            self.eta_c,
            self.leakage_rate,
            self.reset_threshold,
        )
    }

    pub fn with_g_m(self, g_m: T) -> Result<Self> {
        Self::new(
            self.c_input,
            g_m,
            self.eta_q,
            self.eta_c,
            self.leakage_rate,
            self.reset_threshold,
        )
    }

    pub fn with_eta_q(self, eta_q: T) -> Result<Self> {
        Self::new(
            self.c_input,
            self.g_m,
            eta_q,
            self.eta_c,
            self.leakage_rate,
            self.reset_threshold,
        )
    }

    pub fn with_eta_c(self, eta_c: T) -> Result<Self> {
        Self::new(
            self.c_input,
            self.g_m,
            self.eta_q,
            eta_c,
            self.leakage_rate,
            self.reset_threshold,
        )
    }

    pub fn with_leakage_rate(self, leakage_rate: T) -> Result<Self> {
        Self::new(
            self.c_input,
            self.g_m,
            self.eta_q,
            self.eta_c,
            leakage_rate,
            self.reset_threshold,
        )
    }

    pub fn with_reset_threshold(self, reset_threshold: T) -> Result<Self> {
        Self::new(
            self.c_input,
            self.g_m,
            self.eta_q,
            self.eta_c,
            self.leakage_rate,
            reset_threshold,
        )
    }
}

/// Output voltage step produced by one photo-carrier on the gate node.
pub fn volts_per_carrier<T: Real>(p: &DetectorParams<T>) -> T {
    p.g_m * p.q_e() / p.c_input
}

/// Signal-to-noise ratio of `n_carriers` against charge-referred noise `sigma_e`.
///
/// The noise is converted to a CDS voltage at the follower output and
/// divided into the signal voltage, so the gain and capacitance cancel.
pub fn snr<T: Real>(p: &DetectorParams<T>, n_carriers: u64, sigma_e: T) -> Result<T> {
    if !(sigma_e > T::zero()) {
        return Err(invalid("sigma_e", format!("must be > 0, got {sigma_e}")));
    }
    let v_noise = sigma_e * volts_per_carrier(p);
    snr_voltage(p, n_carriers, v_noise)
}

/// Signal-to-noise ratio against a voltage-referred CDS noise `v_noise_cds` (volts rms).
pub fn snr_voltage<T: Real>(p: &DetectorParams<T>, n_carriers: u64, v_noise_cds: T) -> Result<T> {
    if !(v_noise_cds > T::zero()) {
        return Err(invalid(
            "v_noise_cds",
            format!("must be > 0, got {v_noise_cds}"),
        ));
    }
    let signal = p.g_m * T::from_count(n_carriers) * p.q_e() / p.c_input;
    Ok(signal / v_noise_cds)
}

/// Inverse of the forward conversion: fractional electrons for an output voltage.
pub fn carriers_from_voltage<T: Real>(v: T, p: &DetectorParams<T>) -> T {
    v / volts_per_carrier(p)
}
