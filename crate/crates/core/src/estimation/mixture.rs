//! Poisson-weighted Gaussian mixture over integer carrier numbers.
//!
//! ```text
//! N(x) = 1/(√(2π) σ) · Σ_{l=0}^{l_max} P_n(l) · exp(-(x - l)² / 2σ²)
//! ```
//!
//! The Poisson weights are truncated at `l_max` and not renormalised, so the
//! density integrates to `Σ_{l≤l_max} P_n(l)`. An optional affine map moves
//! component `l` to `offset + gain·l` for data whose electron scale is only
//! approximately known.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::stats::{chunked_reduce, normal_cdf, poisson_ln_pmf};

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<T> {
    n: T,
    sigma: T,
    l_max: u32,
    gain: T,
    offset: T,
    ln_weights: Vec<T>,
}

impl<T: Real> Mixture<T> {
    pub fn new(n: T, sigma: T, l_max: u32) -> Result<Self> {
        Self::with_affine(n, sigma, l_max, T::one(), T::zero())
    }

    pub fn with_affine(n: T, sigma: T, l_max: u32, gain: T, offset: T) -> Result<Self> {
        if !(n > T::zero()) || !n.is_finite() {
            return Err(invalid("n", format!("mean carriers must be > 0, got {n}")));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be > 0, got {sigma}")));
        }
        if l_max < 1 {
            return Err(invalid("l_max", "must be >= 1"));
        }
        if !(gain > T::zero()) || !gain.is_finite() || !offset.is_finite() {
            return Err(invalid("gain/offset", "gain must be > 0 and both finite"));
        }
        Ok(Self {
            n,
            sigma,
            l_max,
            gain,
            offset,
            ln_weights: poisson_ln_pmf(n, l_max),
        })
    }

    pub fn n(&self) -> T {
        self.n
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn l_max(&self) -> u32 {
        self.l_max
    }
    pub fn gain(&self) -> T {
        self.gain
    }
    pub fn offset(&self) -> T {
        self.offset
    }
    /// `ln P_n(l)`, `l = 0..=l_max`.
    pub fn ln_weights(&self) -> &[T] {
        &self.ln_weights
    }

    pub fn center(&self, l: usize) -> T {
        self.offset + self.gain * T::from_usize(l).unwrap()
    }

    fn ln_norm(&self) -> T {
        -(T::lit(2.0) * T::PI()).sqrt().ln() - self.sigma.ln()
    }

    /// Writes the unnormalised log responsibilities `ln P_n(l) - (x - c_l)²/2σ²`
    /// into `out` and returns their maximum.
    pub(crate) fn log_terms(&self, x: T, out: &mut [T]) -> T {
        let inv = T::one() / (T::lit(2.0) * self.sigma * self.sigma);
        let mut max = T::neg_infinity();
        for (l, (o, &lw)) in out.iter_mut().zip(&self.ln_weights).enumerate() {
            let d = x - self.center(l);
            *o = lw - d * d * inv;
            if *o > max {
                max = *o;
            }
        }
        max
    }

    pub fn ln_density(&self, x: T) -> T {
        let mut terms = vec![T::zero(); self.ln_weights.len()];
        self.ln_density_with(x, &mut terms)
    }

    pub(crate) fn ln_density_with(&self, x: T, terms: &mut [T]) -> T {
        let max = self.log_terms(x, terms);
        if max == T::neg_infinity() {
            return max;
        }
        let s: T = terms.iter().map(|&t| (t - max).exp()).sum();
        self.ln_norm() + max + s.ln()
    }

    pub fn density(&self, x: T) -> T {
        let inv = T::one() / (T::lit(2.0) * self.sigma * self.sigma);
        let s: T = self
            .ln_weights
            .iter()
            .enumerate()
            .map(|(l, &lw)| {
                let d = x - self.center(l);
                (lw - d * d * inv).exp()
            })
            .sum();
        s * self.ln_norm().exp()
    }

    /// Probability mass the density assigns to `[lo, hi)`; either end may be infinite.
    pub fn interval_probability(&self, lo: T, hi: T) -> T {
        self.ln_weights
            .iter()
            .enumerate()
            .map(|(l, &lw)| {
                let c = self.center(l);
                lw.exp() * (normal_cdf((hi - c) / self.sigma) - normal_cdf((lo - c) / self.sigma))
            })
            .sum()
    }

    /// Total mass, `Σ_{l≤l_max} P_n(l)`.
    pub fn total_mass(&self) -> T {
        self.ln_weights.iter().map(|w| w.exp()).sum()
    }
}

/// The mixture density at `x` with unit gain and zero offset.
pub fn eq2_density<T: Real>(x: T, n: T, sigma: T, l_max: u32) -> Result<T> {
    Ok(Mixture::new(n, sigma, l_max)?.density(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood<T> {
    /// `-∞` when some event has zero density.
    pub value: T,
    /// Set when at least one event's density underflowed to zero.
    pub underflow: bool,
}

pub fn log_likelihood<T: Real>(
    events: &[T],
    n: T,
    sigma: T,
    l_max: u32,
) -> Result<LogLikelihood<T>> {
    if events.is_empty() {
        return Err(invalid("events", "need at least one event"));
    }
    Ok(mixture_log_likelihood(
        events,
        &Mixture::new(n, sigma, l_max)?,
    ))
}

pub fn mixture_log_likelihood<T: Real>(events: &[T], m: &Mixture<T>) -> LogLikelihood<T> {
    let (value, underflow) = chunked_reduce(
        events,
        |chunk| {
            let mut terms = vec![T::zero(); m.ln_weights.len()];
            let mut acc = T::zero();
            let mut underflow = false;
            for &x in chunk {
                let ld = m.ln_density_with(x, &mut terms);
                if !ld.is_finite() {
                    underflow = true;
                }
                acc = acc + ld;
            }
            (acc, underflow)
        },
        |(a, ua), (b, ub)| (a + b, ua || ub),
        (T::zero(), false),
    );
    if underflow {
        return LogLikelihood {
            value: T::neg_infinity(),
            underflow,
        };
    }
    LogLikelihood { value, underflow }
}

/// Analytic gradient of the log-likelihood with respect to `(n, σ)`.
pub fn log_likelihood_gradient<T: Real>(events: &[T], m: &Mixture<T>) -> (T, T) {
    let inv_n = T::one() / m.n;
    let inv_s = T::one() / m.sigma;
    chunked_reduce(
        events,
        |chunk| {
            let mut terms = vec![T::zero(); m.ln_weights.len()];
            let mut dn = T::zero();
            let mut ds = T::zero();
            for &x in chunk {
                let max = m.log_terms(x, &mut terms);
                let mut z = T::zero();
                let mut sl = T::zero();
                let mut sd2 = T::zero();
                for (l, &t) in terms.iter().enumerate() {
                    let r = (t - max).exp();
                    let d = x - m.center(l);
                    z = z + r;
                    sl = sl + r * T::from_usize(l).unwrap();
                    sd2 = sd2 + r * d * d;
                }
                dn = dn + sl / z * inv_n - T::one();
                ds = ds - inv_s + sd2 / z * inv_s * inv_s * inv_s;
            }
            (dn, ds)
        },
        |(a, b), (c, d)| (a + c, b + d),
        (T::zero(), T::zero()),
    )
}
