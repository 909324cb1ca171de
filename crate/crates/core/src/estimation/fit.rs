//! Maximum-likelihood fit of the mixture by expectation-maximisation.
//!
//! Component means stay pinned to the integers (or to `offset + gain·l` when
//! the affine recalibration is enabled); only the Poisson mean and the common
//! width are estimated. Both M-step updates are closed form:
//!
//! ```text
//! n  = Σ_il r_il · l / N
//! σ² = Σ_il r_il · (x_i − c_l)² / N
//! ```

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::stats::chunked_reduce;

use super::mixture::{log_likelihood_gradient, Mixture};

/// Fewest events a fit accepts.
pub const MIN_EVENTS: usize = 50;

/// Poisson cutoff used when a fit does not fix one.
pub const DEFAULT_L_MAX: u32 = 20;

const N_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonCutoff {
    /// Use exactly this `l_max`; the fit refuses data whose mean exceeds `l_max / 2`.
    Fixed(u32),
    /// 20 while the sample mean is at most 10, otherwise wide enough that the
    /// truncated Poisson tail is negligible.
    Auto,
}

impl PoissonCutoff {
    pub fn resolve(self, sample_mean: f64) -> Result<u32> {
        match self {
            PoissonCutoff::Fixed(l_max) => {
                if sample_mean > l_max as f64 / 2.0 {
                    return Err(Error::TruncationBias {
                        mean: sample_mean,
                        l_max,
                    });
                }
                Ok(l_max)
            }
            PoissonCutoff::Auto => {
                if sample_mean <= DEFAULT_L_MAX as f64 / 2.0 {
                    Ok(DEFAULT_L_MAX)
                } else {
                    let wide = (sample_mean + 8.0 * sample_mean.sqrt()).ceil();
                    Ok((2.0 * sample_mean.ceil()).max(wide) as u32)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub l_max: PoissonCutoff,
    /// Stop once the log-likelihood changes by less than this between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub sigma_floor: f64,
    /// Also fit `gain` and `offset` of the component centres.
    pub affine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            l_max: PoissonCutoff::Auto,
            tolerance: 1e-8,
            max_iterations: 500,
            sigma_floor: 0.01,
            affine: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit<T> {
    pub n_hat: T,
    pub sigma_hat: T,
    pub l_max: u32,
    pub log_likelihood: T,
    pub n_iterations: usize,
    pub converged: bool,
    /// Asymptotic standard error of `n_hat` from the observed information;
    /// NaN when the information matrix is not positive definite.
    pub stderr_n: T,
    pub stderr_sigma: T,
    pub gain: Option<T>,
    pub offset: Option<T>,
    /// Log-likelihood at each evaluated parameter set, in iteration order.
    pub ll_trace: Vec<T>,
    /// False if any iteration lowered the log-likelihood beyond rounding.
    pub monotone: bool,
}

impl<T: Real> MixtureFit<T> {
    pub fn model(&self) -> Mixture<T> {
        Mixture::with_affine(
            self.n_hat,
            self.sigma_hat,
            self.l_max,
            self.gain.unwrap_or_else(T::one),
            self.offset.unwrap_or_else(T::zero),
        )
        .expect("fitted parameters are valid")
    }
}

#[derive(Clone, Copy)]
struct EStats<T> {
    ll: T,
    sum_l: T,
    sum_ll: T,
    sum_lx: T,
    sum_d2: T,
    sum_x: T,
    sum_xx: T,
}

impl<T: Real> EStats<T> {
    fn zero() -> Self {
        let z = T::zero();
        Self {
            ll: z,
            sum_l: z,
            sum_ll: z,
            sum_lx: z,
            sum_d2: z,
            sum_x: z,
            sum_xx: z,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            ll: self.ll + o.ll,
            sum_l: self.sum_l + o.sum_l,
            sum_ll: self.sum_ll + o.sum_ll,
            sum_lx: self.sum_lx + o.sum_lx,
            sum_d2: self.sum_d2 + o.sum_d2,
            sum_x: self.sum_x + o.sum_x,
            sum_xx: self.sum_xx + o.sum_xx,
        }
    }
}

/// Terms this far below the largest in log space cannot change a sum at the
/// working precision.
fn negligible_log_ratio<T: Real>() -> T {
    T::epsilon().ln() - T::lit(8.0)
}

fn e_step<T: Real>(events: &[T], m: &Mixture<T>) -> EStats<T> {
    let ln_norm = -(T::lit(2.0) * T::PI()).sqrt().ln() - m.sigma().ln();
    let skip = negligible_log_ratio::<T>();
    chunked_reduce(
        events,
        |chunk| {
            let mut terms = vec![T::zero(); m.ln_weights().len()];
            let mut s = EStats::zero();
            for &x in chunk {
                let max = m.log_terms(x, &mut terms);
                let mut z = T::zero();
                let mut rl = T::zero();
                let mut rll = T::zero();
                let mut rd2 = T::zero();
                for (l, t) in terms.iter().enumerate() {
                    let rel = *t - max;
                    if rel < skip {
                        continue;
                    }
                    let r = rel.exp();
                    let lf = T::from_usize(l).unwrap();
                    let d = x - m.center(l);
                    z = z + r;
                    rl = rl + r * lf;
                    rll = rll + r * lf * lf;
                    rd2 = rd2 + r * d * d;
                }
                let inv_z = T::one() / z;
                s.ll = s.ll + ln_norm + max + z.ln();
                s.sum_l = s.sum_l + rl * inv_z;
                s.sum_ll = s.sum_ll + rll * inv_z;
                s.sum_lx = s.sum_lx + rl * inv_z * x;
                s.sum_d2 = s.sum_d2 + rd2 * inv_z;
                s.sum_x = s.sum_x + x;
                s.sum_xx = s.sum_xx + x * x;
            }
            s
        },
        EStats::merge,
        EStats::zero(),
    )
}

/// Fits `(n, σ)` (and optionally gain/offset) to `events`.
///
/// `init` defaults to `(max(sample mean, 0.05), 0.3)`. A fit that exhausts
/// `max_iterations` is returned with `converged = false` and the last
/// evaluated parameters.
pub fn fit_mixture<T: Real>(
    events: &[T],
    init: Option<(T, T)>,
    opts: &FitOptions,
) -> Result<MixtureFit<T>> {
    if events.len() < MIN_EVENTS {
        return Err(Error::InsufficientData {
            needed: MIN_EVENTS,
            got: events.len(),
        });
    }
    if events.iter().any(|x| !x.is_finite()) {
        return Err(invalid("events", "events must be finite"));
    }
    let count = T::from_usize(events.len()).unwrap();
    let mean = events.iter().copied().sum::<T>() / count;
    let l_max = opts.l_max.resolve(mean.as_f64())?;
    let floor = T::lit(opts.sigma_floor);
    let n_floor = T::lit(N_FLOOR);
    let (mut n, mut sigma) = init.unwrap_or((mean.max(T::lit(0.05)), T::lit(0.3)));
    let mut gain = T::one();
    let mut offset = T::zero();

    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut monotone = true;
    let mut model = Mixture::with_affine(n, sigma, l_max, gain, offset)?;
    for _ in 0..opts.max_iterations {
        let s = e_step(events, &model);
        if let Some(&prev) = trace.last() {
            let slack = T::lit(1e-10) * prev.abs().max(T::one());
            if s.ll < prev - slack {
                monotone = false;
            }
            trace.push(s.ll);
            if (s.ll - prev).abs() < T::lit(opts.tolerance) {
                converged = true;
                break;
            }
        } else {
            trace.push(s.ll);
        }

        n = (s.sum_l / count).max(n_floor);
        let var = if opts.affine {
            let det = count * s.sum_ll - s.sum_l * s.sum_l;
            if det > T::epsilon() * count * s.sum_ll {
                gain = (count * s.sum_lx - s.sum_l * s.sum_x) / det;
                offset = (s.sum_x - gain * s.sum_l) / count;
            }
            let two = T::lit(2.0);
            (s.sum_xx - two * offset * s.sum_x - two * gain * s.sum_lx
                + count * offset * offset
                + two * offset * gain * s.sum_l
                + gain * gain * s.sum_ll)
                / count
        } else {
            s.sum_d2 / count
        };
        sigma = var.max(T::zero()).sqrt().max(floor);
        if !(gain > T::zero()) {
            return Err(invalid(
                "gain",
                "affine fit collapsed to a non-positive gain",
            ));
        }
        model = Mixture::with_affine(n, sigma, l_max, gain, offset)?;
    }
    if !converged {
        // The loop exits right after an M-step; evaluate the returned parameters.
        trace.push(e_step(events, &model).ll);
    }

    let (stderr_n, stderr_sigma) = standard_errors(events, &model);
    Ok(MixtureFit {
        n_hat: model.n(),
        sigma_hat: model.sigma(),
        l_max,
        log_likelihood: *trace.last().unwrap(),
        n_iterations: trace.len(),
        converged,
        stderr_n,
        stderr_sigma,
        gain: opts.affine.then_some(model.gain()),
        offset: opts.affine.then_some(model.offset()),
        ll_trace: trace,
        monotone,
    })
}

/// Observed-information standard errors of `(n, σ)` from a central-difference
/// Hessian of the analytic gradient, gain and offset held fixed. Both are NaN
/// when the information matrix is not positive definite.
pub fn standard_errors<T: Real>(events: &[T], m: &Mixture<T>) -> (T, T) {
    let nan = (T::nan(), T::nan());
    let rel = T::lit(1e-5);
    let hn = (rel * m.n().max(T::lit(1e-2))).min(m.n() * T::lit(0.5));
    let hs = (rel * m.sigma()).min(m.sigma() * T::lit(0.5));
    let at = |n: T, s: T| {
        Mixture::with_affine(n, s, m.l_max(), m.gain(), m.offset())
            .map(|mm| log_likelihood_gradient(events, &mm))
    };
    let (Ok(np), Ok(nm), Ok(sp), Ok(sm)) = (
        at(m.n() + hn, m.sigma()),
        at(m.n() - hn, m.sigma()),
        at(m.n(), m.sigma() + hs),
        at(m.n(), m.sigma() - hs),
    ) else {
        return nan;
    };
    let two = T::lit(2.0);
    let h_nn = (np.0 - nm.0) / (two * hn);
    let h_ss = (sp.1 - sm.1) / (two * hs);
    let h_ns = ((np.1 - nm.1) / (two * hn) + (sp.0 - sm.0) / (two * hs)) / two;
    // Observed information is the negated Hessian.
    let (i_nn, i_ss, i_ns) = (-h_nn, -h_ss, -h_ns);
    let det = i_nn * i_ss - i_ns * i_ns;
    if !(det > T::zero()) || !(i_ss > T::zero()) || !(i_nn > T::zero()) {
        return nan;
    }
    ((i_ss / det).sqrt(), (i_nn / det).sqrt())
}

pub fn stderr_of_mean<T: Real>(events: &[T], m: &Mixture<T>) -> T {
    standard_errors(events, m).0
}
