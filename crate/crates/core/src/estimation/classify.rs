//! Photon-number decisions and their expected error rate.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::stats::{normal_cdf, poisson_ln_pmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    /// Round to the nearest non-negative integer, ties upward.
    #[default]
    Nearest,
    /// Maximum a posteriori number under Poisson priors.
    Map,
}

impl std::str::FromStr for ClassifyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest" => Ok(ClassifyMode::Nearest),
            "map" => Ok(ClassifyMode::Map),
            other => Err(format!("unknown mode `{other}` (expected nearest or map)")),
        }
    }
}

pub fn classify<T: Real>(x: T, n: T, sigma: T, mode: ClassifyMode, l_max: u32) -> u32 {
    match mode {
        ClassifyMode::Nearest => {
            let r = (x + T::lit(0.5)).floor();
            if r <= T::zero() {
                0
            } else {
                r.to_u32().unwrap_or(u32::MAX)
            }
        }
        ClassifyMode::Map => classify_with_log_priors(x, &poisson_ln_pmf(n, l_max), sigma),
    }
}

/// Index maximising `ln prior_l − (x − l)²/2σ²`; ties go to the lower index.
pub fn classify_with_log_priors<T: Real>(x: T, log_priors: &[T], sigma: T) -> u32 {
    let inv = T::one() / (T::lit(2.0) * sigma * sigma);
    let mut best = 0usize;
    let mut best_score = T::neg_infinity();
    for (l, &lp) in log_priors.iter().enumerate() {
        let d = x - T::from_usize(l).unwrap();
        let score = lp - d * d * inv;
        if score > best_score {
            best_score = score;
            best = l;
        }
    }
    best as u32
}

/// Decision boundaries between consecutive numbers `l` and `l + 1` for
/// unit-spaced Gaussian components of common width:
/// `b_l = l + 1/2 − σ² · (ln prior_{l+1} − ln prior_l)`.
///
/// The boundaries are increasing whenever the log-prior is concave in `l`,
/// which holds for Poisson and uniform priors.
pub fn map_boundaries<T: Real>(log_priors: &[T], sigma: T) -> Vec<T> {
    let s2 = sigma * sigma;
    log_priors
        .windows(2)
        .enumerate()
        .map(|(l, w)| T::from_usize(l).unwrap() + T::lit(0.5) - s2 * (w[1] - w[0]))
        .collect()
}

/// Expected misclassification probability
/// `Σ_{l≤l_max} P_n(l) · Pr[classify(l + ε) ≠ l]`, `ε ~ N(0, σ²)`.
pub fn discrimination_error<T: Real>(n: T, sigma: T, mode: ClassifyMode, l_max: u32) -> T {
    if sigma == T::zero() {
        return T::zero();
    }
    let ln_p = poisson_ln_pmf(n, l_max);
    let half = T::lit(0.5);
    // Decision interval [lo_l, hi_l) of each number.
    let bounds: Vec<(T, T)> = match mode {
        ClassifyMode::Nearest => (0..=l_max as usize)
            .map(|l| {
                let c = T::from_usize(l).unwrap();
                let lo = if l == 0 { T::neg_infinity() } else { c - half };
                (lo, c + half)
            })
            .collect(),
        ClassifyMode::Map => {
            let b = map_boundaries(&ln_p, sigma);
            (0..=l_max as usize)
                .map(|l| {
                    let lo = if l == 0 { T::neg_infinity() } else { b[l - 1] };
                    let hi = if l == l_max as usize {
                        T::infinity()
                    } else {
                        b[l]
                    };
                    (lo, hi)
                })
                .collect()
        }
    };
    ln_p.iter()
        .zip(bounds)
        .enumerate()
        .map(|(l, (&lp, (lo, hi)))| {
            let c = T::from_usize(l).unwrap();
            let correct = normal_cdf((hi - c) / sigma) - normal_cdf((lo - c) / sigma);
            lp.exp() * (T::one() - correct)
        })
        .sum()
}
