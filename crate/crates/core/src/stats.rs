//! Small statistical helpers shared by the estimators.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::scalar::Real;

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    let z = z.as_f64();
    if z == f64::INFINITY {
        return T::one();
    }
    if z == f64::NEG_INFINITY {
        return T::zero();
    }
    T::lit(0.5 * erfc(-z / std::f64::consts::SQRT_2))
}

/// `ln l!` for `l = 0..=l_max`.
pub fn ln_factorials<T: Real>(l_max: u32) -> Vec<T> {
    let mut out = Vec::with_capacity(l_max as usize + 1);
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..=l_max {
        acc = acc + T::from_u32(k).unwrap().ln();
        out.push(acc);
    }
    out
}

/// `ln P_n(l)` for the Poisson distribution of mean `n`, `l = 0..=l_max`.
pub fn poisson_ln_pmf<T: Real>(n: T, l_max: u32) -> Vec<T> {
    let ln_n = n.ln();
    ln_factorials::<T>(l_max)
        .into_iter()
        .enumerate()
        .map(|(l, lf)| {
            if l == 0 {
                -n
            } else {
                -n + T::from_usize(l).unwrap() * ln_n - lf
            }
        })
        .collect()
}

pub(crate) const SUM_CHUNK: usize = 2048;

/// Maps fixed-size chunks in parallel and folds the partial results in chunk
/// order, so the floating-point result does not depend on the worker count.
pub(crate) fn chunked_reduce<X, A, M, R>(items: &[X], map: M, reduce: R, init: A) -> A
where
    X: Sync,
    A: Send,
    M: Fn(&[X]) -> A + Sync + Send,
    R: FnMut(A, A) -> A,
{
    let partials: Vec<A> = items.par_chunks(SUM_CHUNK).map(map).collect();
    partials.into_iter().fold(init, reduce)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of homogeneity between two count vectors over the
/// same bins. Bins empty in both samples are skipped.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len(), "count vectors must share bins");
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&oa, &ob) in a.iter().zip(b) {
        let col = (oa + ob) as f64;
        if col == 0.0 {
            continue;
        }
        bins += 1;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (oa as f64 - ea).powi(2) / ea + (ob as f64 - eb).powi(2) / eb;
    }
    let dof = bins.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
    };
    ChiSquareTest {
        statistic: stat,
        dof,
        p_value,
    }
}
