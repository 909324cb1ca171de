//! Pearson chi-square of a histogram against a fitted mixture.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::fit::MixtureFit;
use super::histogram::Histogram;

/// Adjacent bins are pooled until each group expects at least this many counts.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    /// Groups minus fitted parameters minus one.
    pub dof: usize,
    pub groups: usize,
}

impl GoodnessOfFit {
    pub fn reduced(&self) -> f64 {
        self.chi2 / self.dof as f64
    }
}

/// Observed and expected counts pooled left to right so every group expects at
/// least [`MIN_EXPECTED`]; an underfilled remainder joins the last group.
pub fn pooled_counts(observed: &[u64], expected: &[f64]) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&c, &x) in observed.iter().zip(expected) {
        o += c as f64;
        e += x;
        if e >= MIN_EXPECTED {
            groups.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => groups.push((o, e)),
        }
    }
    groups
}

/// Tail mass beyond the histogram range is folded into the outer bins, so the
/// expected counts sum to the event total up to Poisson truncation.
pub fn goodness_of_fit<T: Real>(hist: &Histogram<T>, fit: &MixtureFit<T>) -> Result<GoodnessOfFit> {
    let expected: Vec<f64> = hist
        .expected_counts(&fit.model(), true)
        .into_iter()
        .map(|x| x.as_f64())
        .collect();
    let groups = pooled_counts(hist.counts(), &expected);
    let params = if fit.gain.is_some() { 4 } else { 2 };
    if groups.len() < params + 2 {
        return Err(Error::TooFewBins(groups.len()));
    }
    let chi2 = groups.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    Ok(GoodnessOfFit {
        chi2,
        dof: groups.len() - params - 1,
        groups: groups.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_reaches_minimum() {
        let g = pooled_counts(&[1, 2, 10, 3, 1], &[1.0, 4.5, 9.0, 2.0, 1.0]);
        assert_eq!(g, vec![(3.0, 5.5), (14.0, 12.0)]);
    }

    #[test]
    fn everything_in_one_group_when_sparse() {
        let g = pooled_counts(&[1, 1], &[0.5, 0.5]);
        assert_eq!(g, vec![(2.0, 1.0)]);
    }
}
