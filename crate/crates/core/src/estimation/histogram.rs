use std::io::{self, Write};

use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::mixture::Mixture;

/// Fixed-width histogram whose bins are centred on multiples of `bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    bin_width: T,
    /// Left edge of bin 0.
    origin: T,
    counts: Vec<u64>,
    total: u64,
}

impl<T: Real> Histogram<T> {
    pub fn from_counts(bin_width: T, origin: T, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width > T::zero()) || !bin_width.is_finite() {
            return Err(invalid(
                "bin_width",
                format!("must be > 0, got {bin_width}"),
            ));
        }
        let total = counts.iter().sum();
        Ok(Self {
            bin_width,
            origin,
            counts,
            total,
        })
    }

    pub fn bin_width(&self) -> T {
        self.bin_width
    }
    pub fn origin(&self) -> T {
        self.origin
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn total(&self) -> u64 {
        self.total
    }
    pub fn len(&self) -> usize {
        self.counts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn left_edge(&self, i: usize) -> T {
        self.origin + self.bin_width * T::from_usize(i).unwrap()
    }

    pub fn center(&self, i: usize) -> T {
        self.origin + self.bin_width * (T::from_usize(i).unwrap() + T::lit(0.5))
    }

    /// Expected counts per bin under `model`: `total · ∫_bin density`.
    /// With `include_tails` the mass beyond the outer edges is folded into
    /// the first and last bins.
    pub fn expected_counts(&self, model: &Mixture<T>, include_tails: bool) -> Vec<T> {
        let total = T::from_count(self.total);
        let last = self.counts.len().saturating_sub(1);
        (0..self.counts.len())
            .map(|i| {
                let lo = if include_tails && i == 0 {
                    T::neg_infinity()
                } else {
                    self.left_edge(i)
                };
                let hi = if include_tails && i == last {
                    T::infinity()
                } else {
                    self.left_edge(i + 1)
                };
                total * model.interval_probability(lo, hi)
            })
            .collect()
    }

    /// Bin centres of significant local maxima.
    ///
    /// Counts are smoothed with a centred moving average of `2·half_window + 1`
    /// bins; a local maximum is kept when its topographic prominence exceeds
    /// `min_significance` standard deviations of the smoothed count.
    pub fn local_maxima(&self, half_window: usize, min_significance: f64) -> Vec<T> {
        let n = self.counts.len();
        if n == 0 {
            return Vec::new();
        }
        let smooth: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half_window);
                let hi = (i + half_window).min(n - 1);
                self.counts[lo..=hi].iter().sum::<u64>() as f64 / (hi - lo + 1) as f64
            })
            .collect();
        let width = (2 * half_window + 1) as f64;
        let mut peaks = Vec::new();
        let mut i = 0;
        while i < n {
            // Extent of a plateau starting at i.
            let mut j = i;
            while j + 1 < n && smooth[j + 1] == smooth[i] {
                j += 1;
            }
            let left_lower = i == 0 || smooth[i - 1] < smooth[i];
            let right_lower = j == n - 1 || smooth[j + 1] < smooth[j];
            if left_lower && right_lower && smooth[i] > 0.0 {
                let h = smooth[i];
                let mut left_min = h;
                for k in (0..i).rev() {
                    if smooth[k] > h {
                        break;
                    }
                    left_min = left_min.min(smooth[k]);
                }
                let mut right_min = h;
                for &s in &smooth[j + 1..] {
                    if s > h {
                        break;
                    }
                    right_min = right_min.min(s);
                }
                // An edge peak only has one side to fall off.
                let base = match (i == 0, j == n - 1) {
                    (true, false) => right_min,
                    (false, true) => left_min,
                    _ => left_min.max(right_min),
                };
                if h - base >= min_significance * (h / width).sqrt() {
                    peaks.push((i + j) / 2);
                }
            }
            i = j + 1;
        }
        peaks.into_iter().map(|k| self.center(k)).collect()
    }

    /// CSV with columns `bin_center,count,expected_count`; the last column is
    /// left empty when no model is given.
    pub fn write_csv<W: Write>(&self, expected: Option<&[T]>, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_center,count,expected_count")?;
        for (i, &c) in self.counts.iter().enumerate() {
            match expected {
                Some(e) => writeln!(w, "{},{},{}", self.center(i), c, e[i])?,
                None => writeln!(w, "{},{},", self.center(i), c)?,
            }
        }
        Ok(())
    }
}

/// Bins events so that bin centres fall on multiples of `bin_width`; the bins
/// span the data from its minimum to its maximum.
pub fn build_histogram<T: Real>(events: &[T], bin_width: T) -> Result<Histogram<T>> {
    if events.is_empty() {
        return Err(invalid("events", "cannot histogram an empty event list"));
    }
    if !(bin_width > T::zero()) || !bin_width.is_finite() {
        return Err(invalid(
            "bin_width",
            format!("must be > 0, got {bin_width}"),
        ));
    }
    if events.iter().any(|x| !x.is_finite()) {
        return Err(invalid("events", "events must be finite"));
    }
    let half = T::lit(0.5);
    let min = events.iter().copied().fold(T::infinity(), T::min);
    let max = events.iter().copied().fold(T::neg_infinity(), T::max);
    let origin = ((min / bin_width + half).floor() - half) * bin_width;
    let index = |x: T| ((x - origin) / bin_width).floor().to_usize().unwrap_or(0);
    let mut counts = vec![0u64; index(max) + 1];
    for &x in events {
        counts[index(x)] += 1;
    }
    Histogram::from_counts(bin_width, origin, counts)
}
