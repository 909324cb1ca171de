use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QeEstimate<T> {
    pub qe: T,
    pub stderr: Option<T>,
}

/// Quantum efficiency implied by a fitted mean: `n̂ / (μ · η_c)`.
pub fn estimate_qe<T: Real>(
    n_hat: T,
    mean_photons: T,
    eta_c: T,
    stderr_n: Option<T>,
) -> Result<QeEstimate<T>> {
    if !(mean_photons > T::zero()) || !mean_photons.is_finite() {
        return Err(invalid(
            "mean_photons",
            format!("must be > 0, got {mean_photons}"),
        ));
    }
    if !(eta_c > T::zero()) || eta_c > T::one() {
        return Err(invalid("eta_c", format!("must be in (0, 1], got {eta_c}")));
    }
    if !(n_hat >= T::zero()) || !n_hat.is_finite() {
        return Err(invalid(
            "n_hat",
            format!("must be finite and >= 0, got {n_hat}"),
        ));
    }
    let scale = mean_photons * eta_c;
    Ok(QeEstimate {
        qe: n_hat / scale,
        stderr: stderr_n.map(|s| s / scale),
    })
}

/// Unbiased sample standard deviation of dark events.
pub fn sigma_from_dark<T: Real>(events: &[T]) -> Result<T> {
    if events.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: events.len(),
        });
    }
    let n = T::from_usize(events.len()).unwrap();
    let mean = events.iter().copied().sum::<T>() / n;
    let ss: T = events.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Ok((ss / (n - T::one())).sqrt())
}
