//! Fitting, classification and goodness of fit for photon-number histograms.

pub mod classify;
pub mod fit;
pub mod gof;
pub mod histogram;
pub mod mixture;
pub mod qe;

pub use classify::{
    classify, classify_with_log_priors, discrimination_error, map_boundaries, ClassifyMode,
};
pub use fit::{
    fit_mixture, standard_errors, stderr_of_mean, FitOptions, MixtureFit, PoissonCutoff,
    DEFAULT_L_MAX, MIN_EVENTS,
};
pub use gof::{goodness_of_fit, pooled_counts, GoodnessOfFit};
pub use histogram::{build_histogram, Histogram};
pub use mixture::{
    eq2_density, log_likelihood, log_likelihood_gradient, mixture_log_likelihood, LogLikelihood,
    Mixture,
};
pub use qe::{estimate_qe, sigma_from_dark, QeEstimate};
