use cipd::estimation::{
    build_histogram, fit_mixture, goodness_of_fit, log_likelihood_gradient, FitOptions, Mixture,
};
use cipd::{log_likelihood, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

/// Events drawn straight from the mixture model.
fn synth(n: f64, sigma: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois = Poisson::new(n).unwrap();
    let norm = Normal::new(0.0, sigma).unwrap();
    (0..count)
        .map(|_| pois.sample(&mut rng) + norm.sample(&mut rng))
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let xs = synth(2.55, 0.33, 1000, 7);
    let (n, s) = (2.55, 0.33);
    let (dn, ds) = log_likelihood_gradient(&xs, &Mixture::new(n, s, 20).unwrap());
    let h = 1e-6;
    let ll = |n, s| log_likelihood(&xs, n, s, 20).unwrap().value;
    let fd_n = (ll(n + h, s) - ll(n - h, s)) / (2.0 * h);
    let fd_s = (ll(n, s + h) - ll(n, s - h)) / (2.0 * h);
    assert!(
        (dn - fd_n).abs() <= 1e-4 * fd_n.abs().max(1.0),
        "{dn} vs {fd_n}"
    );
    assert!(
        (ds - fd_s).abs() <= 1e-4 * fd_s.abs().max(1.0),
        "{ds} vs {fd_s}"
    );
}

#[test]
fn fits_recover_both_parameters_across_grid() {
    let opts = FitOptions::default();
    for (i, &n) in [1.07, 2.55, 2.85].iter().enumerate() {
        for (j, &s) in [0.30, 0.33].iter().enumerate() {
            let mut hits = 0;
            for seed in 0..100u64 {
                let xs = synth(n, s, 100_000, 10_000 * (i as u64 * 2 + j as u64 + 1) + seed);
                let fit = fit_mixture(&xs, None, &opts).unwrap();
                assert!(fit.converged && fit.monotone);
                if (fit.n_hat - n).abs() < 3.0 * fit.stderr_n
                    && (fit.sigma_hat - s).abs() < 3.0 * fit.stderr_sigma
                {
                    hits += 1;
                }
            }
            println!("recovery n={n} sigma={s}: {hits}/100");
            assert!(hits >= 95, "n={n} sigma={s}: {hits}/100");
        }
    }
}

#[test]
fn multipeak_structure_up_to_four() {
    let xs = synth(2.85, 0.33, 100_000, 31);
    let h = build_histogram(&xs, 0.1).unwrap();
    let peaks = h.local_maxima(0, 1.0);
    for l in 0..=4 {
        assert!(
            peaks.iter().any(|p| (p - l as f64).abs() <= 0.15),
            "no peak near {l}: {peaks:?}"
        );
    }
}

#[test]
fn modal_bin_near_zero_or_one() {
    let xs = synth(1.07, 0.3, 700, 3);
    let h = build_histogram(&xs, 0.1).unwrap();
    let (k, _) = h
        .counts()
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| **c)
        .unwrap();
    let c = h.center(k);
    assert!(
        c.abs() <= 0.1 + 1e-9 || (c - 1.0).abs() <= 0.1 + 1e-9,
        "{c}"
    );
}

#[test]
fn chi_square_of_correct_model_is_calibrated() {
    let mut inside = 0;
    for seed in 0..100u64 {
        let xs = synth(2.55, 0.3, 10_000, 500 + seed);
        let fit = fit_mixture(&xs, None, &FitOptions::default()).unwrap();
        let h = build_histogram(&xs, 0.1).unwrap();
        let expected: f64 = h.expected_counts(&fit.model(), true).iter().sum();
        assert!((expected / h.total() as f64 - 1.0).abs() < 1e-3);
        let g = goodness_of_fit(&h, &fit).unwrap();
        if (0.5..=1.7).contains(&g.reduced()) {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside}/100");
}

#[test]
fn chi_square_rejects_wrong_width() {
    let xs = synth(2.55, 0.3, 10_000, 9);
    let mut fit = fit_mixture(&xs, None, &FitOptions::default()).unwrap();
    fit.sigma_hat = 0.6;
    let g = goodness_of_fit(&build_histogram(&xs, 0.1).unwrap(), &fit).unwrap();
    assert!(g.reduced() > 3.0, "{}", g.reduced());
}

#[test]
fn too_few_groups_is_an_error() {
    let xs = vec![0.0; 60];
    let fit = fit_mixture(&xs, None, &FitOptions::default()).unwrap();
    let h = build_histogram(&xs, 1.0).unwrap();
    assert!(matches!(
        goodness_of_fit(&h, &fit),
        Err(Error::TooFewBins(_))
    ));
}

#[test]
fn em_never_decreases_likelihood() {
    for (k, &(n, s)) in [(0.3, 0.2), (1.07, 0.5), (4.01, 0.33), (10.18, 0.3)]
        .iter()
        .enumerate()
    {
        let xs = synth(n, s, 5_000, 900 + k as u64);
        let fit = fit_mixture(&xs, Some((0.5 * n + 3.0, 0.8)), &FitOptions::default()).unwrap();
        assert!(fit.monotone);
        let slack = 1e-10 * fit.log_likelihood.abs();
        assert!(fit.ll_trace.windows(2).all(|w| w[1] >= w[0] - slack));
    }
}
