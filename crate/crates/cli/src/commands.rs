use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use cipd::config::{Config, NoiseSection};
use cipd::estimation::{
    build_histogram, classify, fit_mixture, goodness_of_fit, FitOptions, Histogram, Mixture,
    PoissonCutoff,
};
use cipd::readout::{write_frames_csv, RunSummary};
use cipd::{
    cds_sigma, discrimination_error, extract_events, simulate_run, snr as snr_of,
    volts_per_carrier, ClassifyMode,
};
use serde::Serialize;

use crate::error::{CliError, EXIT_NOT_CONVERGED};
use crate::{FitArgs, SimulateArgs, SnrArgs};

const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("config: {e}")))
}

fn out_dir(
    flag: Option<&PathBuf>,
    cfg: Option<&Config>,
    fallback: &str,
) -> Result<PathBuf, CliError> {
    let dir = flag
        .cloned()
        .or_else(|| cfg.and_then(|c| c.output.dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from(fallback));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

pub fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&path, e))
}

fn write_histogram(
    dir: &Path,
    name: &str,
    hist: Option<&Histogram<f64>>,
    model: Option<&Mixture<f64>>,
) -> Result<(), CliError> {
    write_file(dir, name, |w| match hist {
        Some(h) => {
            let expected = model.map(|m| h.expected_counts(m, false));
            h.write_csv(expected.as_deref(), w)
        }
        None => writeln!(w, "bin_center,count,expected_count"),
    })
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    #[serde(flatten)]
    summary: RunSummary,
    config: &'a Config,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix_s: Option<u64>,
}

pub fn simulate(args: &SimulateArgs, dark: bool) -> Result<ExitCode, CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if dark {
        cfg.run.rep_rate_hz = Some(cfg.frame_rate()?);
        cfg.source = None;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(n) = args.frames {
        cfg.run.n_frames = n;
    }
    if !(args.bin_width > 0.0) || !args.bin_width.is_finite() {
        return Err(CliError::Invalid(format!(
            "bin_width must be > 0, got {}",
            args.bin_width
        )));
    }
    let mut rc = cfg.run_config::<f64>()?;
    if let Some(s) = args.sigma_e {
        rc = rc.with_sigma_override(s)?;
    }
    let dir = out_dir(
        args.out.as_ref(),
        Some(&cfg),
        if dark { "out-dark" } else { "out" },
    )?;
    let run = simulate_run(&rc)?;
    let events = extract_events(&run);

    // Histogram expectation under the simulated model itself.
    let summary = RunSummary::from_run(&run);
    let n_true = summary.expected_mean_carriers + summary.expected_leakage_per_frame;
    let model = PoissonCutoff::Auto
        .resolve(n_true)
        .ok()
        .and_then(|l| Mixture::new(n_true, run.sigma_e_used, l).ok());

    write_file(&dir, "frames.csv", |w| write_frames_csv(&run, w))?;
    write_file(&dir, "events.csv", |w| {
        writeln!(w, "measured_delta_e")?;
        events.iter().try_for_each(|x| writeln!(w, "{x}"))
    })?;
    for (name, width) in [("histogram.csv", args.bin_width), ("histogram_1e.csv", 1.0)] {
        let hist = build_histogram(&events, width).ok();
        write_histogram(&dir, name, hist.as_ref(), model.as_ref())?;
    }
    let no_timestamp = args.no_timestamp || cfg.output.no_timestamp;
    let report = SimulationReport {
        summary,
        config: &cfg,
        generated_unix_s: (!no_timestamp).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
    };
    write_file(&dir, "summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    Ok(ExitCode::SUCCESS)
}

/// Reads one number per line, or one column of a CSV file with a header row.
pub fn read_events(path: &Path, column: Option<&str>) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .peekable();
    let first = lines.peek().map(|(_, l)| *l).unwrap_or("");
    let has_header = first.split(',').any(|c| c.trim().parse::<f64>().is_err());
    let index = if has_header {
        let names: Vec<&str> = first.split(',').map(str::trim).collect();
        let wanted = column.unwrap_or(if names.contains(&"measured_delta_e") {
            "measured_delta_e"
        } else {
            names[0]
        });
        let i = names.iter().position(|n| *n == wanted).ok_or_else(|| {
            CliError::Invalid(format!("{}: no column named `{wanted}`", path.display()))
        })?;
        lines.next();
        i
    } else if column.is_some() {
        return Err(CliError::Invalid(format!(
            "{}: --column needs a header row",
            path.display()
        )));
    } else {
        0
    };
    lines
        .map(|(no, line)| {
            line.split(',')
                .nth(index)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Invalid(format!(
                        "{}:{}: not a finite number: `{line}`",
                        path.display(),
                        no + 1
                    ))
                })
        })
        .collect()
}

#[derive(Serialize)]
struct FitReport {
    n_hat: f64,
    sigma_hat: f64,
    stderr_n: f64,
    stderr_sigma: f64,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    chi2: Option<f64>,
    dof: Option<usize>,
    snr_implied: f64,
    snr_per_carrier: f64,
    l_max: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
    n_events: usize,
    mode: ClassifyMode,
    discrimination_error: f64,
    class_counts: Vec<u64>,
}

pub fn fit(args: &FitArgs) -> Result<ExitCode, CliError> {
    if !(args.bin_width > 0.0) || !args.bin_width.is_finite() {
        return Err(CliError::Invalid(format!(
            "bin_width must be > 0, got {}",
            args.bin_width
        )));
    }
    let events = read_events(&args.events, args.column.as_deref())?;
    let opts = FitOptions {
        l_max: args.l_max.map_or(PoissonCutoff::Auto, PoissonCutoff::Fixed),
        affine: args.affine,
        max_iterations: args.max_iterations,
        ..FitOptions::default()
    };
    let fit = fit_mixture(&events, None, &opts)?;
    let model = fit.model();
    let hist = build_histogram(&events, args.bin_width)?;
    let gof = goodness_of_fit(&hist, &fit).ok();

    // Decisions are made on the carrier axis.
    let (gain, offset) = (model.gain(), model.offset());
    let sigma_carriers = fit.sigma_hat / gain;
    let mut class_counts = vec![0u64; fit.l_max as usize + 1];
    for &x in &events {
        let l = classify(
            (x - offset) / gain,
            fit.n_hat,
            sigma_carriers,
            args.mode,
            fit.l_max,
        );
        class_counts[(l as usize).min(fit.l_max as usize)] += 1;
    }
    let report = FitReport {
        n_hat: fit.n_hat,
        sigma_hat: fit.sigma_hat,
        stderr_n: fit.stderr_n,
        stderr_sigma: fit.stderr_sigma,
        log_likelihood: fit.log_likelihood,
        iterations: fit.n_iterations,
        converged: fit.converged,
        chi2: gof.map(|g| g.chi2),
        dof: gof.map(|g| g.dof),
        snr_implied: fit.n_hat / fit.sigma_hat,
        snr_per_carrier: gain / fit.sigma_hat,
        l_max: fit.l_max,
        gain: fit.gain,
        offset: fit.offset,
        n_events: events.len(),
        mode: args.mode,
        discrimination_error: discrimination_error(fit.n_hat, sigma_carriers, args.mode, fit.l_max),
        class_counts,
    };

    let dir = out_dir(args.out.as_ref(), None, "out-fit")?;
    write_file(&dir, "fit.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    write_histogram(&dir, "histogram.csv", Some(&hist), Some(&model))?;
    let scale = hist.total() as f64 * hist.bin_width();
    let (lo, hi) = (hist.left_edge(0), hist.left_edge(hist.len()));
    let steps = hist.len() * 10;
    write_file(&dir, "fitted_curve.csv", |w| {
        writeln!(w, "x,density,scaled_counts")?;
        for k in 0..=steps {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            let d = model.density(x);
            writeln!(w, "{x},{d},{}", d * scale)?;
        }
        Ok(())
    })?;
    if fit.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{}",
            serde_json::json!({"code": EXIT_NOT_CONVERGED, "message": format!("fit did not converge in {} iterations", fit.n_iterations)})
        );
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

/// Read noise the configuration implies: the direct σ, or for a spectrum the
/// CDS read noise combined with the leakage shot noise of one frame.
pub fn configured_sigma(cfg: &Config) -> Result<f64, CliError> {
    let det = cfg.detector_params::<f64>()?;
    let read = cds_sigma(&cfg.noise_spec::<f64>()?, &det)?;
    Ok(match cfg.noise {
        NoiseSection::Direct(_) => read,
        NoiseSection::Psd(_) => (read * read + det.leakage_rate() / cfg.frame_rate()?).sqrt(),
    })
}

#[derive(Serialize)]
struct SnrLine {
    volts_per_carrier: f64,
    sigma_e: f64,
    sigma_source: &'static str,
    n: u64,
    snr: f64,
}

pub fn snr(args: &SnrArgs) -> Result<ExitCode, CliError> {
    let cfg = load_config(args.config.as_deref())?;
    let det = cfg.detector_params::<f64>()?;
    let (sigma_e, sigma_source) = if let Some(s) = args.sigma_e {
        (s, "flag")
    } else if args.sigma_from_psd {
        match cfg.noise {
            NoiseSection::Psd(_) => (cds_sigma(&cfg.noise_spec::<f64>()?, &det)?, "psd_read"),
            NoiseSection::Direct(_) => {
                return Err(cipd::Error::WrongNoiseMode { expected: "psd" }.into())
            }
        }
    } else {
        let source = match cfg.noise {
            NoiseSection::Direct(_) => "direct",
            NoiseSection::Psd(_) => "psd_read_with_leakage",
        };
        (configured_sigma(&cfg)?, source)
    };
    let line = SnrLine {
        volts_per_carrier: volts_per_carrier(&det),
        sigma_e,
        sigma_source,
        n: args.n,
        snr: snr_of(&det, args.n, sigma_e)?,
    };
    println!(
        "{}",
        serde_json::to_string(&line).expect("snr line serializes")
    );
    Ok(ExitCode::SUCCESS)
}
