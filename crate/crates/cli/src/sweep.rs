use std::process::ExitCode;

use cipd::config::{Config, DirectNoiseSection, NoiseSection, PsdNoiseSection, SourceSection};
use cipd::{discrimination_error, snr, volts_per_carrier};

use crate::commands::{configured_sigma, load_config, write_file};
use crate::error::CliError;
use crate::SweepArgs;

const KEYS: &[&str] = &[
    "sigma_e",
    "c_input_pf",
    "g_m",
    "eta_q",
    "eta_c",
    "leakage_per_hour",
    "reset_threshold_mv",
    "s_white_v2hz",
    "a_pink_v2",
    "f_cutoff_hz",
    "delta_t_cds_s",
    "f_min_hz",
    "mean_photons",
    "rep_rate_hz",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<f64>,
}

/// Parses `KEY=START:STOP:STEP`; the stop value is included when the grid lands on it.
pub fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let bad = || CliError::Invalid(format!("sweep `{spec}`: expected KEY=START:STOP:STEP"));
    let (key, range) = spec.split_once('=').ok_or_else(bad)?;
    if !KEYS.contains(&key) {
        return Err(CliError::Invalid(format!(
            "unknown sweep key `{key}` (known: {})",
            KEYS.join(", ")
        )));
    }
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(CliError::Invalid(format!(
            "sweep `{spec}`: need a finite START <= STOP and STEP > 0"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(CliError::Invalid(format!(
            "sweep `{spec}` has {count} points"
        )));
    }
    Ok(Axis {
        key: key.to_string(),
        values: (0..count).map(|i| start + step * i as f64).collect(),
    })
}

fn psd<'a>(cfg: &'a mut Config, key: &str) -> Result<&'a mut PsdNoiseSection, CliError> {
    match &mut cfg.noise {
        NoiseSection::Psd(p) => Ok(p),
        NoiseSection::Direct(_) => Err(CliError::Invalid(format!(
            "sweep key `{key}` needs a psd noise configuration"
        ))),
    }
}

fn source<'a>(cfg: &'a mut Config, key: &str) -> Result<&'a mut SourceSection, CliError> {
    cfg.source
        .as_mut()
        .ok_or_else(|| CliError::Invalid(format!("sweep key `{key}` needs a light source")))
}

fn apply(cfg: &mut Config, key: &str, v: f64) -> Result<(), CliError> {
    match key {
        "sigma_e" => cfg.noise = NoiseSection::Direct(DirectNoiseSection { sigma_e: v }),
        "c_input_pf" => cfg.detector.c_input_pf = v,
        "g_m" => cfg.detector.g_m = v,
        "eta_q" => cfg.detector.eta_q = v,
        "eta_c" => cfg.detector.eta_c = v,
        "leakage_per_hour" => cfg.detector.leakage_per_hour = v,
        "reset_threshold_mv" => cfg.detector.reset_threshold_mv = v,
        "s_white_v2hz" => psd(cfg, key)?.s_white_v2hz = v,
        "a_pink_v2" => psd(cfg, key)?.a_pink_v2 = v,
        "f_cutoff_hz" => psd(cfg, key)?.f_cutoff_hz = v,
        "delta_t_cds_s" => psd(cfg, key)?.delta_t_cds_s = Some(v),
        "f_min_hz" => psd(cfg, key)?.f_min_hz = v,
        "mean_photons" => source(cfg, key)?.mean_photons = v,
        "rep_rate_hz" => {
            // The CDS interval follows the frame period.
            if let NoiseSection::Psd(p) = &mut cfg.noise {
                p.delta_t_cds_s = None;
            }
            if let Some(s) = cfg.source.as_mut() {
                s.rep_rate_hz = v;
            }
            if cfg.source.is_none() || cfg.run.rep_rate_hz.is_some() {
                cfg.run.rep_rate_hz = Some(v);
            }
        }
        _ => unreachable!("keys are checked when parsed"),
    }
    Ok(())
}

struct Row {
    vpc: f64,
    sigma_e: f64,
    snr1: f64,
    mean: f64,
    error: f64,
}

fn evaluate(cfg: &Config, mode: cipd::ClassifyMode) -> Result<Row, CliError> {
    let det = cfg.detector_params::<f64>()?;
    let sigma_e = configured_sigma(cfg)?;
    let leak = det.leakage_rate() / cfg.frame_rate()?;
    let mean = match cfg.pulse_config::<f64>()? {
        Some(src) => cipd::mean_carriers(&src, &det) + leak,
        None => leak,
    };
    let l_max = cipd::PoissonCutoff::Auto.resolve(mean)?;
    Ok(Row {
        vpc: volts_per_carrier(&det),
        sigma_e,
        snr1: snr(&det, 1, sigma_e)?,
        mean,
        error: discrimination_error(mean.max(1e-12), sigma_e, mode, l_max),
    })
}

pub fn sweep(args: &SweepArgs) -> Result<ExitCode, CliError> {
    if args.sweeps.len() > 2 {
        return Err(CliError::Invalid("at most two --sweep axes".into()));
    }
    let axes: Vec<Axis> = args
        .sweeps
        .iter()
        .map(|s| parse_axis(s))
        .collect::<Result<_, _>>()?;
    if axes.len() == 2 && axes[0].key == axes[1].key {
        return Err(CliError::Invalid(format!(
            "key `{}` swept twice",
            axes[0].key
        )));
    }
    let base = load_config(args.config.as_deref())?;

    let grid: Vec<Vec<f64>> = match &axes[..] {
        [a] => a.values.iter().map(|&v| vec![v]).collect(),
        [a, b] => a
            .values
            .iter()
            .flat_map(|&u| b.values.iter().map(move |&v| vec![u, v]))
            .collect(),
        _ => unreachable!("one or two axes"),
    };
    let mut rows = Vec::with_capacity(grid.len());
    for point in &grid {
        let mut cfg = base.clone();
        for (axis, &v) in axes.iter().zip(point) {
            apply(&mut cfg, &axis.key, v)?;
        }
        rows.push(evaluate(&cfg, args.mode)?);
    }

    let dir = args
        .out
        .clone()
        .or_else(|| base.output.dir.as_ref().map(Into::into))
        .unwrap_or_else(|| "out-sweep".into());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir, "sweep.csv", |w| {
        let keys: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();
        writeln!(
            w,
            "{},volts_per_carrier,sigma_e,snr_n1,mean_carriers,discrimination_error",
            keys.join(",")
        )?;
        for (point, r) in grid.iter().zip(&rows) {
            let vals: Vec<String> = point.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                vals.join(","),
                r.vpc,
                r.sigma_e,
                r.snr1,
                r.mean,
                r.error
            )?;
        }
        Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
