//! Solves the white/1-over-f split of the default noise spectrum.
//!
//! The 1 Hz level is pinned at 500 nV/√Hz. The CDS read noise is chosen so
//! that read noise and leakage shot noise together give 0.26 e rms in a dark
//! run at 40 Hz.

use cipd::model::DetectorParams;
use cipd::noise::{
    calibrate_white_level, cds_sigma, NoiseSpec, CALIBRATED_DELTA_T_CDS, CALIBRATED_F_CUTOFF,
    CALIBRATED_F_MIN, CALIBRATED_PSD_AT_1HZ,
};

fn main() {
    let device = DetectorParams::<f64>::reference_device();
    let frame_rate = 40.0;
    let dark_sigma = 0.26;
    let leakage_per_frame = device.leakage_rate() / frame_rate;
    let read_sigma = (dark_sigma * dark_sigma - leakage_per_frame).sqrt();

    for f_cutoff in [1000.0, 100.0, 50.0, CALIBRATED_F_CUTOFF, 10.0] {
        match calibrate_white_level(
            CALIBRATED_PSD_AT_1HZ,
            f_cutoff,
            CALIBRATED_DELTA_T_CDS,
            CALIBRATED_F_MIN,
            read_sigma,
            &device,
        ) {
            Ok(n) => println!(
                "f_cutoff {f_cutoff:>7} Hz: s_white = {:.12e} V^2/Hz, a_pink = {:.12e} V^2, sigma = {:.5} e",
                n.s_white,
                n.a_pink,
                cds_sigma(&NoiseSpec::Psd(n), &device).unwrap()
            ),
            Err(e) => println!("f_cutoff {f_cutoff:>7} Hz: {e}"),
        }
    }
    println!("target read sigma {read_sigma:.6} e (dark total {dark_sigma} e, leakage {leakage_per_frame:.6} e/frame)");
}
