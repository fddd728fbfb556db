//! One-sided magnitude spectra.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{HarError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitudes `|X[k]|` of the DFT of `signal` for `k = 0..=L/2`. No taper
/// is applied.
pub fn fft_spectrum(signal: &[f64]) -> Result<Vec<f64>> {
    let l = signal.len();
    if l < 2 {
        return Err(HarError::TooFewSamples { needed: 2, got: l });
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(l));
    fft.process(&mut buf);
    Ok(buf[..l / 2 + 1].iter().map(|c| c.norm()).collect())
}

/// Sum of `|X[k]|²` over the full two-sided spectrum, rebuilt from the
/// one-sided magnitudes of a length-`l` real signal by conjugate symmetry.
pub fn two_sided_power(one_sided: &[f64], l: usize) -> f64 {
    one_sided
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mirrored = k != 0 && !(l % 2 == 0 && k == l / 2);
            let w = if mirrored { 2.0 } else { 1.0 };
            w * m * m
        })
        .sum()
}
