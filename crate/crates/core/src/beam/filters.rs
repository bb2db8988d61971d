//! Time-domain realization of frequency-domain weights.
//!
//! Each element's weight column is inverse-transformed into an L-tap kernel.
//! The kernel is L-periodic by construction, so for waveform use one period
//! is re-centered around lag zero and applied by linear convolution; the
//! introduced group delay of `L/2` samples is folded into the output's `t0`
//! rather than left in the sample data.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::BeamWeights;
use crate::dsp::{idft, pulse_shape, ComplexBasebandSignal, PulseSpec};
use crate::error::{Error, Result};

/// Inverse-transforms each element's weight column into its L-tap filter.
///
/// Row `m` of the result is element m's kernel; a forward DFT of any row
/// reproduces the corresponding weight column.
pub fn synthesize_time_filters(w: &BeamWeights) -> Result<Vec<Vec<Complex64>>> {
    let m = w.elements();
    if m == 0 {
        return Err(Error::invalid("weights carry no elements"));
    }
    let mut filters = Vec::with_capacity(m);
    for el in 0..m {
        let column: Vec<Complex64> = w.weights.iter().map(|row| row[el]).collect();
        filters.push(idft(&column, w.l)?);
    }
    Ok(filters)
}

pub(crate) fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Linear convolution of `x` with `kernel` via zero-padded FFTs.
pub(crate) fn fft_convolve(x: &[Complex64], kernel: &[Complex64]) -> Vec<Complex64> {
    let out_len = x.len() + kernel.len() - 1;
    let z = next_pow2(out_len);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(z);
    let inv = planner.plan_fft_inverse(z);
    let mut a = x.to_vec();
    a.resize(z, Complex64::new(0.0, 0.0));
    let mut b = kernel.to_vec();
    b.resize(z, Complex64::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    let scale = 1.0 / z as f64;
    for (va, vb) in a.iter_mut().zip(&b) {
        *va *= vb * scale;
    }
    inv.process(&mut a);
    a.truncate(out_len);
    a
}

// one period of the kernel re-centered: index i holds tap psi[(i - L/2) mod L],
// so taps for lags -L/2 .. L/2 - 1 appear in causal order
fn recenter(psi: &[Complex64]) -> Vec<Complex64> {
    let l = psi.len();
    let half = l / 2;
    let mut out = Vec::with_capacity(l);
    out.extend_from_slice(&psi[half..]);
    out.extend_from_slice(&psi[..half]);
    out
}

/// Pulse-shapes `symbols` and convolves the waveform with every element
/// filter, yielding one transmit signal per element.
///
/// Filters must all have the same even length `L`. Each output starts
/// `L/2` samples earlier than the pulse-shaped waveform, recorded in `t0`,
/// so the band-limited beam filtering introduces no net group delay.
pub fn apply_transmit_beamforming(
    symbols: &[Complex64],
    pulse: &PulseSpec,
    filters: &[Vec<Complex64>],
) -> Result<Vec<ComplexBasebandSignal>> {
    if filters.is_empty() {
        return Err(Error::invalid("no element filters supplied"));
    }
    let l = filters[0].len();
    if l < 2 || l % 2 != 0 {
        return Err(Error::invalid(format!("filter length {l} must be even and at least 2")));
    }
    if filters.iter().any(|f| f.len() != l) {
        return Err(Error::invalid("element filters differ in length"));
    }
    let x = pulse_shape(symbols, pulse)?;
    let dt = 1.0 / x.sample_rate;
    let t0 = x.t0 - (l / 2) as f64 * dt;
    filters
        .iter()
        .map(|psi| {
            let kernel = recenter(psi);
            ComplexBasebandSignal::new(fft_convolve(&x.samples, &kernel), x.sample_rate, t0)
        })
        .collect()
}
