//! Coarse Doppler removal by band-limited resampling.

use num_complex::Complex64;

use crate::dsp::{ComplexBasebandSignal, SincInterpolator};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Rescales the time axis: the output equals the input read at `t / (1 - a)`.
///
/// A frame compressed by the factor `1 - a` in the water is restored to its
/// nominal duration by resampling with the estimated `a`. The output keeps
/// the input sample rate; its length is `round(len * (1 - a))` and its start
/// time scales to `(1 - a) * t0`. `a = 0` returns the input unchanged.
pub fn coarse_resample(v: &ComplexBasebandSignal, a_hat: f64) -> Result<ComplexBasebandSignal> {
    if !(a_hat.is_finite() && a_hat.abs() < 0.01) {
        return Err(Error::invalid(format!(
            "coarse Doppler factor must satisfy |a| < 0.01, got {a_hat}"
        )));
    }
    if v.is_empty() {
        return Err(Error::invalid("cannot resample an empty signal"));
    }
    if a_hat == 0.0 {
        return Ok(v.clone());
    }
    let out_len = ((v.len() as f64) * (1.0 - a_hat)).round().max(1.0) as usize;
    let interp = SincInterpolator::new();
    let stretch = 1.0 / (1.0 - a_hat);
    let samples = (0..out_len)
        .map(|k| interp.interpolate(&v.samples, k as f64 * stretch))
        .collect();
    ComplexBasebandSignal::new(samples, v.sample_rate, v.t0 * (1.0 - a_hat))
}

/// Coarse resampling plus removal of the carrier rotation the same motion
/// induces at baseband.
///
/// After resampling by `a`, a compressed carrier leaves the residual phase
/// `-2 pi fc a t / (1 - a)`; this derotates it using the output's own time
/// axis.
pub fn doppler_compensate(
    v: &ComplexBasebandSignal,
    a_hat: f64,
    fc: f64,
) -> Result<ComplexBasebandSignal> {
    if !(fc.is_finite() && fc > 0.0) {
        return Err(Error::invalid(format!("carrier frequency must be positive, got {fc}")));
    }
    let mut out = coarse_resample(v, a_hat)?;
    if a_hat == 0.0 {
        return Ok(out);
    }
    let rate = a_hat / (1.0 - a_hat);
    for k in 0..out.len() {
        let t = out.sample_time(k);
        out.samples[k] *= Complex64::from_polar(1.0, TWO_PI * fc * rate * t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const FS: f64 = 39_062.5;

    fn tone(f: f64, n: usize, t0: f64) -> ComplexBasebandSignal {
        let samples = (0..n)
            .map(|k| Complex64::from_polar(1.0, TWO_PI * f * (t0 + k as f64 / FS)))
            .collect();
        ComplexBasebandSignal::new(samples, FS, t0).unwrap()
    }

    #[test]
    fn zero_factor_is_identity() {
        let v = tone(500.0, 256, 0.0);
        let out = coarse_resample(&v, 0.0).unwrap();
        assert_eq!(out, v);
        let out = doppler_compensate(&v, 0.0, 12_500.0).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn output_length_follows_rounding_rule() {
        let v = tone(100.0, 10_000, 0.0);
        for a in [1e-3, -1e-3, 4.4e-4] {
            let out = coarse_resample(&v, a).unwrap();
            assert_eq!(out.len(), ((10_000.0 * (1.0 - a)).round()) as usize);
            assert_relative_eq!(out.t0, v.t0 * (1.0 - a));
        }
    }

    #[test]
    fn compressed_tone_is_restored() {
        // a tone compressed by (1 - a) comes back to its nominal frequency
        let a = 1e-3;
        let f0 = 800.0;
        let n = 20_000;
        let compressed = {
            let samples = (0..n)
                .map(|k| Complex64::from_polar(1.0, TWO_PI * f0 * (1.0 - a) * (k as f64 / FS)))
                .collect();
            ComplexBasebandSignal::new(samples, FS, 0.0).unwrap()
        };
        let out = coarse_resample(&compressed, a).unwrap();
        // phase advance per sample away from the edges gives the frequency
        let i0 = out.len() / 4;
        let i1 = 3 * out.len() / 4;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in i0..i1 {
            acc += out.samples[k + 1] * out.samples[k].conj();
        }
        let f_meas = acc.arg() / TWO_PI * FS;
        assert!((f_meas - f0).abs() < 1e-3 * f0, "measured {f_meas}");
    }

    #[test]
    fn interior_samples_match_analytic_stretch() {
        let f0 = 1200.0;
        let a = -7.5e-4;
        let v = tone(f0, 16_000, 0.0);
        let out = coarse_resample(&v, a).unwrap();
        for k in (out.len() / 4..3 * out.len() / 4).step_by(211) {
            let t = k as f64 / FS;
            let want = Complex64::from_polar(1.0, TWO_PI * f0 * t / (1.0 - a));
            assert!((out.samples[k] - want).norm() < 1e-6, "sample {k}");
        }
    }

    #[test]
    fn compensation_recovers_motion_distorted_signal() {
        // s(t) built from in-band tones so the reference is exact
        let a = 6e-4;
        let fc = 12_500.0;
        let freqs = [300.0, -750.0, 1_900.0];
        let coef = [
            Complex64::new(1.0, 0.2),
            Complex64::new(-0.4, 0.6),
            Complex64::new(0.3, -0.5),
        ];
        let s = |t: f64| -> Complex64 {
            freqs
                .iter()
                .zip(&coef)
                .map(|(&f, &c)| c * Complex64::from_polar(1.0, TWO_PI * f * t))
                .sum()
        };
        let n = 24_000;
        let distorted = {
            let samples = (0..n)
                .map(|k| {
                    let t = k as f64 / FS;
                    s((1.0 - a) * t) * Complex64::from_polar(1.0, -TWO_PI * fc * a * t)
                })
                .collect();
            ComplexBasebandSignal::new(samples, FS, 0.0).unwrap()
        };
        let out = doppler_compensate(&distorted, a, fc).unwrap();
        for k in (out.len() / 4..3 * out.len() / 4).step_by(173) {
            let want = s(out.sample_time(k));
            assert!((out.samples[k] - want).norm() < 1e-6, "sample {k}");
        }
    }

    #[test]
    fn rejects_out_of_range_factor() {
        let v = tone(100.0, 64, 0.0);
        assert!(coarse_resample(&v, 0.02).is_err());
        assert!(coarse_resample(&v, f64::NAN).is_err());
    }
}
