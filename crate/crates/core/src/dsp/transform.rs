//! DFT helpers with the inverse normalized by 1/L.
//!
//! The beam weight synthesis defines its time filters through an inverse
//! transform carrying the 1/L factor, so that convention is fixed here once:
//! `dft` is unnormalized, `idft` scales by 1/L, and `idft(dft(x))` is the
//! identity. Both accept an explicit transform length for zero padding.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

fn padded(x: &[Complex64], l: usize) -> Result<Vec<Complex64>> {
    if l == 0 {
        return Err(Error::invalid("transform length must be positive"));
    }
    if l < x.len() {
        return Err(Error::invalid(format!(
            "transform length {l} shorter than input length {}",
            x.len()
        )));
    }
    let mut buf = x.to_vec();
    buf.resize(l, Complex64::new(0.0, 0.0));
    Ok(buf)
}

/// Forward DFT of `x`, zero padded to length `l`, unnormalized.
pub fn dft(x: &[Complex64], l: usize) -> Result<Vec<Complex64>> {
    let mut buf = padded(x, l)?;
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    Ok(buf)
}

/// Inverse DFT of `x`, zero padded to length `l`, scaled by `1 / l`.
pub fn idft(x: &[Complex64], l: usize) -> Result<Vec<Complex64>> {
    let mut buf = padded(x, l)?;
    FftPlanner::new().plan_fft_inverse(l).process(&mut buf);
    let scale = 1.0 / l as f64;
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn impulse_transforms_to_ones() {
        let x = vec![Complex64::new(1.0, 0.0)];
        let spectrum = dft(&x, 16).unwrap();
        for v in spectrum {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_bin_idft_is_scaled_exponential() {
        let l = 64;
        let bin = 5;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); l];
        spectrum[bin] = Complex64::new(1.0, 0.0);
        let time = idft(&spectrum, l).unwrap();
        for (n, v) in time.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * bin as f64 * n as f64 / l as f64;
            let want = Complex64::from_polar(1.0 / l as f64, phase);
            assert_relative_eq!(v.re, want.re, epsilon = 1e-14);
            assert_relative_eq!(v.im, want.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for (n, l) in [(256, 256), (100, 128), (731, 1024), (4096, 4096)] {
            let x = random_vec(n, n as u64);
            let back = idft(&dft(&x, l).unwrap(), l).unwrap();
            let err: f64 = x
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "n {n} l {l}: worst {err:.3e}");
            // padding region returns to zero
            for v in &back[n..] {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_energy_match() {
        let x = random_vec(512, 9);
        let spectrum = dft(&x, 512).unwrap();
        let et: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ef: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum::<f64>() / 512.0;
        assert_relative_eq!(et, ef, max_relative = 1e-10);
    }

    #[test]
    fn rejects_short_transform_length() {
        let x = random_vec(16, 1);
        assert!(dft(&x, 8).is_err());
        assert!(idft(&x, 0).is_err());
    }
}
