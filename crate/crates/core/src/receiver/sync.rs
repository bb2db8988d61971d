//! Frame synchronization by matched-filter correlation against the
//! pulse-shaped preamble, with an optional bank of rate-shifted replicas for
//! coarse Doppler estimation.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::{pulse_shape, ComplexBasebandSignal, PulseSpec, SincInterpolator};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Search settings for [`synchronize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncConfig {
    /// Largest compression factor searched; 0 disables the replica bank.
    pub doppler_max: f64,
    /// Grid spacing of the compression search.
    pub doppler_step: f64,
    /// Minimum peak-to-sidelobe ratio in dB to accept the frame.
    pub threshold_db: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        // +-1.5e-3 covers +-2.25 m/s of platform speed at c = 1500 m/s
        Self { doppler_max: 1.5e-3, doppler_step: 2.5e-5, threshold_db: 6.0 }
    }
}

/// Correlation peak location and quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Sample index in the searched signal where the replica's first sample
    /// aligns. The preamble's first symbol peaks one pulse half-span later.
    pub frame_start: usize,
    /// Best-matching compression factor from the replica bank.
    pub coarse_doppler: f64,
    /// Peak-to-sidelobe ratio in dB, sidelobes measured outside one pulse
    /// span around the peak.
    pub peak_quality_db: f64,
    /// Correlation magnitude at the peak; equals the replica energy for a
    /// noiseless, undistorted insertion.
    pub peak_value: f64,
}

// matched replica for compression a: the preamble stretched by 1/(1-a) with
// the carrier rotation the same motion induces at baseband
fn shifted_replica(r: &[Complex64], a: f64, fc: f64, dt: f64) -> Vec<Complex64> {
    if a == 0.0 {
        return r.to_vec();
    }
    let interp = SincInterpolator::new();
    let len = ((r.len() - 1) as f64 / (1.0 - a)).floor() as usize + 1;
    (0..len)
        .map(|k| {
            let sample = interp.interpolate(r, (1.0 - a) * k as f64);
            sample * Complex64::from_polar(1.0, -TWO_PI * fc * a * k as f64 * dt)
        })
        .collect()
}

/// Locates the preamble in `v` and reports the best coarse Doppler factor.
pub fn synchronize(
    v: &ComplexBasebandSignal,
    preamble: &[Complex64],
    pulse: &PulseSpec,
    fc: f64,
    config: &SyncConfig,
) -> Result<SyncResult> {
    if !(fc.is_finite() && fc > 0.0) {
        return Err(Error::invalid(format!("carrier frequency must be positive, got {fc}")));
    }
    if !(config.doppler_max.is_finite() && config.doppler_max >= 0.0 && config.doppler_max < 0.01)
    {
        return Err(Error::invalid("doppler_max must lie in [0, 0.01)"));
    }
    if config.doppler_max > 0.0 && !(config.doppler_step > 0.0) {
        return Err(Error::invalid("doppler_step must be positive when a bank is requested"));
    }
    let replica = pulse_shape(preamble, pulse)?;
    if replica.sample_rate != v.sample_rate {
        return Err(Error::RateMismatch { a: v.sample_rate, b: replica.sample_rate });
    }

    let grid: Vec<f64> = if config.doppler_max == 0.0 {
        vec![0.0]
    } else {
        let n = (config.doppler_max / config.doppler_step).round() as i64;
        (-n..=n).map(|k| k as f64 * config.doppler_step).collect()
    };

    let dt = 1.0 / v.sample_rate;
    let max_len = ((replica.len() - 1) as f64 / (1.0 - config.doppler_max)).floor() as usize + 1;
    if max_len > v.len() {
        return Err(Error::TruncatedFrame { needed: max_len, available: v.len() });
    }
    let z = (v.len() + max_len).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(z);
    let inv = planner.plan_fft_inverse(z);

    let mut v_spec = vec![Complex64::new(0.0, 0.0); z];
    v_spec[..v.len()].copy_from_slice(&v.samples);
    fwd.process(&mut v_spec);

    let mut best: Option<(f64, usize, f64, Vec<f64>, usize)> = None;
    for &a in &grid {
        let m = shifted_replica(&replica.samples, a, fc, dt);
        let m_len = m.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); z];
        buf[..m_len].copy_from_slice(&m);
        fwd.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&v_spec) {
            *b = s * b.conj();
        }
        inv.process(&mut buf);
        let scale = 1.0 / z as f64;
        let valid = v.len() - m_len;
        let mags: Vec<f64> = buf[..=valid].iter().map(|c| (c * scale).norm()).collect();
        let (k_best, &peak) = mags
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty correlation");
        if best.as_ref().map_or(true, |b| peak > b.0) {
            best = Some((peak, k_best, a, mags, m_len));
        }
    }
    let (peak, k_best, a_best, mags, _) = best.expect("non-empty doppler grid");

    // sidelobe level outside the pulse main-lobe region
    let excl = pulse.span_symbols * pulse.samples_per_symbol * 2;
    let sidelobe = mags
        .iter()
        .enumerate()
        .filter(|(k, _)| k.abs_diff(k_best) > excl)
        .map(|(_, &m)| m)
        .fold(0.0f64, f64::max);
    let quality_db = if sidelobe > 0.0 { 20.0 * (peak / sidelobe).log10() } else { f64::INFINITY };
    if quality_db < config.threshold_db {
        return Err(Error::SyncFailure { quality_db, threshold_db: config.threshold_db });
    }
    Ok(SyncResult {
        frame_start: k_best,
        coarse_doppler: a_best,
        peak_quality_db: quality_db,
        peak_value: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{generate_mseq, MSequenceSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 39_062.5;

    fn preamble(degree: u32) -> Vec<Complex64> {
        generate_mseq(&MSequenceSpec::for_degree(degree).unwrap())
            .unwrap()
            .iter()
            .map(|&c| Complex64::new(c, 0.0))
            .collect()
    }

    fn pulse() -> PulseSpec {
        PulseSpec::new(0.25, 6.0 / FS, 16, 6).unwrap()
    }

    fn no_bank() -> SyncConfig {
        SyncConfig { doppler_max: 0.0, doppler_step: 0.0, threshold_db: 6.0 }
    }

    fn insert(replica: &ComplexBasebandSignal, offset: usize, tail: usize) -> ComplexBasebandSignal {
        let mut samples = vec![Complex64::new(0.0, 0.0); offset + replica.len() + tail];
        samples[offset..offset + replica.len()].copy_from_slice(&replica.samples);
        ComplexBasebandSignal::new(samples, FS, 0.0).unwrap()
    }

    #[test]
    fn finds_known_offset_exactly() {
        let p = preamble(7);
        let replica = pulse_shape(&p, &pulse()).unwrap();
        let v = insert(&replica, 333, 400);
        let r = synchronize(&v, &p, &pulse(), 12_500.0, &no_bank()).unwrap();
        assert_eq!(r.frame_start, 333);
        assert_eq!(r.coarse_doppler, 0.0);
    }

    #[test]
    fn peak_equals_replica_energy() {
        let p = preamble(7);
        let replica = pulse_shape(&p, &pulse()).unwrap();
        let v = insert(&replica, 120, 200);
        let r = synchronize(&v, &p, &pulse(), 12_500.0, &no_bank()).unwrap();
        let energy: f64 = replica.samples.iter().map(|c| c.norm_sqr()).sum();
        approx::assert_relative_eq!(r.peak_value, energy, max_relative = 1e-9);
    }

    #[test]
    fn long_sequence_survives_heavy_noise() {
        let p = preamble(11);
        let replica = pulse_shape(&p, &pulse()).unwrap();
        let offset = 1000;
        let clean = insert(&replica, offset, 1500);
        // unit SNR against the replica's own power over its span
        let noisy = {
            let power = replica.mean_power();
            let sigma = (power / 2.0).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
            let samples = clean
                .samples
                .iter()
                .map(|c| {
                    c + Complex64::new(
                        rand_distr::Distribution::sample(&normal, &mut rng),
                        rand_distr::Distribution::sample(&normal, &mut rng),
                    )
                })
                .collect();
            ComplexBasebandSignal::new(samples, FS, 0.0).unwrap()
        };
        let r = synchronize(&noisy, &p, &pulse(), 12_500.0, &no_bank()).unwrap();
        assert_eq!(r.frame_start, offset);
        assert!(r.peak_quality_db > 10.0, "quality {}", r.peak_quality_db);
    }

    #[test]
    fn doppler_bank_recovers_compression_factor() {
        let p = preamble(7);
        let replica = pulse_shape(&p, &pulse()).unwrap();
        let a_true = 5e-4;
        let distorted = shifted_replica(&replica.samples, a_true, 12_500.0, 1.0 / FS);
        let mut samples = vec![Complex64::new(0.0, 0.0); 500 + distorted.len() + 500];
        samples[500..500 + distorted.len()].copy_from_slice(&distorted);
        let v = ComplexBasebandSignal::new(samples, FS, 0.0).unwrap();
        let cfg = SyncConfig { doppler_max: 1e-3, doppler_step: 2.5e-5, threshold_db: 6.0 };
        let r = synchronize(&v, &p, &pulse(), 12_500.0, &cfg).unwrap();
        assert!((r.coarse_doppler - a_true).abs() < 1.3e-5, "got {}", r.coarse_doppler);
        assert!(r.frame_start.abs_diff(500) <= 2, "got {}", r.frame_start);
    }

    #[test]
    fn pure_noise_fails_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = (0..26_000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let v = ComplexBasebandSignal::new(samples, FS, 0.0).unwrap();
        let p = preamble(7);
        match synchronize(&v, &p, &pulse(), 12_500.0, &no_bank()) {
            Err(Error::SyncFailure { quality_db, threshold_db }) => {
                assert!(quality_db < threshold_db);
            }
            other => panic!("expected sync failure, got {other:?}"),
        }
    }

    #[test]
    fn short_signal_is_rejected() {
        let p = preamble(7);
        let v = ComplexBasebandSignal::new(vec![Complex64::ONE; 64], FS, 0.0).unwrap();
        assert!(matches!(
            synchronize(&v, &p, &pulse(), 12_500.0, &no_bank()),
            Err(Error::TruncatedFrame { .. })
        ));
    }
}
