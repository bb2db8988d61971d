//! Time-varying multipath channel between an M-element transmit array and a
//! single receive hydrophone.
//!
//! Each propagation path is a plane wave: element m's signal on path p is
//! delayed by the path delay plus m times the incremental inter-element
//! delay, scaled by the path amplitude, and rotated by the carrier phase of
//! its total delay. Path delays additionally drift over absolute time
//! according to a per-path law (linear slope, optionally plus a sinusoid),
//! which models platform motion; the drifting delay is applied to the
//! baseband envelope and its carrier phase is applied analytically.
//!
//! Static delay components are realized exactly in the frequency domain;
//! the time-varying residual is realized per output sample with a 64-tap
//! windowed-sinc interpolator. Receiver noise is circularly symmetric
//! Gaussian, seeded, with its variance tied to the measured received power
//! or to an element-count-independent transmit reference.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::beam::ArrayGeometry;
use crate::dsp::{ComplexBasebandSignal, SincInterpolator};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
// padding beyond the largest shift: covers the interpolator half-width plus slack
const PAD_GUARD: usize = 80;

/// Sinusoidal component of a delay drift law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineDrift {
    /// Peak delay excursion in seconds.
    pub amplitude_s: f64,
    /// Oscillation frequency in Hz.
    pub frequency_hz: f64,
    /// Phase at absolute time zero, radians.
    #[serde(default)]
    pub phase_rad: f64,
}

/// Delay drift `eps(t) = slope * t + amplitude * sin(2 pi f t + phase)`,
/// evaluated at absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftLaw {
    /// Dimensionless delay growth rate (positive when the path lengthens).
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub sine: Option<SineDrift>,
}

impl DriftLaw {
    pub fn linear(slope: f64) -> Self {
        Self { slope, sine: None }
    }

    /// Delay offset in seconds at absolute time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut eps = self.slope * t;
        if let Some(s) = self.sine {
            eps += s.amplitude_s * (TWO_PI * s.frequency_hz * t + s.phase_rad).sin();
        }
        eps
    }

    pub fn is_static(&self) -> bool {
        self.slope == 0.0 && self.sine.map_or(true, |s| s.amplitude_s == 0.0)
    }

    fn max_abs_over(&self, t1: f64, t2: f64) -> f64 {
        let linear = (self.slope * t1).abs().max((self.slope * t2).abs());
        linear + self.sine.map_or(0.0, |s| s.amplitude_s.abs())
    }
}

/// One propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// Real amplitude of the path.
    pub gain: f64,
    /// Reference delay in seconds at element 0.
    pub delay_s: f64,
    /// Arrival/departure angle at the array, radians.
    pub angle_rad: f64,
    /// Delay drift over absolute time.
    #[serde(default)]
    pub drift: DriftLaw,
    /// Slow geometry change in radians per second; the angle is evaluated at
    /// the frame start and held for the frame.
    #[serde(default)]
    pub angle_drift: f64,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::invalid(format!("path gain must be finite, got {}", self.gain)));
        }
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(Error::invalid(format!(
                "path delay must be finite and non-negative, got {}",
                self.delay_s
            )));
        }
        if !self.angle_rad.is_finite() || !self.angle_drift.is_finite() {
            return Err(Error::invalid("path angle and angle_drift must be finite"));
        }
        Ok(())
    }

    /// Angle at absolute time `t_start`, accounting for slow geometry drift.
    pub fn angle_at(&self, t_start: f64) -> f64 {
        self.angle_rad + self.angle_drift * t_start
    }
}

/// How the noise variance is referenced to the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// Noise variance = measured mean received power / SNR. The beamformer's
    /// coherent gain is absorbed into the reference.
    #[default]
    Received,
    /// Noise variance = (sum of squared path gains) * (total transmit power)
    /// / SNR, independent of the element count, so array gain shows up as a
    /// real SNR improvement.
    Transmit,
}

/// Full channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub geometry: ArrayGeometry,
    /// Carrier frequency in Hz.
    pub fc: f64,
    pub paths: Vec<PathSpec>,
    /// Receiver SNR in dB; `+inf` disables noise, written as `null` in JSON.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub snr_reference: SnrReference,
    /// Noise seed; identical specs and inputs reproduce bit-identical output.
    pub seed: u64,
}

// JSON has no infinity literal, so a noiseless channel round-trips as null
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fc.is_finite() && self.fc > 0.0) {
            return Err(Error::invalid(format!("fc must be positive, got {}", self.fc)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::invalid("snr_db must be a real value or +inf"));
        }
        for p in &self.paths {
            p.validate()?;
        }
        Ok(())
    }
}

/// Per-element delay and complex gain of one path at the frame start.
///
/// The delay is `delay_s + m * dtau` and the gain is
/// `gain * e^{-j 2 pi fc (delay_s + m * dtau)}`, with `dtau` the incremental
/// inter-element delay for the path angle evaluated at `t_start`.
pub fn element_path_params(
    spec: &ChannelSpec,
    path: usize,
    element: usize,
    t_start: f64,
) -> Result<(f64, Complex64)> {
    let p = spec.paths.get(path).ok_or_else(|| {
        Error::invalid(format!("path index {path} out of range ({} paths)", spec.paths.len()))
    })?;
    if element >= spec.geometry.elements {
        return Err(Error::invalid(format!(
            "element index {element} out of range ({} elements)",
            spec.geometry.elements
        )));
    }
    p.validate()?;
    let dtau = crate::beam::incremental_delay(&spec.geometry, p.angle_at(t_start))?;
    let delay = p.delay_s + element as f64 * dtau;
    let gain = Complex64::from_polar(p.gain.abs(), -TWO_PI * spec.fc * delay)
        * if p.gain < 0.0 { -Complex64::ONE } else { Complex64::ONE };
    Ok((delay, gain))
}

fn check_tx(tx: &[ComplexBasebandSignal], geometry: &ArrayGeometry) -> Result<()> {
    if tx.is_empty() || tx[0].is_empty() {
        return Err(Error::invalid("transmit signals must be non-empty"));
    }
    if tx.len() != geometry.elements {
        return Err(Error::invalid(format!(
            "{} transmit signals for {} array elements",
            tx.len(),
            geometry.elements
        )));
    }
    let (rate, t0, len) = (tx[0].sample_rate, tx[0].t0, tx[0].len());
    for s in tx {
        if s.sample_rate != rate {
            return Err(Error::RateMismatch { a: rate, b: s.sample_rate });
        }
        if s.t0 != t0 || s.len() != len {
            return Err(Error::invalid("transmit signals must share t0 and length"));
        }
    }
    Ok(())
}

// adds gain * e^{-j 2 pi nu delay} * src[k] into acc over the signed bin grid
fn accumulate_shifted(acc: &mut [Complex64], src: &[Complex64], gain: Complex64, delay_s: f64, fs: f64) {
    let z = acc.len();
    let df = fs / z as f64;
    let dphi = -TWO_PI * df * delay_s;
    let step = Complex64::from_polar(1.0, dphi);
    let mut k = 0usize;
    while k <= z / 2 {
        // restart the rotor each chunk to stop rounding drift
        let mut rot = gain * Complex64::from_polar(1.0, dphi * k as f64);
        let chunk_end = (k + 4096).min(z / 2 + 1);
        while k < chunk_end {
            acc[k] += src[k] * rot;
            rot *= step;
            k += 1;
        }
    }
    while k < z {
        let mut rot = gain * Complex64::from_polar(1.0, dphi * (k as f64 - z as f64));
        let chunk_end = (k + 4096).min(z);
        while k < chunk_end {
            acc[k] += src[k] * rot;
            rot *= step;
            k += 1;
        }
    }
}

struct PathTerm {
    samples: Vec<Complex64>,
    drift: DriftLaw,
}

/// Noiseless sum of the listed paths' contributions on a common output grid.
///
/// The output starts earlier and ends later than the input span by enough to
/// hold the largest negative and positive shifts. Grid placement depends
/// only on the full path set, so partial sums from the same spec line up
/// sample for sample and add to the full output.
pub fn propagate_paths(
    tx: &[ComplexBasebandSignal],
    spec: &ChannelSpec,
    t_start: f64,
    paths: &[usize],
) -> Result<ComplexBasebandSignal> {
    let (signal, _) = propagate_selected(tx, spec, t_start, paths)?;
    Ok(signal)
}

fn propagate_selected(
    tx: &[ComplexBasebandSignal],
    spec: &ChannelSpec,
    t_start: f64,
    selected: &[usize],
) -> Result<(ComplexBasebandSignal, f64)> {
    spec.validate()?;
    check_tx(tx, &spec.geometry)?;
    for &p in selected {
        if p >= spec.paths.len() {
            return Err(Error::invalid(format!(
                "path index {p} out of range ({} paths)",
                spec.paths.len()
            )));
        }
    }
    let fs = tx[0].sample_rate;
    let dt = 1.0 / fs;
    let len = tx[0].len();
    let m_count = spec.geometry.elements;

    // output grid bounds from the full path set, so subsets stay aligned
    let mut max_pos = 0.0f64;
    let mut max_neg = 0.0f64;
    let frame_t1 = t_start + tx[0].t0;
    let frame_t2 = t_start + tx[0].end_time() + 1.0;
    for p in &spec.paths {
        let dtau = crate::beam::incremental_delay(&spec.geometry, p.angle_at(t_start))?;
        let span = (m_count.saturating_sub(1)) as f64 * dtau;
        let lo = p.delay_s + span.min(0.0) - p.drift.max_abs_over(frame_t1, frame_t2);
        let hi = p.delay_s + span.max(0.0) + p.drift.max_abs_over(frame_t1, frame_t2);
        max_neg = max_neg.max(-lo);
        max_pos = max_pos.max(hi);
    }
    let pad_front = (max_neg * fs).ceil() as usize + PAD_GUARD;
    let pad_back = (max_pos * fs).ceil() as usize + PAD_GUARD;
    let out_len = len + pad_front + pad_back;
    let z = out_len.next_power_of_two();
    let t0_out = tx[0].t0 - pad_front as f64 * dt;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(z);
    let inv = planner.plan_fft_inverse(z);

    // one forward transform per element, accumulated into every selected path
    let mut accs: Vec<Vec<Complex64>> = selected
        .iter()
        .map(|_| vec![Complex64::new(0.0, 0.0); z])
        .collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); z];
    for m in 0..m_count {
        scratch[..pad_front].fill(Complex64::new(0.0, 0.0));
        scratch[pad_front..pad_front + len].copy_from_slice(&tx[m].samples);
        scratch[pad_front + len..].fill(Complex64::new(0.0, 0.0));
        fwd.process(&mut scratch);
        for (acc, &pi) in accs.iter_mut().zip(selected) {
            let (delay, gain) = element_path_params(spec, pi, m, t_start)?;
            accumulate_shifted(acc, &scratch, gain, delay, fs);
        }
    }

    let ifft_scale = 1.0 / z as f64;
    let mut terms = Vec::with_capacity(selected.len());
    for (mut acc, &pi) in accs.into_iter().zip(selected) {
        inv.process(&mut acc);
        for v in &mut acc {
            *v *= ifft_scale;
        }
        acc.truncate(out_len);
        terms.push(PathTerm { samples: acc, drift: spec.paths[pi].drift });
    }

    // apply time-varying drift per path, then sum
    let interp = SincInterpolator::new();
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for term in &terms {
        if term.drift.is_static() {
            for (o, s) in out.iter_mut().zip(&term.samples) {
                *o += s;
            }
        } else {
            for (k, o) in out.iter_mut().enumerate() {
                let t_abs = t_start + t0_out + k as f64 * dt;
                let eps = term.drift.eval(t_abs);
                let v = interp.interpolate(&term.samples, k as f64 - eps * fs);
                *o += v * Complex64::from_polar(1.0, -TWO_PI * spec.fc * eps);
            }
        }
    }

    // reference power for the noise variance, measured over the nominal span
    let nominal = &out[pad_front..pad_front + len];
    let reference = match spec.snr_reference {
        SnrReference::Received => {
            nominal.iter().map(|v| v.norm_sqr()).sum::<f64>() / len as f64
        }
        SnrReference::Transmit => {
            let tx_power: f64 = tx.iter().map(ComplexBasebandSignal::mean_power).sum();
            let path_power: f64 = spec.paths.iter().map(|p| p.gain * p.gain).sum();
            tx_power * path_power
        }
    };
    Ok((ComplexBasebandSignal::new(out, fs, t0_out)?, reference))
}

/// Full channel output: every path plus seeded receiver noise.
pub fn propagate(
    tx: &[ComplexBasebandSignal],
    spec: &ChannelSpec,
    t_start: f64,
) -> Result<ComplexBasebandSignal> {
    let all: Vec<usize> = (0..spec.paths.len()).collect();
    let (mut signal, reference) = propagate_selected(tx, spec, t_start, &all)?;
    add_noise(&mut signal.samples, spec.snr_db, reference, spec.seed);
    Ok(signal)
}

fn add_noise(samples: &mut [Complex64], snr_db: f64, reference_power: f64, seed: u64) {
    if snr_db == f64::INFINITY {
        return;
    }
    let variance = if reference_power > 0.0 {
        reference_power / 10f64.powf(snr_db / 10.0)
    } else {
        1.0
    };
    let sigma = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in samples.iter_mut() {
        *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
}

/// Splits the noiseless reception into the principal path term (path 0) and
/// the sum of all other paths.
///
/// Path 0 is the principal by convention. The two parts live on the same
/// grid as [`propagate`] output and add to it up to the seeded noise.
pub fn interference_decomposition(
    tx: &[ComplexBasebandSignal],
    spec: &ChannelSpec,
    t_start: f64,
) -> Result<(ComplexBasebandSignal, ComplexBasebandSignal)> {
    if spec.paths.is_empty() {
        return Err(Error::invalid("interference decomposition needs at least one path"));
    }
    let principal = propagate_paths(tx, spec, t_start, &[0])?;
    let rest: Vec<usize> = (1..spec.paths.len()).collect();
    let interference = if rest.is_empty() {
        ComplexBasebandSignal::new(
            vec![Complex64::new(0.0, 0.0); principal.len()],
            principal.sample_rate,
            principal.t0,
        )?
    } else {
        propagate_paths(tx, spec, t_start, &rest)?
    };
    Ok((principal, interference))
}

/// Reciprocal reception: a single-source probe arrives at every array
/// element through the same paths.
///
/// Drift laws are frozen at `t_start` (snapshot): each path contributes a
/// constant extra delay `eps(t_start)` and its carrier phase. Every element
/// gets an independent seeded noise draw referenced to the mean noiseless
/// power across all elements.
pub fn propagate_uplink(
    tx: &ComplexBasebandSignal,
    spec: &ChannelSpec,
    t_start: f64,
) -> Result<Vec<ComplexBasebandSignal>> {
    spec.validate()?;
    if tx.is_empty() {
        return Err(Error::invalid("probe signal must be non-empty"));
    }
    let fs = tx.sample_rate;
    let dt = 1.0 / fs;
    let len = tx.len();
    let m_count = spec.geometry.elements;

    let mut max_pos = 0.0f64;
    let mut max_neg = 0.0f64;
    for p in &spec.paths {
        let dtau = crate::beam::incremental_delay(&spec.geometry, p.angle_at(t_start))?;
        let span = (m_count.saturating_sub(1)) as f64 * dtau;
        let eps = p.drift.eval(t_start);
        let lo = p.delay_s + span.min(0.0) + eps.min(0.0);
        let hi = p.delay_s + span.max(0.0) + eps.max(0.0);
        max_neg = max_neg.max(-lo);
        max_pos = max_pos.max(hi);
    }
    let pad_front = (max_neg * fs).ceil() as usize + PAD_GUARD;
    let pad_back = (max_pos * fs).ceil() as usize + PAD_GUARD;
    let out_len = len + pad_front + pad_back;
    let z = out_len.next_power_of_two();
    let t0_out = tx.t0 - pad_front as f64 * dt;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(z);
    let inv = planner.plan_fft_inverse(z);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); z];
    spectrum[pad_front..pad_front + len].copy_from_slice(&tx.samples);
    fwd.process(&mut spectrum);

    let ifft_scale = 1.0 / z as f64;
    let mut outputs = Vec::with_capacity(m_count);
    for m in 0..m_count {
        let mut acc = vec![Complex64::new(0.0, 0.0); z];
        for pi in 0..spec.paths.len() {
            let (delay, gain) = element_path_params(spec, pi, m, t_start)?;
            let eps = spec.paths[pi].drift.eval(t_start);
            let gain = gain * Complex64::from_polar(1.0, -TWO_PI * spec.fc * eps);
            accumulate_shifted(&mut acc, &spectrum, gain, delay + eps, fs);
        }
        inv.process(&mut acc);
        for v in &mut acc {
            *v *= ifft_scale;
        }
        acc.truncate(out_len);
        outputs.push(ComplexBasebandSignal::new(acc, fs, t0_out)?);
    }

    if spec.snr_db != f64::INFINITY {
        let mean_power = outputs
            .iter()
            .map(|o| o.samples[pad_front..pad_front + len].iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / (m_count * len) as f64;
        let variance = if mean_power > 0.0 {
            mean_power / 10f64.powf(spec.snr_db / 10.0)
        } else {
            1.0
        };
        let sigma = (variance / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for o in &mut outputs {
            for v in &mut o.samples {
                *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            }
        }
    }
    Ok(outputs)
}
