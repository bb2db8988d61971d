//! Probe-based estimation of the principal arrival angle.
//!
//! The base station transmits a periodic binary probe sequence; each array
//! element's reception is folded over the probe period, circularly
//! cross-correlated with a pulse-shaped replica to estimate that element's
//! impulse response, and the per-element responses are combined with
//! delay-and-sum steering into a delay-angle power map. The map's global
//! maximum names the principal path, whose angle feeds the beam designer.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::beam::{incremental_delay, ArrayGeometry};
use crate::dsp::pulse::raised_cosine_value;
use crate::dsp::{ComplexBasebandSignal, PulseSpec};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Per-element circular impulse-response estimates over one probe period.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementChannelEstimate {
    /// One response per element; entry `d` estimates the channel at delay
    /// `d / sample_rate` seconds (modulo the probe period).
    pub responses: Vec<Vec<Complex64>>,
    /// Sample rate of the delay axis in Hz.
    pub sample_rate: f64,
    /// Probe period in samples.
    pub period_samples: usize,
    /// Number of steady probe periods averaged per element.
    pub periods_averaged: usize,
    /// Set when the reception's early periods disagree with the steady ones,
    /// the signature of a delay spread wrapping past the probe period.
    pub aliased: bool,
}

impl ElementChannelEstimate {
    pub fn elements(&self) -> usize {
        self.responses.len()
    }

    /// Delay of bin `d` in seconds.
    pub fn delay_of(&self, d: usize) -> f64 {
        d as f64 / self.sample_rate
    }
}

/// Delay-angle power map in dB relative to its maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayAngleMap {
    /// `power[d][a]` for delay bin `d` and angle bin `a`.
    pub power: Vec<Vec<f64>>,
    /// Delay axis in seconds, strictly increasing.
    pub delay_axis: Vec<f64>,
    /// Angle axis in radians, strictly increasing.
    pub angle_axis: Vec<f64>,
}

/// Default angle grid: -60 degrees to +60 degrees in 0.25-degree steps.
pub fn default_angle_grid() -> Vec<f64> {
    (-240..=240).map(|i| (i as f64 * 0.25).to_radians()).collect()
}

// one period of the periodized pulse-shaped probe on the sample grid
fn periodic_replica(probe: &[f64], pulse: &PulseSpec) -> Vec<Complex64> {
    let ns = pulse.samples_per_symbol;
    let period = probe.len() * ns;
    let span = pulse.span_symbols as isize;
    let mut c = vec![Complex64::new(0.0, 0.0); period];
    // wrap enough pulse repetitions that the truncated tails all land
    let wraps = (span as usize * ns) / period + 1;
    for (n, &d) in probe.iter().enumerate() {
        for rep in -(wraps as isize)..=(wraps as isize) {
            for j in 0..period {
                let offset = j as isize + rep * period as isize - (n * ns) as isize;
                let x = offset as f64 / ns as f64;
                if x.abs() <= span as f64 {
                    c[j] += d * raised_cosine_value(x, pulse.alpha_rc);
                }
            }
        }
    }
    c
}

/// Estimates each element's channel impulse response from its reception of a
/// periodic pulse-shaped probe.
///
/// Every complete probe period in steady state (absolute-time period index
/// two onward, skipping the turn-on transient) is folded and averaged, then
/// circularly cross-correlated with the replica and normalized by the
/// replica energy, so a path of gain `h` at delay `tau` appears as a peak of
/// magnitude `|h|` at bin `round(tau * fs)`.
///
/// The probe period must cover the channel's delay spread; a spread that
/// wraps past the period leaves the estimate aliased. The returned `aliased`
/// flag reports the detectable signature of that condition: arrivals still
/// turning on during the first steady period.
pub fn estimate_element_channels(
    rx: &[ComplexBasebandSignal],
    probe: &[f64],
    pulse: &PulseSpec,
) -> Result<ElementChannelEstimate> {
    if rx.is_empty() {
        return Err(Error::invalid("no element receptions supplied"));
    }
    if probe.is_empty() {
        return Err(Error::invalid("probe sequence is empty"));
    }
    let fs = pulse.sample_rate();
    let ns = pulse.samples_per_symbol;
    let period = probe.len() * ns;
    for (m, v) in rx.iter().enumerate() {
        if (v.sample_rate - fs).abs() > 1e-6 * fs {
            return Err(Error::RateMismatch { a: v.sample_rate, b: fs });
        }
        if v.t0 != rx[0].t0 || v.len() != rx[0].len() {
            return Err(Error::invalid(format!(
                "element {m} reception has a different grid than element 0"
            )));
        }
    }

    let replica = periodic_replica(probe, pulse);
    let energy: f64 = replica.iter().map(|v| v.norm_sqr()).sum();
    if energy <= 0.0 {
        return Err(Error::invalid("probe replica has zero energy"));
    }

    // fold each fully covered absolute-time period; index 0 starts at t = 0
    let align = (rx[0].t0 * fs).round() as i64;
    let len = rx[0].len() as i64;
    let p_lo = {
        let first = align; // absolute sample index of the first rx sample
        let mut p = first.div_euclid(period as i64);
        if first.rem_euclid(period as i64) != 0 {
            p += 1;
        }
        p
    };
    let p_hi = (align + len).div_euclid(period as i64); // exclusive
    if p_hi <= p_lo.max(0) {
        return Err(Error::TruncatedFrame {
            needed: period,
            available: rx[0].len(),
        });
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(period);
    let inv = planner.plan_fft_inverse(period);
    let mut c_spec = replica.clone();
    fwd.process(&mut c_spec);

    let steady_from = 2i64;
    let mut responses = Vec::with_capacity(rx.len());
    let mut aliased = false;
    let mut periods_averaged = 0usize;
    for v in rx {
        let fold_period = |p: i64| -> Vec<Complex64> {
            let start = (p * period as i64 - align) as usize;
            v.samples[start..start + period].to_vec()
        };
        // periods 0 and 1 carry the turn-on transient and the last two carry
        // the turn-off tail (up to one period of path delay plus pulse span),
        // so both ends are excluded from the steady set
        let steady: Vec<i64> = (p_lo.max(steady_from)..p_hi - 2).collect();
        let used: Vec<i64> = if steady.is_empty() {
            (p_lo.max(0)..p_hi).collect()
        } else {
            steady
        };
        let mut avg = vec![Complex64::new(0.0, 0.0); period];
        for &p in &used {
            for (a, s) in avg.iter_mut().zip(fold_period(p)) {
                *a += s;
            }
        }
        let scale = 1.0 / used.len() as f64;
        for a in avg.iter_mut() {
            *a *= scale;
        }
        periods_averaged = used.len();

        // wrap detection: the first steady period still misses arrivals
        // whose delay exceeds one period, so it disagrees with the average
        if used.len() >= 3 && p_lo.max(0) <= 1 && p_hi > 2 {
            let first = fold_period(1);
            let diff = |a: &[Complex64], b: &[Complex64]| -> f64 {
                (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>()
                    / a.len() as f64)
                    .sqrt()
            };
            let reference =
                (avg.iter().map(|x| x.norm_sqr()).sum::<f64>() / period as f64).sqrt();
            if reference > 0.0 {
                // noise level: scatter of the individual steady periods
                let scatter = used
                    .iter()
                    .map(|&p| diff(&fold_period(p), &avg))
                    .sum::<f64>()
                    / used.len() as f64;
                let gap = diff(&first, &avg);
                if gap > (3.0 * scatter).max(0.05 * reference) {
                    aliased = true;
                }
            }
        }

        // circular cross-correlation, normalized to unit gain on a matched copy
        let mut spec = avg;
        fwd.process(&mut spec);
        let norm = 1.0 / (energy * period as f64);
        for (s, c) in spec.iter_mut().zip(&c_spec) {
            *s *= c.conj() * norm;
        }
        inv.process(&mut spec);
        responses.push(spec);
    }

    Ok(ElementChannelEstimate {
        responses,
        sample_rate: fs,
        period_samples: period,
        periods_averaged,
        aliased,
    })
}

/// Delay-and-sum power map over delay bins and steering angles.
///
/// `power(d, a) = |sum_m h_m[d] * e^{+j 2 pi fc m dtau(theta_a)}|^2 / M`,
/// expressed in dB relative to the map maximum. An all-zero estimate yields
/// a uniform 0 dB floor.
pub fn delay_angle_map(
    channels: &ElementChannelEstimate,
    geometry: &ArrayGeometry,
    fc: f64,
    angle_grid: &[f64],
) -> Result<DelayAngleMap> {
    let m = channels.elements();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 elements, got {m}")));
    }
    if geometry.elements != m {
        return Err(Error::invalid(format!(
            "geometry has {} elements but the estimate carries {m}",
            geometry.elements
        )));
    }
    if !(fc.is_finite() && fc > 0.0) {
        return Err(Error::invalid(format!("fc must be positive, got {fc}")));
    }
    if angle_grid.is_empty() {
        return Err(Error::invalid("angle grid is empty"));
    }
    if angle_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("angle grid must be strictly increasing"));
    }
    let bins = channels.period_samples;
    let steer: Vec<Vec<Complex64>> = angle_grid
        .iter()
        .map(|&theta| -> Result<Vec<Complex64>> {
            let dtau = incremental_delay(geometry, theta)?;
            Ok((0..m)
                .map(|el| Complex64::from_polar(1.0, TWO_PI * fc * el as f64 * dtau))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut linear = vec![vec![0.0f64; angle_grid.len()]; bins];
    let mut peak = 0.0f64;
    for (d, row) in linear.iter_mut().enumerate() {
        for (a, s) in steer.iter().enumerate() {
            let acc: Complex64 = (0..m).map(|el| channels.responses[el][d] * s[el]).sum();
            let p = acc.norm_sqr() / m as f64;
            row[a] = p;
            peak = peak.max(p);
        }
    }

    let power = if peak > 0.0 {
        linear
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|p| if p > 0.0 { 10.0 * (p / peak).log10() } else { -300.0 })
                    .collect()
            })
            .collect()
    } else {
        vec![vec![0.0; angle_grid.len()]; bins]
    };

    Ok(DelayAngleMap {
        power,
        delay_axis: (0..bins).map(|d| channels.delay_of(d)).collect(),
        angle_axis: angle_grid.to_vec(),
    })
}

/// Angle of the map's global power maximum, in radians.
///
/// Ties are broken toward the smaller `|theta|`, and an exact symmetric tie
/// resolves to the smaller angle index, so repeated calls are deterministic.
pub fn principal_angle(map: &DelayAngleMap) -> Result<f64> {
    if map.power.is_empty() || map.angle_axis.is_empty() {
        return Err(Error::invalid("map is empty"));
    }
    let mut best: Option<(f64, f64, usize)> = None; // (power, |theta|, angle idx)
    for row in &map.power {
        for (a, &p) in row.iter().enumerate() {
            let theta = map.angle_axis[a];
            let candidate = (p, theta.abs(), a);
            let better = match best {
                None => true,
                Some((bp, babs, bidx)) => {
                    p > bp
                        || (p == bp && candidate.1 < babs)
                        || (p == bp && candidate.1 == babs && a < bidx)
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    Ok(map.angle_axis[best.expect("map is nonempty").2])
}
