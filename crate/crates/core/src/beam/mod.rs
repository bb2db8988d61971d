//! Transmit beamforming for a uniform linear array.
//!
//! Weights are designed in the frequency domain: the occupied band of the
//! single-carrier signal is gridded into DFT bins, each in-band bin gets a
//! steering (or null-constrained) weight vector across elements, and an
//! inverse transform turns each element's weight column into a time-domain
//! filter that is convolved with the pulse-shaped waveform. Geometry enters
//! only through the incremental inter-element delay of a plane wave, so the
//! same machinery serves beam pattern evaluation and the angle estimator.

mod design;
mod filters;
mod pattern;

pub use design::{design_null_steering, design_single_beam};
pub use filters::{apply_transmit_beamforming, synthesize_time_filters};
pub use pattern::beam_pattern;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform linear transmit array.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    /// Number of elements `M`.
    pub elements: usize,
    /// Inter-element spacing in meters.
    pub spacing: f64,
    /// Sound speed in m/s.
    pub sound_speed: f64,
}

impl ArrayGeometry {
    pub fn new(elements: usize, spacing: f64, sound_speed: f64) -> Result<Self> {
        if elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::invalid(format!("sound_speed must be positive, got {sound_speed}")));
        }
        Ok(Self { elements, spacing, sound_speed })
    }
}

/// Steering direction with its derived inter-element delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringTarget {
    /// Beam angle in radians, broadside = 0.
    pub angle: f64,
    /// Incremental delay between adjacent elements in seconds.
    pub delay_step: f64,
}

impl SteeringTarget {
    pub fn new(geometry: &ArrayGeometry, angle: f64) -> Result<Self> {
        Ok(Self { angle, delay_step: incremental_delay(geometry, angle)? })
    }
}

/// Incremental plane-wave delay between adjacent elements for a beam at
/// `angle` radians: `spacing * sin(angle) / sound_speed`.
pub fn incremental_delay(geometry: &ArrayGeometry, angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {angle}")));
    }
    Ok(geometry.spacing * angle.sin() / geometry.sound_speed)
}

/// Steering vector `[1, e^{-j chi}, ..., e^{-j (M-1) chi}]`.
pub fn steering_vector(elements: usize, chi: f64) -> Vec<Complex64> {
    (0..elements).map(|m| Complex64::from_polar(1.0, -(m as f64) * chi)).collect()
}

/// Frequency-domain beam weights over an L-point bin grid.
///
/// `weights[l][m]` is the weight of element `m` at bin `l`; bins outside the
/// occupied band are exactly zero. The grid metadata is carried along so the
/// weights can be exported, re-imported, and turned into time filters
/// without re-deriving the design parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    /// Per-bin element weights, `L` rows of `M` entries.
    pub weights: Vec<Vec<Complex64>>,
    /// Sorted indices of the in-band bins.
    pub band_bins: Vec<usize>,
    /// Carrier frequency in Hz.
    pub fc: f64,
    /// Simulator sample rate in Hz.
    pub fs: f64,
    /// Transform length `L`.
    pub l: usize,
    /// Samples per symbol at the design rate.
    pub ns: usize,
    /// Pulse roll-off the band edge was computed from.
    pub alpha_rc: f64,
}

impl BeamWeights {
    /// Number of array elements.
    pub fn elements(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Acoustic frequency of bin `l`: positive image for `l <= L/2`, the
    /// negative image above.
    pub fn bin_frequency(&self, l: usize) -> f64 {
        let df = self.fs / self.l as f64;
        let offset = if l <= self.l / 2 { l as f64 } else { l as f64 - self.l as f64 };
        self.fc + offset * df
    }
}

/// Half-width of the occupied band in bins: `ceil(L (1 + alpha) / (2 Ns))`.
pub(crate) fn band_half_width(l: usize, alpha_rc: f64, ns: usize) -> usize {
    (l as f64 * (1.0 + alpha_rc) / (2.0 * ns as f64)).ceil() as usize
}

/// Indices `0..=half` and `L-half..L`, the two-sided occupied band.
pub(crate) fn band_bins(l: usize, half: usize) -> Vec<usize> {
    let mut bins: Vec<usize> = (0..=half).collect();
    bins.extend(l - half..l);
    bins.sort_unstable();
    bins
}

pub(crate) fn validate_grid(
    geometry: &ArrayGeometry,
    fc: f64,
    fs: f64,
    l: usize,
    ns: usize,
    alpha_rc: f64,
) -> Result<usize> {
    if !(fc.is_finite() && fc > 0.0) {
        return Err(Error::invalid(format!("fc must be positive, got {fc}")));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid(format!("fs must be positive, got {fs}")));
    }
    if ns < 2 {
        return Err(Error::invalid(format!("ns must be at least 2, got {ns}")));
    }
    if !(0.0..=1.0).contains(&alpha_rc) {
        return Err(Error::invalid(format!("alpha_rc must lie in [0, 1], got {alpha_rc}")));
    }
    if geometry.elements == 0 {
        return Err(Error::invalid("array needs at least one element"));
    }
    let half = band_half_width(l, alpha_rc, ns);
    let min_l = 2 * half + 2;
    if l % 2 != 0 || l < min_l {
        return Err(Error::invalid(format!(
            "transform length {l} must be even and at least {min_l} to hold the occupied band"
        )));
    }
    Ok(half)
}
