//! Raised-cosine pulse shaping.
//!
//! The shaping filter is the full raised cosine (not its square root), so a
//! single pulse already satisfies the Nyquist zero-crossing property at
//! symbol spacing and the matched channel model applies it once at the
//! transmitter. Taps are generated at the simulator rate, truncated at a
//! configurable number of symbol periods per side.

use num_complex::Complex64;

use crate::dsp::signal::{sinc, ComplexBasebandSignal};
use crate::error::{Error, Result};

/// Raised-cosine pulse description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// Roll-off factor in `[0, 1]`.
    pub alpha_rc: f64,
    /// Symbol period `T` in seconds.
    pub symbol_period: f64,
    /// Truncation half-width in symbol periods.
    pub span_symbols: usize,
    /// Samples per symbol period (at least 2).
    pub samples_per_symbol: usize,
}

impl PulseSpec {
    pub fn new(
        alpha_rc: f64,
        symbol_period: f64,
        span_symbols: usize,
        samples_per_symbol: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_rc) || alpha_rc.is_nan() {
            return Err(Error::invalid(format!("alpha_rc must lie in [0, 1], got {alpha_rc}")));
        }
        if !(symbol_period.is_finite() && symbol_period > 0.0) {
            return Err(Error::invalid(format!(
                "symbol_period must be finite and positive, got {symbol_period}"
            )));
        }
        if span_symbols == 0 {
            return Err(Error::invalid("span_symbols must be at least 1"));
        }
        if samples_per_symbol < 2 {
            return Err(Error::invalid(format!(
                "samples_per_symbol must be at least 2 (sub-Nyquist otherwise), got {samples_per_symbol}"
            )));
        }
        Ok(Self { alpha_rc, symbol_period, span_symbols, samples_per_symbol })
    }

    /// Re-checks the construction invariants, for values built by
    /// deserialization instead of [`PulseSpec::new`].
    pub fn validate(&self) -> Result<()> {
        Self::new(self.alpha_rc, self.symbol_period, self.span_symbols, self.samples_per_symbol)
            .map(|_| ())
    }

    /// Simulator sample rate `samples_per_symbol / T` in Hz.
    pub fn sample_rate(&self) -> f64 {
        self.samples_per_symbol as f64 / self.symbol_period
    }

    /// Number of taps produced by [`raised_cosine_taps`].
    pub fn tap_count(&self) -> usize {
        2 * self.span_symbols * self.samples_per_symbol + 1
    }
}

/// Raised-cosine value at normalized time `x = t / T`.
///
/// The removable singularity at `|x| = 1 / (2 alpha)` is evaluated through
/// its analytic limit `(pi / 4) sinc(1 / (2 alpha))`, and `alpha = 0`
/// degenerates to the plain sinc.
pub fn raised_cosine_value(x: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return sinc(x);
    }
    let two_ax = 2.0 * alpha * x;
    let den = 1.0 - two_ax * two_ax;
    if den.abs() < 1e-8 {
        return std::f64::consts::FRAC_PI_4 * sinc(1.0 / (2.0 * alpha));
    }
    sinc(x) * (std::f64::consts::PI * alpha * x).cos() / den
}

/// Symmetric raised-cosine taps at the simulator rate, peak 1 at the center.
pub fn raised_cosine_taps(spec: &PulseSpec) -> Vec<f64> {
    let ns = spec.samples_per_symbol as i64;
    let center = spec.span_symbols as i64 * ns;
    (0..=2 * center)
        .map(|n| raised_cosine_value((n - center) as f64 / ns as f64, spec.alpha_rc))
        .collect()
}

/// Superposes one pulse per symbol at symbol spacing.
///
/// The output starts `span_symbols * T` before the peak of symbol 0, so its
/// `t0` is negative and symbol `n` peaks at exactly `n * T`.
pub fn pulse_shape(symbols: &[Complex64], spec: &PulseSpec) -> Result<ComplexBasebandSignal> {
    if symbols.is_empty() {
        return Err(Error::invalid("pulse_shape requires at least one symbol"));
    }
    let taps = raised_cosine_taps(spec);
    let ns = spec.samples_per_symbol;
    let len = (symbols.len() - 1) * ns + taps.len();
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    for (n, d) in symbols.iter().enumerate() {
        if d.re == 0.0 && d.im == 0.0 {
            continue;
        }
        let base = n * ns;
        for (k, tap) in taps.iter().enumerate() {
            samples[base + k] += d * tap;
        }
    }
    ComplexBasebandSignal::new(
        samples,
        spec.sample_rate(),
        -(spec.span_symbols as f64) * spec.symbol_period,
    )
}
