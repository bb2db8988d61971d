//! Far-field response evaluation of a weight design.

use super::{design::array_response, ArrayGeometry, BeamWeights};
use crate::error::{Error, Result};

/// Magnitude of the array response over `angle_grid` (radians) at acoustic
/// frequency `f`, using the weights of the in-band bin nearest `f`.
///
/// `f` must fall inside the occupied band (within half a bin of an in-band
/// bin center). A single steered beam peaks at `sqrt(M)` toward its design
/// angle; null-steered weights show exact zeros toward their null angles.
pub fn beam_pattern(
    w: &BeamWeights,
    geometry: &ArrayGeometry,
    angle_grid: &[f64],
    f: f64,
) -> Result<Vec<f64>> {
    if geometry.elements != w.elements() {
        return Err(Error::invalid(format!(
            "geometry has {} elements but weights carry {}",
            geometry.elements,
            w.elements()
        )));
    }
    if !f.is_finite() {
        return Err(Error::invalid(format!("frequency must be finite, got {f}")));
    }
    let df = w.fs / w.l as f64;
    let bin = w
        .band_bins
        .iter()
        .min_by(|a, b| {
            let da = (w.bin_frequency(**a) - f).abs();
            let db = (w.bin_frequency(**b) - f).abs();
            da.partial_cmp(&db).unwrap()
        })
        .copied()
        .ok_or_else(|| Error::invalid("weights carry no in-band bins"))?;
    if (w.bin_frequency(bin) - f).abs() > df / 2.0 + 1e-9 {
        return Err(Error::invalid(format!(
            "frequency {f} Hz outside the occupied band around {} Hz",
            w.fc
        )));
    }
    let phi = &w.weights[bin];
    angle_grid
        .iter()
        .map(|&angle| {
            if !angle.is_finite() {
                return Err(Error::invalid(format!("angle must be finite, got {angle}")));
            }
            Ok(array_response(geometry, phi, angle, f).norm())
        })
        .collect()
}
