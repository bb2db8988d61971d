//! Frequency-domain weight design.
//!
//! Both designs place a weight vector on every occupied bin and exact zeros
//! elsewhere. The single beam conjugate-steers each bin at its own acoustic
//! frequency, which keeps the beam pointed at the same physical angle across
//! the whole band instead of squinting with frequency. The null-steering
//! variant solves a per-bin minimum-norm problem with a unit response toward
//! the target and exact zeros toward the interferers, then rescales to unit
//! transmit power per bin; the rescale preserves a real, positive target
//! response so no extra phase convention is needed downstream.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{band_bins, steering_vector, validate_grid, ArrayGeometry, BeamWeights, SteeringTarget};
use crate::error::{Error, Result};

// relative Cholesky pivot below which a constraint system is declared
// rank deficient (steering directions aliasing at that bin frequency)
const SINGULAR_PIVOT_RATIO: f64 = 1e-7;

/// Response of weight vector `phi` toward `angle` at frequency `f`:
/// the coherent sum `sum_m phi[m] e^{-j 2 pi f m dtau(angle)}`.
pub(crate) fn array_response(
    geometry: &ArrayGeometry,
    phi: &[Complex64],
    angle: f64,
    f: f64,
) -> Complex64 {
    let dtau = geometry.spacing * angle.sin() / geometry.sound_speed;
    let chi = 2.0 * std::f64::consts::PI * f * dtau;
    phi.iter()
        .enumerate()
        .map(|(m, w)| w * Complex64::from_polar(1.0, -(m as f64) * chi))
        .sum()
}

fn empty_weights(
    geometry: &ArrayGeometry,
    fc: f64,
    fs: f64,
    l: usize,
    ns: usize,
    alpha_rc: f64,
) -> Result<BeamWeights> {
    let half = validate_grid(geometry, fc, fs, l, ns, alpha_rc)?;
    Ok(BeamWeights {
        weights: vec![vec![Complex64::new(0.0, 0.0); geometry.elements]; l],
        band_bins: band_bins(l, half),
        fc,
        fs,
        l,
        ns,
        alpha_rc,
    })
}

/// Single conjugate-steered beam toward `angle` radians.
///
/// Every in-band bin gets `(1 / sqrt(M)) conj(s_M(2 pi f_l dtau))`, unit
/// norm by construction, so total transmit power does not grow with the
/// element count; the coherent gain appears at the receiver instead.
pub fn design_single_beam(
    geometry: &ArrayGeometry,
    angle: f64,
    fc: f64,
    fs: f64,
    l: usize,
    ns: usize,
    alpha_rc: f64,
) -> Result<BeamWeights> {
    let target = SteeringTarget::new(geometry, angle)?;
    let mut w = empty_weights(geometry, fc, fs, l, ns, alpha_rc)?;
    let scale = 1.0 / (geometry.elements as f64).sqrt();
    for &bin in &w.band_bins.clone() {
        let f = w.bin_frequency(bin);
        let chi = 2.0 * std::f64::consts::PI * f * target.delay_step;
        let s = steering_vector(geometry.elements, chi);
        w.weights[bin] = s.iter().map(|v| v.conj() * scale).collect();
    }
    Ok(w)
}

/// Beam toward `target_angle` with exact response zeros toward each angle in
/// `null_angles`, all angles in radians.
///
/// Per bin, the minimum-norm weight satisfying the response constraints is
/// computed and rescaled to unit norm. Fails with a bin-specific error when
/// two constraint directions alias at that bin's frequency, and rejects
/// outright a target that coincides with a null or more constraints than
/// elements.
pub fn design_null_steering(
    geometry: &ArrayGeometry,
    target_angle: f64,
    null_angles: &[f64],
    fc: f64,
    fs: f64,
    l: usize,
    ns: usize,
    alpha_rc: f64,
) -> Result<BeamWeights> {
    if null_angles.is_empty() {
        return Err(Error::invalid("null steering needs at least one null angle"));
    }
    if 1 + null_angles.len() > geometry.elements {
        return Err(Error::invalid(format!(
            "{} constraints exceed {} array elements",
            1 + null_angles.len(),
            geometry.elements
        )));
    }
    for (i, &n) in null_angles.iter().enumerate() {
        if n == target_angle {
            return Err(Error::invalid(format!(
                "null angle {i} coincides with the target angle {target_angle} rad"
            )));
        }
        if null_angles[..i].contains(&n) {
            return Err(Error::invalid(format!("duplicate null angle {n} rad")));
        }
    }

    let target = SteeringTarget::new(geometry, target_angle)?;
    let nulls: Vec<SteeringTarget> = null_angles
        .iter()
        .map(|&a| SteeringTarget::new(geometry, a))
        .collect::<Result<_>>()?;
    let mut w = empty_weights(geometry, fc, fs, l, ns, alpha_rc)?;
    let m = geometry.elements;
    let k = 1 + nulls.len();

    for &bin in &w.band_bins.clone() {
        let f = w.bin_frequency(bin);
        // constraint columns: conjugated steering vectors, target first
        let mut c = DMatrix::<Complex64>::zeros(m, k);
        for (col, tgt) in std::iter::once(&target).chain(nulls.iter()).enumerate() {
            let chi = 2.0 * std::f64::consts::PI * f * tgt.delay_step;
            for (row, v) in steering_vector(m, chi).iter().enumerate() {
                c[(row, col)] = v.conj();
            }
        }
        let gram = c.adjoint() * &c;
        let chol = gram.cholesky().ok_or_else(|| Error::SingularDesign {
            bin,
            freq: f,
            detail: "constraint Gram matrix is not positive definite".into(),
        })?;
        let diag: Vec<f64> = (0..k).map(|i| chol.l_dirty()[(i, i)].re).collect();
        let max_pivot = diag.iter().cloned().fold(0.0, f64::max);
        let min_pivot = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_pivot > SINGULAR_PIVOT_RATIO * max_pivot) {
            return Err(Error::SingularDesign {
                bin,
                freq: f,
                detail: format!(
                    "steering directions alias (pivot ratio {:.2e})",
                    min_pivot / max_pivot
                ),
            });
        }
        let mut rhs = DVector::<Complex64>::zeros(k);
        rhs[0] = Complex64::new(1.0, 0.0);
        let x = chol.solve(&rhs);
        let phi = c * x;
        let norm = phi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::SingularDesign {
                bin,
                freq: f,
                detail: "minimum-norm solution collapsed to zero".into(),
            });
        }
        w.weights[bin] = phi.iter().map(|v| v / norm).collect();
    }
    Ok(w)
}
