//! Maximal-length sequences from Fibonacci LFSRs.
//!
//! An order-n register with a primitive feedback polynomial walks through
//! all 2^n - 1 nonzero states, giving the classic two-valued periodic
//! autocorrelation (N at zero lag, -1 elsewhere) that makes these sequences
//! good sync preambles and channel probes. Maximality is verified at
//! generation time by running the register one full period, so a
//! non-primitive polynomial is rejected instead of silently producing a
//! short cycle.

use crate::error::{Error, Result};

/// Highest register order accepted; the maximality check runs one full
/// period, which stays cheap up to this size.
pub const MAX_DEGREE: u32 = 24;

/// LFSR description: feedback polynomial exponents and a nonzero seed state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MSequenceSpec {
    /// Register order `n`; period is `2^n - 1`.
    pub degree: u32,
    /// Exponents of the feedback polynomial, excluding the constant term.
    /// Must include `degree` itself.
    pub taps: Vec<u32>,
    /// Initial register contents, nonzero, below `2^degree`.
    pub initial_state: u64,
}

impl MSequenceSpec {
    pub fn new(degree: u32, taps: Vec<u32>, initial_state: u64) -> Result<Self> {
        if degree < 2 || degree > MAX_DEGREE {
            return Err(Error::invalid(format!("degree must lie in [2, {MAX_DEGREE}], got {degree}")));
        }
        if initial_state == 0 {
            return Err(Error::invalid("initial_state must be nonzero"));
        }
        if initial_state >> degree != 0 {
            return Err(Error::invalid(format!(
                "initial_state {initial_state:#x} does not fit in {degree} bits"
            )));
        }
        if !taps.contains(&degree) {
            return Err(Error::invalid(format!("taps must include the degree {degree}")));
        }
        if taps.iter().any(|&t| t == 0 || t > degree) {
            return Err(Error::invalid("taps must be exponents in [1, degree]"));
        }
        Ok(Self { degree, taps, initial_state })
    }

    /// Default primitive polynomial for a handful of common orders:
    /// 3 (x^3+x+1), 7 (x^7+x^3+1), 8 (x^8+x^6+x^5+x^4+1), 9 (x^9+x^5+1),
    /// 10 (x^10+x^3+1), 11 (x^11+x^2+1), 12 (x^12+x^6+x^4+x+1).
    pub fn for_degree(degree: u32) -> Result<Self> {
        let taps: Vec<u32> = match degree {
            3 => vec![3, 1],
            7 => vec![7, 3],
            8 => vec![8, 6, 5, 4],
            9 => vec![9, 5],
            10 => vec![10, 3],
            11 => vec![11, 2],
            12 => vec![12, 6, 4, 1],
            _ => {
                return Err(Error::invalid(format!(
                    "no default polynomial for degree {degree}; supply taps explicitly"
                )))
            }
        };
        Self::new(degree, taps, 1)
    }

    /// Sequence period `2^degree - 1`.
    pub fn period(&self) -> usize {
        (1usize << self.degree) - 1
    }

    fn feedback_mask(&self) -> u64 {
        self.taps.iter().fold(0u64, |m, &t| m | (1u64 << (t - 1)))
    }
}

/// Generates one period of the sequence as +/-1 chips (bit 0 maps to +1).
///
/// Fails with [`Error::InvalidPolynomial`] if the register revisits its seed
/// state before a full period, which happens exactly when the feedback
/// polynomial is not primitive.
pub fn generate_mseq(spec: &MSequenceSpec) -> Result<Vec<f64>> {
    let period = spec.period();
    let mask = (1u64 << spec.degree) - 1;
    let fb_mask = spec.feedback_mask();
    let mut state = spec.initial_state;
    let mut chips = Vec::with_capacity(period);
    for step in 0..period {
        let out = (state >> (spec.degree - 1)) & 1;
        chips.push(1.0 - 2.0 * out as f64);
        let fb = ((state & fb_mask).count_ones() & 1) as u64;
        state = ((state << 1) | fb) & mask;
        if state == spec.initial_state && step + 1 != period {
            return Err(Error::InvalidPolynomial(format!(
                "taps {:?} cycle after {} steps, expected {}",
                spec.taps,
                step + 1,
                period
            )));
        }
    }
    if state != spec.initial_state {
        return Err(Error::InvalidPolynomial(format!(
            "taps {:?} do not return to the seed state after one period",
            spec.taps
        )));
    }
    Ok(chips)
}

/// Periodic autocorrelation at integer `lag`, unnormalized.
pub fn periodic_autocorrelation(chips: &[f64], lag: usize) -> f64 {
    let n = chips.len();
    (0..n).map(|i| chips[i] * chips[(i + lag) % n]).sum()
}
