//! Fractionally-spaced decision-feedback equalization with joint adaptive
//! filtering and second-order phase tracking.
//!
//! Two half-symbol-spaced samples enter the feedforward register per symbol;
//! the register is derotated by the tracked carrier phase, combined with the
//! feedback register of past decisions, and the joint coefficient vector is
//! updated by RLS or LMS against the training symbol or the sliced decision.
//! The tracked phase also advances the sampling instants, so slow timing
//! drift that survives coarse resampling is absorbed through the carrier.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::ComplexBasebandSignal;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
// fail the frame loudly instead of streaming garbage decisions
const DIVERGENCE_ERROR_LIMIT: f64 = 10.0;
const DIVERGENCE_RUN_LENGTH: usize = 50;

/// Symbol alphabet of the payload and training sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Bpsk,
    /// Gray-labeled quadrature alphabet `(+-1 +- j) / sqrt(2)`.
    Qpsk,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> u32 {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
        }
    }

    /// Alphabet index of the nearest constellation point.
    pub fn symbol_index(&self, s: Complex64) -> u8 {
        match self {
            Constellation::Bpsk => u8::from(s.re < 0.0),
            Constellation::Qpsk => (u8::from(s.re < 0.0) << 1) | u8::from(s.im < 0.0),
        }
    }

    pub fn point(&self, index: u8) -> Complex64 {
        match self {
            Constellation::Bpsk => Complex64::new(1.0 - 2.0 * f64::from(index & 1), 0.0),
            Constellation::Qpsk => {
                let re = 1.0 - 2.0 * f64::from((index >> 1) & 1);
                let im = 1.0 - 2.0 * f64::from(index & 1);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    pub fn random_symbols<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Complex64> {
        let points = 1u8 << self.bits_per_symbol();
        (0..count).map(|_| self.point(rng.gen_range(0..points))).collect()
    }
}

/// Nearest constellation point; boundaries break toward the positive axes,
/// so an input of exactly 0 slices to `+1` (or `(+1+j)/sqrt(2)`).
pub fn decision(d_hat: Complex64, constellation: Constellation) -> Complex64 {
    constellation.point(constellation.symbol_index(d_hat))
}

/// Number of differing payload bits after slicing both sequences.
pub fn bit_errors(a: &[Complex64], b: &[Complex64], constellation: Constellation) -> usize {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            (constellation.symbol_index(x) ^ constellation.symbol_index(y)).count_ones() as usize
        })
        .sum()
}

/// Coefficient update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveAlgorithm {
    Rls {
        /// Forgetting factor in `(0, 1]`.
        lambda: f64,
        /// Inverse-correlation initialization scale.
        #[serde(default = "default_rls_kappa")]
        kappa: f64,
    },
    Lms {
        /// Step size.
        mu: f64,
    },
}

fn default_rls_kappa() -> f64 {
    100.0
}

impl AdaptiveAlgorithm {
    pub fn rls(lambda: f64) -> Self {
        Self::Rls { lambda, kappa: default_rls_kappa() }
    }

    pub fn lms(mu: f64) -> Self {
        Self::Lms { mu }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AdaptiveAlgorithm::Rls { lambda, kappa } => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return Err(Error::invalid(format!(
                        "forgetting factor must lie in (0, 1], got {lambda}"
                    )));
                }
                if !(kappa.is_finite() && kappa > 0.0) {
                    return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
                }
            }
            AdaptiveAlgorithm::Lms { mu } => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::invalid(format!("step size must be positive, got {mu}")));
                }
            }
        }
        Ok(())
    }
}

/// Adaptive linear combiner `d_hat = c' u` with an RLS or LMS update.
///
/// The RLS inverse-correlation matrix starts at `kappa * I`; if its update
/// loses positive-definiteness it is reinitialized and the event counted.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter {
    coefficients: Vec<Complex64>,
    algorithm: AdaptiveAlgorithm,
    // row-major Hermitian inverse-correlation matrix (RLS only)
    p: Vec<Complex64>,
    scratch: Vec<Complex64>,
    reinits: usize,
}

impl AdaptiveFilter {
    pub fn new(dim: usize, algorithm: AdaptiveAlgorithm) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("adaptive filter needs at least one coefficient"));
        }
        algorithm.validate()?;
        let mut filter = Self {
            coefficients: vec![Complex64::new(0.0, 0.0); dim],
            algorithm,
            p: Vec::new(),
            scratch: vec![Complex64::new(0.0, 0.0); dim],
            reinits: 0,
        };
        if matches!(algorithm, AdaptiveAlgorithm::Rls { .. }) {
            filter.p = vec![Complex64::new(0.0, 0.0); dim * dim];
            filter.reset_correlation();
        }
        Ok(filter)
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn set_coefficient(&mut self, index: usize, value: Complex64) {
        self.coefficients[index] = value;
    }

    /// Number of times the RLS correlation state had to be reinitialized.
    pub fn reinit_count(&self) -> usize {
        self.reinits
    }

    pub fn predict(&self, u: &[Complex64]) -> Complex64 {
        debug_assert_eq!(u.len(), self.dim());
        self.coefficients.iter().zip(u).map(|(c, x)| c.conj() * x).sum()
    }

    fn reset_correlation(&mut self) {
        let dim = self.dim();
        let AdaptiveAlgorithm::Rls { kappa, .. } = self.algorithm else {
            return;
        };
        self.p.fill(Complex64::new(0.0, 0.0));
        for i in 0..dim {
            self.p[i * dim + i] = Complex64::new(kappa, 0.0);
        }
    }

    /// One coefficient update against the a-priori error `e = d - c' u`.
    pub fn adapt(&mut self, u: &[Complex64], e: Complex64) {
        debug_assert_eq!(u.len(), self.dim());
        match self.algorithm {
            AdaptiveAlgorithm::Lms { mu } => {
                let scale = mu * e.conj();
                for (c, x) in self.coefficients.iter_mut().zip(u) {
                    *c += x * scale;
                }
            }
            AdaptiveAlgorithm::Rls { lambda, .. } => {
                let dim = self.dim();
                let mut denom = self.gain_denominator(u, lambda);
                if !(denom.is_finite() && denom > 0.0) {
                    self.reset_correlation();
                    self.reinits += 1;
                    denom = self.gain_denominator(u, lambda);
                }
                let inv_denom = 1.0 / denom;
                let e_scale = e.conj() * inv_denom;
                for (c, w) in self.coefficients.iter_mut().zip(&self.scratch) {
                    *c += w * e_scale;
                }
                let inv_lambda = 1.0 / lambda;
                for i in 0..dim {
                    let gi = self.scratch[i] * inv_denom;
                    let row = &mut self.p[i * dim..(i + 1) * dim];
                    for (pij, wj) in row.iter_mut().zip(&self.scratch) {
                        *pij = (*pij - gi * wj.conj()) * inv_lambda;
                    }
                }
                // re-impose Hermitian symmetry: rounding asymmetry compounds
                // under the 1/lambda amplification and eventually destroys
                // positive-definiteness on long frames
                for i in 0..dim {
                    let pii = self.p[i * dim + i];
                    self.p[i * dim + i] = Complex64::new(pii.re, 0.0);
                    for j in i + 1..dim {
                        let avg = 0.5 * (self.p[i * dim + j] + self.p[j * dim + i].conj());
                        self.p[i * dim + j] = avg;
                        self.p[j * dim + i] = avg.conj();
                    }
                }
            }
        }
    }

    // fills scratch with P u and returns lambda + u' P u
    fn gain_denominator(&mut self, u: &[Complex64], lambda: f64) -> f64 {
        let dim = self.dim();
        for i in 0..dim {
            let row = &self.p[i * dim..(i + 1) * dim];
            self.scratch[i] = row.iter().zip(u).map(|(p, x)| p * x).sum();
        }
        lambda + u.iter().zip(&self.scratch).map(|(x, w)| (x.conj() * w).re).sum::<f64>()
    }
}

/// Second-order phase tracker driven by a decision-directed cross-product
/// detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pll {
    pub phase: f64,
    integrator: f64,
    pub kf1: f64,
    pub kf2: f64,
}

impl Pll {
    pub fn new(kf1: f64, kf2: f64) -> Self {
        Self { phase: 0.0, integrator: 0.0, kf1, kf2 }
    }

    /// Advances the tracked phase; returns the detected phase error.
    /// Zero-magnitude inputs contribute zero error.
    pub fn update(&mut self, d_hat: Complex64, d_ref: Complex64) -> f64 {
        let denom = d_hat.norm() * d_ref.norm();
        let err = if denom > 1e-300 { (d_hat * d_ref.conj()).im / denom } else { 0.0 };
        self.integrator += err;
        self.phase += self.kf1 * err + self.kf2 * self.integrator;
        err
    }
}

/// Symbol clock and carrier of the frame being equalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolTiming {
    /// Symbol period `T` in seconds; symbol `n` is centered at `n * T` on
    /// the input signal's own time axis.
    pub symbol_period: f64,
    /// Carrier frequency, which converts tracked phase to a timing shift.
    pub fc: f64,
}

impl SymbolTiming {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_period.is_finite() && self.symbol_period > 0.0) {
            return Err(Error::invalid("symbol_period must be positive"));
        }
        if !(self.fc.is_finite() && self.fc > 0.0) {
            return Err(Error::invalid("fc must be positive"));
        }
        Ok(())
    }
}

/// Equalizer shape and adaptation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerConfig {
    /// Feedforward taps, spaced half a symbol apart.
    pub nf: usize,
    /// Feedback taps, spaced one symbol apart.
    pub nb: usize,
    /// Anticausal offset: the newest feedforward sample sits `n1` half
    /// symbols ahead of the symbol center.
    pub n1: i64,
    pub algorithm: AdaptiveAlgorithm,
    /// Phase-loop proportional constant.
    pub kf1: f64,
    /// Phase-loop integral constant.
    pub kf2: f64,
    /// Training symbols consumed before switching to decision direction.
    pub nt: usize,
    pub constellation: Constellation,
}

impl EqualizerConfig {
    /// Standard defaults: centered span (`n1 = nf / 2`), integral constant a
    /// tenth of the proportional one, training of four filter lengths.
    pub fn new(
        nf: usize,
        nb: usize,
        algorithm: AdaptiveAlgorithm,
        kf1: f64,
        constellation: Constellation,
    ) -> Self {
        Self {
            nf,
            nb,
            n1: (nf / 2) as i64,
            algorithm,
            kf1,
            kf2: kf1 / 10.0,
            nt: 4 * (nf + nb),
            constellation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nf < 2 {
            return Err(Error::invalid(format!(
                "need at least two feedforward taps (two samples shift in per symbol), got {}",
                self.nf
            )));
        }
        if !(self.kf1.is_finite() && self.kf1 >= 0.0) || !(self.kf2.is_finite() && self.kf2 >= 0.0)
        {
            return Err(Error::invalid("phase-loop constants must be finite and non-negative"));
        }
        self.algorithm.validate()
    }
}

/// Output of one equalized symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolStep {
    pub soft: Complex64,
    pub decision: Complex64,
    pub error: Complex64,
    /// Phase applied to this symbol (the tracker state before its update).
    pub phase_applied: f64,
}

/// Mutable per-frame equalizer state; one frame is processed strictly
/// sequentially.
#[derive(Debug, Clone)]
pub struct EqualizerState {
    config: EqualizerConfig,
    filter: AdaptiveFilter,
    feedforward: Vec<Complex64>,
    feedback: Vec<Complex64>,
    pll: Pll,
    joint_input: Vec<Complex64>,
}

impl EqualizerState {
    pub fn new(config: &EqualizerConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.nf + config.nb;
        let mut filter = AdaptiveFilter::new(dim, config.algorithm)?;
        // a unit tap on the sample nearest the symbol center starts the
        // filter as a plain sampler, so early decisions are usable
        let center = if (0..config.nf as i64).contains(&config.n1) {
            config.n1 as usize
        } else {
            config.nf / 2
        };
        filter.set_coefficient(center, Complex64::ONE);
        Ok(Self {
            config: config.clone(),
            filter,
            feedforward: vec![Complex64::new(0.0, 0.0); config.nf],
            feedback: vec![Complex64::new(0.0, 0.0); config.nb],
            pll: Pll::new(config.kf1, config.kf2),
            joint_input: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    /// Newest-first feedforward register.
    pub fn feedforward_input(&self) -> &[Complex64] {
        &self.feedforward
    }

    /// Joint coefficient vector: feedforward taps followed by the negated
    /// feedback taps.
    pub fn joint_coefficients(&self) -> &[Complex64] {
        self.filter.coefficients()
    }

    pub fn phase(&self) -> f64 {
        self.pll.phase
    }

    pub fn rls_reinits(&self) -> usize {
        self.filter.reinit_count()
    }

    /// Fills the feedforward register with the samples that precede symbol 0,
    /// so the input vector is consistent from the first step instead of
    /// warming up from zeros. Times before the start of `v` read as zero.
    ///
    /// Without priming, the first `nf/2` adaptation steps see a register that
    /// disagrees with the waveform, and with forgetting-factor adaptation
    /// that early transient biases the coefficients for hundreds of symbols.
    pub fn prime_feedforward(&mut self, v: &ComplexBasebandSignal, timing: &SymbolTiming) {
        let half = timing.symbol_period / 2.0;
        // the first step shifts the register by two before reading, so the
        // value destined for slot k is primed into slot k - 2
        for k in 0..self.config.nf {
            let t = (self.config.n1 - k as i64 - 2) as f64 * half;
            self.feedforward[k] =
                v.linear_interpolate(t).unwrap_or(Complex64::new(0.0, 0.0));
        }
    }

    /// Processes symbol `n`: samples the input, equalizes, slices, adapts the
    /// coefficients, then advances the phase tracker. `training` supplies the
    /// reference symbol while in training; `None` switches the reference (and
    /// the feedback register) to the sliced decision.
    pub fn step(
        &mut self,
        v: &ComplexBasebandSignal,
        n: usize,
        timing: &SymbolTiming,
        training: Option<Complex64>,
    ) -> Result<SymbolStep> {
        let t = timing.symbol_period;
        let half = t / 2.0;
        let phase_applied = self.pll.phase;
        let timing_shift = phase_applied / (TWO_PI * timing.fc);
        let base = n as f64 * t - timing_shift;
        let newest = sample_at(v, base + self.config.n1 as f64 * half)?;
        let second = sample_at(v, base + (self.config.n1 - 1) as f64 * half)?;
        let nf = self.config.nf;
        self.feedforward.copy_within(0..nf - 2, 2);
        self.feedforward[0] = newest;
        self.feedforward[1] = second;

        let derotate = Complex64::from_polar(1.0, -phase_applied);
        for (u, y) in self.joint_input.iter_mut().zip(&self.feedforward) {
            *u = y * derotate;
        }
        self.joint_input[nf..].copy_from_slice(&self.feedback);

        let soft = self.filter.predict(&self.joint_input);
        let decision = decision(soft, self.config.constellation);
        let reference = training.unwrap_or(decision);
        let error = reference - soft;
        self.filter.adapt(&self.joint_input, error);
        self.pll.update(soft, reference);

        if self.config.nb > 0 {
            self.feedback.copy_within(0..self.config.nb - 1, 1);
            self.feedback[0] = reference;
        }
        Ok(SymbolStep { soft, decision, error, phase_applied })
    }
}

fn sample_at(v: &ComplexBasebandSignal, t: f64) -> Result<Complex64> {
    v.linear_interpolate(t).map_err(|e| match e {
        Error::OutOfRange { t, start, .. } => {
            let idx = ((t - start) * v.sample_rate).ceil();
            let needed =
                if idx < 0.0 { v.len() + (-idx) as usize } else { idx as usize + 1 };
            Error::TruncatedFrame { needed, available: v.len() }
        }
        other => other,
    })
}

/// Per-frame equalizer traces.
#[derive(Debug, Clone, PartialEq)]
pub struct DfeRun {
    /// Equalized soft estimates, one per symbol.
    pub soft: Vec<Complex64>,
    /// Sliced decisions.
    pub decisions: Vec<Complex64>,
    /// Adaptation errors (reference minus soft estimate).
    pub errors: Vec<Complex64>,
    /// Phase applied at each symbol.
    pub phase: Vec<f64>,
    /// Symbols equalized in training mode before the switch.
    pub training_len: usize,
    /// RLS correlation reinitializations forced by numerical trouble.
    pub rls_reinits: usize,
}

/// Equalizes `config.nt` training symbols followed by `payload_len` payload
/// symbols of `v`.
///
/// Symbol `n` is assumed centered at `n * symbol_period` on `v`'s own time
/// axis; `v` must include enough lead-in and tail for the feedforward span.
/// A run of 50 consecutive errors above magnitude 10, or any non-finite
/// state, aborts with a divergence error carrying the partial traces.
pub fn dfe_run(
    v: &ComplexBasebandSignal,
    config: &EqualizerConfig,
    timing: &SymbolTiming,
    training: &[Complex64],
    payload_len: usize,
) -> Result<DfeRun> {
    timing.validate()?;
    if training.len() < config.nt {
        return Err(Error::invalid(format!(
            "{} training symbols supplied, {} required",
            training.len(),
            config.nt
        )));
    }
    let mut state = EqualizerState::new(config)?;
    state.prime_feedforward(v, timing);
    let total = config.nt + payload_len;
    let mut run = DfeRun {
        soft: Vec::with_capacity(total),
        decisions: Vec::with_capacity(total),
        errors: Vec::with_capacity(total),
        phase: Vec::with_capacity(total),
        training_len: config.nt,
        rls_reinits: 0,
    };
    let mut loud_errors = 0usize;
    for n in 0..total {
        let reference = if n < config.nt { Some(training[n]) } else { None };
        let step = state.step(v, n, timing, reference)?;
        run.soft.push(step.soft);
        run.decisions.push(step.decision);
        run.errors.push(step.error);
        run.phase.push(step.phase_applied);
        let finite = step.soft.is_finite() && step.error.is_finite() && state.phase().is_finite();
        if !finite {
            run.rls_reinits = state.rls_reinits();
            return Err(Error::Divergence { symbol: n, partial: Box::new(run) });
        }
        if step.error.norm() > DIVERGENCE_ERROR_LIMIT {
            loud_errors += 1;
            if loud_errors >= DIVERGENCE_RUN_LENGTH {
                run.rls_reinits = state.rls_reinits();
                return Err(Error::Divergence { symbol: n, partial: Box::new(run) });
            }
        } else {
            loud_errors = 0;
        }
    }
    run.rls_reinits = state.rls_reinits();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::ArrayGeometry;
    use crate::channel::{propagate, ChannelSpec, DriftLaw, PathSpec, SnrReference};
    use crate::dsp::{pulse_shape, PulseSpec};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 39_062.5;
    const T: f64 = 6.0 / FS;

    fn timing() -> SymbolTiming {
        SymbolTiming { symbol_period: T, fc: 12_500.0 }
    }

    fn bpsk_symbols(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Constellation::Bpsk.random_symbols(n, &mut rng)
    }

    fn shaped(symbols: &[Complex64]) -> ComplexBasebandSignal {
        let pulse = PulseSpec::new(0.25, T, 16, 6).unwrap();
        pulse_shape(symbols, &pulse).unwrap()
    }

    #[test]
    fn lms_scalar_recursion_by_hand() {
        let mut f = AdaptiveFilter::new(1, AdaptiveAlgorithm::lms(0.5)).unwrap();
        let u = [Complex64::ONE];
        for expected in [0.5, 0.75] {
            let e = Complex64::ONE - f.predict(&u);
            f.adapt(&u, e);
            assert_relative_eq!(f.coefficients()[0].re, expected);
            assert_relative_eq!(f.coefficients()[0].im, 0.0);
        }
    }

    #[test]
    fn rls_matches_regularized_batch_least_squares() {
        let dim = 3;
        let kappa = 100.0;
        let mut f = AdaptiveFilter::new(dim, AdaptiveAlgorithm::Rls { lambda: 1.0, kappa })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut obs: Vec<(Vec<Complex64>, Complex64)> = Vec::new();
        for _ in 0..60 {
            let u: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let d = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let e = d - f.predict(&u);
            f.adapt(&u, e);
            obs.push((u, d));
        }
        // closed-form solve of the same exponentially-unweighted problem,
        // including the initialization bias 1/kappa
        let mut r = DMatrix::<Complex64>::zeros(dim, dim);
        let mut rhs = DVector::<Complex64>::zeros(dim);
        for (u, d) in &obs {
            let uv = DVector::from_column_slice(u);
            r += &uv * uv.adjoint();
            rhs += uv * d.conj();
        }
        for i in 0..dim {
            r[(i, i)] += Complex64::new(1.0 / kappa, 0.0);
        }
        let c_batch = r.lu().solve(&rhs).expect("well-conditioned system");
        for i in 0..dim {
            assert!(
                (f.coefficients()[i] - c_batch[i]).norm() < 1e-9,
                "coefficient {i}: {} vs {}",
                f.coefficients()[i],
                c_batch[i]
            );
        }
        assert_eq!(f.reinit_count(), 0);
    }

    #[test]
    fn zero_error_leaves_coefficients_unchanged() {
        for algo in [AdaptiveAlgorithm::lms(0.3), AdaptiveAlgorithm::rls(0.99)] {
            let mut f = AdaptiveFilter::new(2, algo).unwrap();
            f.set_coefficient(0, Complex64::new(0.3, -0.1));
            f.set_coefficient(1, Complex64::new(-0.2, 0.5));
            let before = f.coefficients().to_vec();
            f.adapt(
                &[Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)],
                Complex64::new(0.0, 0.0),
            );
            assert_eq!(f.coefficients(), &before[..]);
        }
    }

    #[test]
    fn decision_examples() {
        assert_eq!(decision(Complex64::new(0.3, 0.0), Constellation::Bpsk), Complex64::ONE);
        assert_eq!(decision(Complex64::new(-2.0, 1.0), Constellation::Bpsk), -Complex64::ONE);
        // exact boundary slices positive
        assert_eq!(decision(Complex64::new(0.0, 0.0), Constellation::Bpsk), Complex64::ONE);
        let s = decision(Complex64::new(-0.2, 0.9), Constellation::Qpsk);
        let want = Complex64::new(-1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2;
        assert!((s - want).norm() < 1e-15);
        for idx in 0..4 {
            let p = Constellation::Qpsk.point(idx);
            assert_eq!(decision(p, Constellation::Qpsk), p);
            assert_eq!(Constellation::Qpsk.symbol_index(p), idx);
        }
    }

    #[test]
    fn gray_labels_differ_by_one_bit_between_neighbors() {
        // walk the QPSK points counterclockwise; adjacent labels differ in
        // exactly one bit
        let quadrant_order = [0u8, 2, 3, 1];
        for w in 0..4 {
            let a = quadrant_order[w];
            let b = quadrant_order[(w + 1) % 4];
            assert_eq!((a ^ b).count_ones(), 1);
        }
        let a = [Constellation::Qpsk.point(0), Constellation::Qpsk.point(3)];
        let b = [Constellation::Qpsk.point(1), Constellation::Qpsk.point(3)];
        assert_eq!(bit_errors(&a, &b, Constellation::Qpsk), 1);
    }

    #[test]
    fn pll_ignores_aligned_and_zero_inputs() {
        let mut pll = Pll::new(0.1, 0.01);
        pll.update(Complex64::new(0.7, 0.7), Complex64::new(1.0, 1.0));
        assert_eq!(pll.phase, 0.0);
        pll.update(Complex64::new(0.0, 0.0), Complex64::ONE);
        assert_eq!(pll.phase, 0.0);
    }

    #[test]
    fn pll_settles_on_phase_step() {
        let theta = std::f64::consts::PI / 8.0;
        let mut pll = Pll::new(0.1, 0.01);
        let mut landed = None;
        for n in 0..400 {
            let d_hat = Complex64::from_polar(1.0, theta - pll.phase);
            pll.update(d_hat, Complex64::ONE);
            if landed.is_none() && (pll.phase - theta).abs() < 0.01 {
                landed = Some(n);
            }
        }
        assert!((pll.phase - theta).abs() < 0.01, "final {}", pll.phase);
        assert!(landed.unwrap() < 200, "settled at {:?}", landed);
    }

    #[test]
    fn pll_ramps_on_frequency_offset_with_vanishing_error() {
        let omega = 0.01; // rad per symbol
        let mut pll = Pll::new(0.1, 0.01);
        let mut last_err = f64::NAN;
        for n in 0..2000 {
            let d_hat = Complex64::from_polar(1.0, omega * n as f64 - pll.phase);
            last_err = pll.update(d_hat, Complex64::ONE);
        }
        // type-2 loop: zero steady-state phase error under a frequency ramp
        assert!(last_err.abs() < 1e-4, "residual error {last_err}");
        assert_relative_eq!(pll.phase, omega * 1999.0, max_relative = 1e-2);
    }

    #[test]
    fn ideal_channel_error_collapses_after_training() {
        let symbols = bpsk_symbols(300, 9);
        let v = shaped(&symbols);
        let config = EqualizerConfig::new(
            8,
            4,
            AdaptiveAlgorithm::rls(0.995),
            1e-3,
            Constellation::Bpsk,
        );
        let run = dfe_run(&v, &config, &timing(), &symbols[..config.nt], 300 - config.nt)
            .unwrap();
        // with a primed register the unit-tap start is already the exact
        // solution, so the error sits at the numerical floor throughout
        for n in 0..300 {
            assert!(run.errors[n].norm() < 1e-6, "symbol {n}: |e| = {}", run.errors[n].norm());
        }
        assert_eq!(bit_errors(&run.decisions, &symbols, Constellation::Bpsk), 0);
    }

    fn three_path_reception(symbols: &[Complex64], snr_db: f64, seed: u64) -> ComplexBasebandSignal {
        let tx = vec![shaped(symbols)];
        let geometry = ArrayGeometry::new(1, 0.05, 1500.0).unwrap();
        let spec = ChannelSpec {
            geometry,
            fc: 12_500.0,
            paths: vec![
                PathSpec {
                    gain: 1.0,
                    delay_s: 0.0,
                    angle_rad: 0.0,
                    drift: DriftLaw::default(),
                    angle_drift: 0.0,
                },
                PathSpec {
                    gain: 0.5,
                    delay_s: 1.5 * T,
                    angle_rad: 0.0,
                    drift: DriftLaw::default(),
                    angle_drift: 0.0,
                },
                PathSpec {
                    gain: 0.3,
                    delay_s: 3.2 * T,
                    angle_rad: 0.0,
                    drift: DriftLaw::default(),
                    angle_drift: 0.0,
                },
            ],
            snr_db,
            snr_reference: SnrReference::Received,
            seed,
        };
        propagate(&tx, &spec, 0.0).unwrap()
    }

    #[test]
    fn three_path_static_channel_converges() {
        let n_total = 10_000;
        let symbols = bpsk_symbols(n_total, 17);
        let v = three_path_reception(&symbols, 20.0, 99);
        let config = EqualizerConfig::new(
            20,
            20,
            AdaptiveAlgorithm::rls(0.995),
            1e-3,
            Constellation::Bpsk,
        );
        let run = dfe_run(&v, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
            .unwrap();
        let post = &run.errors[config.nt..];
        let mse = post.iter().map(|e| e.norm_sqr()).sum::<f64>() / post.len() as f64;
        let mse_db = 10.0 * mse.log10();
        assert!(mse_db <= -10.0, "post-training MSE {mse_db:.2} dB");
        assert_eq!(
            bit_errors(&run.decisions[config.nt..], &symbols[config.nt..], Constellation::Bpsk),
            0
        );
        assert_eq!(run.rls_reinits, 0);
    }

    #[test]
    fn residual_doppler_drives_phase_ramp() {
        for a_res in [1e-5, 5e-5] {
            let n_total = 12_000;
            let symbols = bpsk_symbols(n_total, 23);
            let tx = vec![shaped(&symbols)];
            let geometry = ArrayGeometry::new(1, 0.05, 1500.0).unwrap();
            let spec = ChannelSpec {
                geometry,
                fc: 12_500.0,
                paths: vec![PathSpec {
                    gain: 1.0,
                    delay_s: 0.0,
                    angle_rad: 0.0,
                    drift: DriftLaw::linear(a_res),
                    angle_drift: 0.0,
                }],
                snr_db: f64::INFINITY,
                snr_reference: SnrReference::Received,
                seed: 0,
            };
            let v = propagate(&tx, &spec, 0.0).unwrap();
            // slow LMS keeps the taps from absorbing the carrier ramp
            let mut config = EqualizerConfig::new(
                12,
                4,
                AdaptiveAlgorithm::lms(1e-4),
                0.01,
                Constellation::Bpsk,
            );
            config.nt = n_total;
            let run = dfe_run(&v, &config, &timing(), &symbols, 0).unwrap();
            // least-squares slope over the settled second half
            let i0 = n_total / 2;
            let pts: Vec<(f64, f64)> = (i0..n_total)
                .map(|n| (n as f64 * T, run.phase[n]))
                .collect();
            let n = pts.len() as f64;
            let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            let want = -TWO_PI * 12_500.0 * a_res / (1.0 - a_res);
            assert_relative_eq!(slope, want, max_relative = 0.05);
        }
    }

    #[test]
    fn decisions_invariant_under_input_rotation() {
        let n_total = 2_000;
        let symbols = bpsk_symbols(n_total, 31);
        let v = three_path_reception(&symbols, f64::INFINITY, 0);
        let config = EqualizerConfig::new(
            8,
            4,
            AdaptiveAlgorithm::rls(0.995),
            0.05,
            Constellation::Bpsk,
        );
        let base = dfe_run(&v, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
            .unwrap();
        for theta in [std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0] {
            let rot = Complex64::from_polar(1.0, theta);
            let rotated = ComplexBasebandSignal::new(
                v.samples.iter().map(|s| s * rot).collect(),
                v.sample_rate,
                v.t0,
            )
            .unwrap();
            let run =
                dfe_run(&rotated, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
                    .unwrap();
            assert_eq!(
                run.decisions[config.nt..],
                base.decisions[config.nt..],
                "theta = {theta}"
            );
        }
    }

    #[test]
    fn shift_register_keeps_two_newest_then_previous() {
        let symbols = bpsk_symbols(60, 3);
        let v = shaped(&symbols);
        let config =
            EqualizerConfig::new(8, 2, AdaptiveAlgorithm::rls(0.999), 0.01, Constellation::Bpsk);
        let mut state = EqualizerState::new(&config).unwrap();
        let mut previous: Option<Vec<Complex64>> = None;
        for n in 0..40 {
            let phase_before = state.phase();
            state.step(&v, n, &timing(), Some(symbols[n])).unwrap();
            let y = state.feedforward_input().to_vec();
            let shift = phase_before / (TWO_PI * timing().fc);
            let newest = v
                .linear_interpolate(n as f64 * T + config.n1 as f64 * T / 2.0 - shift)
                .unwrap();
            let second = v
                .linear_interpolate(n as f64 * T + (config.n1 - 1) as f64 * T / 2.0 - shift)
                .unwrap();
            assert_eq!(y[0], newest);
            assert_eq!(y[1], second);
            if let Some(prev) = previous {
                assert_eq!(y[2..], prev[..config.nf - 2]);
            }
            previous = Some(y);
        }
    }

    #[test]
    fn error_reference_switches_exactly_at_training_end() {
        let n_total = 400;
        let symbols = bpsk_symbols(n_total, 77);
        let v = three_path_reception(&symbols, 15.0, 5);
        let config =
            EqualizerConfig::new(8, 4, AdaptiveAlgorithm::rls(0.995), 0.01, Constellation::Bpsk);
        let run = dfe_run(&v, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
            .unwrap();
        assert_eq!(run.training_len, config.nt);
        for n in 0..n_total {
            let reference = if n < config.nt { symbols[n] } else { run.decisions[n] };
            let expect = reference - run.soft[n];
            assert!((run.errors[n] - expect).norm() < 1e-15, "symbol {n}");
        }
    }

    #[test]
    fn rls_error_non_increasing_on_representable_channel() {
        // channel built directly on the half-symbol grid so a perfect
        // equalizer exists: feedforward picks the on-time sample, feedback
        // cancels the single postcursor
        let n_total = 200;
        let symbols = bpsk_symbols(n_total + 2, 55);
        let fs2 = 2.0 / T;
        let zero = Complex64::new(0.0, 0.0);
        // two lead-in zeros at -T and -T/2, then sample 2 + 2n sits at n T
        let mut samples = vec![zero; 2];
        for n in 0..n_total + 2 {
            let d = symbols[n];
            let d_prev = if n > 0 { symbols[n - 1] } else { zero };
            samples.push(d + 0.5 * d_prev);
            samples.push(0.3 * d - 0.2 * d_prev);
        }
        let v = ComplexBasebandSignal::new(samples, fs2, -T).unwrap();
        let mut config = EqualizerConfig::new(
            4,
            2,
            AdaptiveAlgorithm::Rls { lambda: 1.0, kappa: 1e6 },
            0.0,
            Constellation::Bpsk,
        );
        config.n1 = 0;
        config.nt = n_total;
        let run = dfe_run(&v, &config, &timing(), &symbols[..n_total], 0).unwrap();
        // growing-memory recursion: errors shrink until they reach the
        // numerical floor, and never climb back above it
        let floor = 1e-6;
        let start = config.nf + config.nb;
        for n in start..n_total - 1 {
            let (a, b) = (run.errors[n].norm(), run.errors[n + 1].norm());
            assert!(b <= (a + 1e-9).max(floor), "symbol {n}: {a} -> {b}");
        }
        assert!(run.errors[n_total - 1].norm() < floor);
    }

    #[test]
    fn divergence_guard_aborts_with_partial_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<Complex64> = (0..4000)
            .map(|_| Complex64::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)))
            .collect();
        let v = ComplexBasebandSignal::new(samples, FS, -0.05).unwrap();
        let config =
            EqualizerConfig::new(4, 2, AdaptiveAlgorithm::lms(10.0), 0.0, Constellation::Bpsk);
        let training = bpsk_symbols(config.nt, 2);
        match dfe_run(&v, &config, &timing(), &training, 100) {
            Err(Error::Divergence { symbol, partial }) => {
                assert_eq!(partial.errors.len(), symbol + 1);
                assert_eq!(partial.soft.len(), symbol + 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_input_reports_divergence() {
        let mut samples = vec![Complex64::ONE; 2000];
        samples[600] = Complex64::new(f64::NAN, 0.0);
        let v = ComplexBasebandSignal::new(samples, FS, -0.01).unwrap();
        let config =
            EqualizerConfig::new(4, 0, AdaptiveAlgorithm::lms(0.01), 0.0, Constellation::Bpsk);
        let training = bpsk_symbols(config.nt, 2);
        assert!(matches!(
            dfe_run(&v, &config, &timing(), &training, 400),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn short_input_reports_truncation() {
        let symbols = bpsk_symbols(500, 11);
        let v = shaped(&symbols[..40]);
        let config =
            EqualizerConfig::new(8, 4, AdaptiveAlgorithm::rls(0.995), 0.01, Constellation::Bpsk);
        assert!(matches!(
            dfe_run(&v, &config, &timing(), &symbols[..config.nt], 400),
            Err(Error::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn identical_inputs_produce_identical_traces() {
        let n_total = 600;
        let symbols = bpsk_symbols(n_total, 13);
        let v = three_path_reception(&symbols, 18.0, 44);
        let config =
            EqualizerConfig::new(12, 6, AdaptiveAlgorithm::rls(0.995), 1e-3, Constellation::Bpsk);
        let a = dfe_run(&v, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
            .unwrap();
        let b = dfe_run(&v, &config, &timing(), &symbols[..config.nt], n_total - config.nt)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut c = EqualizerConfig::new(1, 0, AdaptiveAlgorithm::lms(0.1), 0.0, Constellation::Bpsk);
        assert!(c.validate().is_err());
        c.nf = 4;
        assert!(c.validate().is_ok());
        c.algorithm = AdaptiveAlgorithm::rls(1.5);
        assert!(c.validate().is_err());
        c.algorithm = AdaptiveAlgorithm::lms(-0.5);
        assert!(c.validate().is_err());
        c.algorithm = AdaptiveAlgorithm::lms(0.1);
        c.kf1 = f64::NAN;
        assert!(c.validate().is_err());
    }
}
