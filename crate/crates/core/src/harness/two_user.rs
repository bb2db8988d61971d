//! Simultaneous downlinks to two users on null-steered beams, with
//! asynchronous frames and opposite platform motions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::beam::{apply_transmit_beamforming, design_null_steering, design_single_beam};
use crate::beam::{synthesize_time_filters, ArrayGeometry};
use crate::channel::{propagate, ChannelSpec, DriftLaw, PathSpec, SnrReference};
use crate::dsp::{generate_mseq, ComplexBasebandSignal, MSequenceSpec, PulseSpec};
use crate::error::{Error, Result};
use crate::harness::link::frame_symbols;
use crate::harness::{compute_frame_mse, FrameMetrics, Profile, MSE_FLOOR_DB};
use crate::receiver::{
    bit_errors, dfe_run, doppler_compensate, synchronize, Constellation, DfeRun, EqualizerConfig,
    SymbolTiming, SyncConfig,
};

/// Two-user scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoUserConfig {
    pub profile: Profile,
    pub pulse: PulseSpec,
    /// Shared equalizer shape; the constellation is set per user.
    pub equalizer: EqualizerConfig,
    /// Beam transform length.
    pub beam_l: usize,
    /// User angles in radians; must be distinct.
    pub angles_rad: [f64; 2],
    /// Transmit-referenced interference ratio: user 2's stream is scaled by
    /// `10^(-sir_db / 20)` relative to user 1's.
    pub sir_db: f64,
    /// Per-user receiver SNR in dB relative to that user's intended signal.
    pub snr_db: f64,
    /// Path-delay drift slopes, one per user; opposite signs model one user
    /// receding and the other approaching.
    pub drift_slopes: [f64; 2],
    /// Steer a null at the other user (versus plain single beams).
    pub use_nulls: bool,
    /// Symbols per frame including training, and the training length.
    pub n_d: usize,
    pub n_t: usize,
    /// Preamble degrees; the users need different sequences so neither
    /// receiver locks onto the other's frame.
    pub preamble_degrees: [u32; 2],
    pub seed: u64,
}

impl Default for TwoUserConfig {
    /// Desk-scale version of the published scenario: users at -8.7 and +8
    /// degrees, equal transmit powers, 30 dB SNR, and opposite drifts just
    /// off the coarse-search grid so a residual is left for each PLL.
    ///
    /// Twelve elements at 5 cm spacing put each user near the first sidelobe
    /// peak of the other's plain beam (about -13 dB), so the null-steering
    /// benefit is actually measurable; larger arrays already suppress a user
    /// this far out below their own noise floor.
    fn default() -> Self {
        let profile = Profile::Custom {
            fc: 12_500.0,
            fs: 1e7 / 256.0,
            r: 1e7 / 256.0 / 6.0,
            m: 12,
            delta: 0.05,
        };
        let p = profile.params().expect("valid profile");
        let t = p.samples_per_symbol as f64 / p.fs;
        // 26 grid steps of 2.5e-5 plus a third of a step
        let slope = 26.0 * 2.5e-5 + 2.5e-5 / 3.0;
        Self {
            profile,
            pulse: PulseSpec::new(0.25, t, 16, p.samples_per_symbol).expect("valid pulse"),
            equalizer: EqualizerConfig::new(
                20,
                20,
                crate::receiver::AdaptiveAlgorithm::rls(0.995),
                1e-4,
                Constellation::Bpsk,
            ),
            beam_l: 4096,
            angles_rad: [(-8.7f64).to_radians(), 8f64.to_radians()],
            sir_db: 0.0,
            snr_db: 30.0,
            drift_slopes: [slope, -slope],
            use_nulls: true,
            n_d: 1500,
            n_t: 160,
            preamble_degrees: [7, 8],
            seed: 21,
        }
    }
}

/// One user's outcome.
#[derive(Debug, Clone)]
pub struct UserRun {
    pub metrics: FrameMetrics,
    pub dfe: DfeRun,
    pub reference: Vec<Complex64>,
    /// Least-squares slope of the tracked phase over the payload, rad/s.
    pub pll_slope: f64,
    pub theta: f64,
    pub coarse_doppler: f64,
}

/// Both users' outcomes.
#[derive(Debug, Clone)]
pub struct TwoUserRun {
    pub users: [UserRun; 2],
}

// signals on one sample lattice, added with integer-sample alignment
fn aligned_sum(signals: &[ComplexBasebandSignal]) -> Result<ComplexBasebandSignal> {
    let fs = signals[0].sample_rate;
    let t0 = signals.iter().map(|s| s.t0).fold(f64::INFINITY, f64::min);
    let end = signals.iter().map(|s| s.end_time()).fold(f64::NEG_INFINITY, f64::max);
    let len = ((end - t0) * fs).round() as usize + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for s in signals {
        let shift = (s.t0 - t0) * fs;
        if (shift - shift.round()).abs() > 1e-6 {
            return Err(Error::invalid("signals do not share a sample lattice"));
        }
        let k0 = shift.round() as usize;
        for (o, v) in out[k0..k0 + s.len()].iter_mut().zip(&s.samples) {
            *o += v;
        }
    }
    ComplexBasebandSignal::new(out, fs, t0)
}

fn add_noise(v: &mut ComplexBasebandSignal, variance: f64, seed: u64) {
    if variance <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (variance / 2.0).sqrt();
    for s in v.samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex64::new(sigma * re, sigma * im);
    }
}

fn phase_slope(phase: &[f64], from: usize, dt: f64) -> f64 {
    let n = phase.len().saturating_sub(from);
    if n < 2 {
        return 0.0;
    }
    let xs = || (0..n).map(|k| k as f64 * dt);
    let mean_x = xs().sum::<f64>() / n as f64;
    let mean_y = phase[from..].iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, &y) in xs().zip(&phase[from..]) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}

struct UserPlan {
    stream: Vec<Complex64>,
    reference: Vec<Complex64>,
    preamble: Vec<Complex64>,
    constellation: Constellation,
    channel: ChannelSpec,
    offset_s: f64,
    theta: f64,
}

/// Runs both downlinks at once: two beams, each carrying its own frame, both
/// heard by both users through their own single-path drifting channels.
///
/// User 1 carries BPSK and user 2 QPSK. User 2's frame starts a random
/// number of symbols plus a uniform fraction of a symbol later, so the links
/// are asynchronous; each receiver treats the other beam purely as
/// interference.
pub fn run_two_user(config: &TwoUserConfig) -> Result<TwoUserRun> {
    if config.angles_rad[0] == config.angles_rad[1] {
        return Err(Error::invalid("user angles must be distinct"));
    }
    if !config.sir_db.is_finite() {
        return Err(Error::invalid("sir_db must be finite"));
    }
    config.equalizer.validate()?;
    if config.n_d <= config.n_t || config.n_t < config.equalizer.nt {
        return Err(Error::invalid("need n_d > n_t >= equalizer training length"));
    }
    let params = config.profile.params()?;
    let pulse = &config.pulse;
    let t = pulse.symbol_period;
    let geometry = ArrayGeometry::new(params.elements, params.spacing, 1500.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let constellations = [Constellation::Bpsk, Constellation::Qpsk];
    let mut plans: Vec<UserPlan> = Vec::with_capacity(2);
    for u in 0..2 {
        let seq = generate_mseq(&MSequenceSpec::for_degree(config.preamble_degrees[u])?)?;
        let preamble: Vec<Complex64> = seq.iter().map(|&b| Complex64::new(b, 0.0)).collect();
        let reference =
            frame_symbols(config.n_d, constellations[u], config.seed ^ 0xa5a5, u as u64);
        let scale = if u == 1 { 10f64.powf(-config.sir_db / 20.0) } else { 1.0 };
        let mut stream = preamble.clone();
        stream.extend(reference.iter().map(|&s| s * scale));
        // user 2 starts a random whole-plus-fractional symbol count later
        let offset_s = if u == 1 {
            rng.gen_range(0..64) as f64 * t + rng.gen::<f64>() * t
        } else {
            0.0
        };
        let channel = ChannelSpec {
            geometry: geometry.clone(),
            fc: params.fc,
            paths: vec![PathSpec {
                gain: 1.0,
                delay_s: 0.9e-3 + u as f64 * 0.4e-3,
                angle_rad: config.angles_rad[u],
                drift: DriftLaw { slope: config.drift_slopes[u], ..Default::default() },
                angle_drift: 0.0,
            }],
            snr_db: f64::INFINITY,
            snr_reference: SnrReference::Received,
            seed: 0,
        };
        plans.push(UserPlan {
            stream,
            reference,
            preamble,
            constellation: constellations[u],
            channel,
            offset_s,
            theta: config.angles_rad[u],
        });
    }

    // one beam per user, optionally with a null at the other user
    let mut element_tx: Vec<Vec<ComplexBasebandSignal>> = Vec::with_capacity(2);
    for u in 0..2 {
        let other = 1 - u;
        let weights = if config.use_nulls {
            design_null_steering(
                &geometry,
                plans[u].theta,
                &[plans[other].theta],
                params.fc,
                params.fs,
                config.beam_l,
                params.samples_per_symbol,
                pulse.alpha_rc,
            )?
        } else {
            design_single_beam(
                &geometry,
                plans[u].theta,
                params.fc,
                params.fs,
                config.beam_l,
                params.samples_per_symbol,
                pulse.alpha_rc,
            )?
        };
        let filters = synthesize_time_filters(&weights)?;
        element_tx.push(apply_transmit_beamforming(&plans[u].stream, pulse, &filters)?);
    }

    let noise_seeds = [rng.gen::<u64>(), rng.gen::<u64>()];
    let mut users: Vec<UserRun> = Vec::with_capacity(2);
    for u in 0..2 {
        let plan = &plans[u];
        let other = 1 - u;
        // both beams reach user u through user u's channel; each frame's
        // start offset rides on the path delay
        let shifted = |off: f64| -> ChannelSpec {
            let mut c = plan.channel.clone();
            for p in c.paths.iter_mut() {
                p.delay_s += off;
            }
            c
        };
        let intended = propagate(&element_tx[u], &shifted(plan.offset_s), 0.0)?;
        let interference =
            propagate(&element_tx[other], &shifted(plans[other].offset_s), 0.0)?;
        let power = intended.mean_power();
        let mut rx = aligned_sum(&[intended, interference])?;
        add_noise(&mut rx, power / 10f64.powf(config.snr_db / 10.0), noise_seeds[u]);

        let sync_config = SyncConfig::default();
        let sync = synchronize(&rx, &plan.preamble, pulse, params.fc, &sync_config)?;
        // conservative resampling: the short-preamble stretch estimate can
        // scatter a couple of grid points either way, so step it two points
        // toward zero; the leftover compression then keeps the motion's
        // sign and the phase loop's slope shows which way the user moves
        let a_hat = {
            let raw = sync.coarse_doppler;
            let back = 2.0 * sync_config.doppler_step;
            if raw.abs() <= back {
                0.0
            } else {
                raw - raw.signum() * back
            }
        };
        let mut v = doppler_compensate(&rx, a_hat, params.fc)?;
        let t_pre0 = rx.sample_time(sync.frame_start) + pulse.span_symbols as f64 * t;
        v.t0 -= t_pre0 * (1.0 - a_hat) + plan.preamble.len() as f64 * t;

        let mut eq = config.equalizer.clone();
        eq.nt = config.n_t;
        eq.constellation = plan.constellation;
        let timing = SymbolTiming { symbol_period: t, fc: params.fc };
        let outcome =
            dfe_run(&v, &eq, &timing, &plan.reference[..config.n_t], config.n_d - config.n_t);
        let (dfe, completed) = match outcome {
            Ok(run) => (run, true),
            Err(Error::Divergence { partial, .. }) => (*partial, false),
            Err(e) => return Err(e),
        };
        let produced = dfe.soft.len().min(config.n_d);
        let mse_db = if completed {
            compute_frame_mse(&plan.reference, &dfe.soft, config.n_t)?
        } else {
            let mut acc = 0.0;
            for n in config.n_t..produced {
                acc += (plan.reference[n] - dfe.soft[n]).norm_sqr();
            }
            if produced > config.n_t {
                (10.0 * (acc / (produced - config.n_t) as f64).log10()).max(MSE_FLOOR_DB)
            } else {
                0.0
            }
        };
        let errs = bit_errors(
            &dfe.decisions[config.n_t.min(produced)..produced],
            &plan.reference[config.n_t.min(produced)..produced],
            plan.constellation,
        );
        let pll_slope = phase_slope(&dfe.phase, config.n_t, t);
        users.push(UserRun {
            metrics: FrameMetrics {
                mse_db,
                bit_errors: errs,
                symbols: config.n_d,
                converged: completed && mse_db.is_finite(),
            },
            dfe,
            reference: plan.reference.clone(),
            pll_slope,
            theta: plan.theta,
            coarse_doppler: a_hat,
        });
    }
    let user2 = users.pop().expect("two users");
    let user1 = users.pop().expect("two users");
    Ok(TwoUserRun { users: [user1, user2] })
}
