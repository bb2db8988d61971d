//! End-to-end single-link runs: probe, beam design, framed transmission,
//! synchronization, equalization, and metric extraction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angle::{
    default_angle_grid, delay_angle_map, estimate_element_channels, principal_angle, DelayAngleMap,
};
use crate::beam::{apply_transmit_beamforming, design_single_beam, synthesize_time_filters};
use crate::channel::{propagate, propagate_uplink, ChannelSpec, DriftLaw};
use crate::dsp::{generate_mseq, pulse_shape, MSequenceSpec, PulseSpec};
use crate::error::{Error, Result};
use crate::harness::{compute_frame_mse, AngleSource, ExperimentConfig, FrameMetrics, MSE_FLOOR_DB};
use crate::receiver::{
    bit_errors, dfe_run, doppler_compensate, synchronize, Constellation, DfeRun, SymbolTiming,
    SyncConfig,
};

// decorrelates the probe's noise from the frame noise sharing one seed
const PROBE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
// spaces per-frame symbol and noise streams
const FRAME_SEED_STRIDE: u64 = 0x2545_f491_4f6c_dd1d;
// idle seconds inserted between consecutive frames
const INTERFRAME_GUARD_S: f64 = 0.1;

/// Everything produced by one link run: per-frame outcomes plus the last
/// frame's equalizer traces for inspection.
#[derive(Debug, Clone)]
pub struct SingleLinkRun {
    /// Aggregate over all frames (error power pooled before the dB floor).
    pub metrics: FrameMetrics,
    pub frame_metrics: Vec<FrameMetrics>,
    /// Equalizer traces of the final frame.
    pub dfe: DfeRun,
    /// Transmitted training plus payload symbols of the final frame.
    pub reference: Vec<Complex64>,
    /// Steering angle handed to the beam designer, radians.
    pub theta_used: f64,
    /// Strongest configured path's angle at measurement time, radians.
    pub theta_true: f64,
    pub sync_quality_db: f64,
    pub coarse_doppler: f64,
    /// Present when the angle came from the probe estimator.
    pub map: Option<DelayAngleMap>,
}

/// Training-plus-payload reference symbols for one frame.
pub(crate) fn frame_symbols(
    n_d: usize,
    constellation: Constellation,
    seed: u64,
    stream: u64,
) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let points = 1u8 << constellation.bits_per_symbol();
    (0..n_d).map(|_| constellation.point(rng.gen_range(0..points))).collect()
}

pub(crate) fn any_drift(spec: &ChannelSpec) -> bool {
    spec.paths.iter().any(|p| p.drift != DriftLaw::default())
}

/// Strongest path's angle, the oracle steering choice.
pub(crate) fn principal_path_angle(spec: &ChannelSpec) -> Result<f64> {
    spec.paths
        .iter()
        .max_by(|a, b| a.gain.abs().partial_cmp(&b.gain.abs()).expect("finite gains"))
        .map(|p| p.angle_rad)
        .ok_or_else(|| Error::invalid("channel has no propagation paths"))
}

pub(crate) struct AngleEstimate {
    pub theta: f64,
    pub map: Option<DelayAngleMap>,
}

/// Resolves the steering angle per the configured source; the probe runs as
/// an uplink through the same channel at `t = 0`.
pub(crate) fn resolve_angle(config: &ExperimentConfig) -> Result<AngleEstimate> {
    match config.beam.angle_source {
        AngleSource::Oracle => {
            Ok(AngleEstimate { theta: principal_path_angle(&config.channel)?, map: None })
        }
        AngleSource::Estimated => {
            let params = config.params()?;
            let degree = config.beam.probe_degree.unwrap_or(params.probe_degree);
            let seq = generate_mseq(&MSequenceSpec::for_degree(degree)?)?;
            let tiled: Vec<Complex64> = (0..seq.len() * config.beam.probe_periods)
                .map(|i| Complex64::new(seq[i % seq.len()], 0.0))
                .collect();
            let tx = pulse_shape(&tiled, &config.pulse)?;
            let mut spec = config.channel.clone();
            spec.seed ^= PROBE_SEED_SALT;
            let rx = propagate_uplink(&tx, &spec, 0.0)?;
            let est = estimate_element_channels(&rx, &seq, &config.pulse)?;
            let map = delay_angle_map(&est, &spec.geometry, spec.fc, &default_angle_grid())?;
            Ok(AngleEstimate { theta: principal_angle(&map)?, map: Some(map) })
        }
    }
}

/// Runs the uplink probe and returns the estimated steering angle together
/// with the delay-angle power map it came from, regardless of the configured
/// angle source.
pub fn probe_angle_map(config: &ExperimentConfig) -> Result<(f64, DelayAngleMap)> {
    let mut c = config.clone();
    c.beam.angle_source = AngleSource::Estimated;
    c.validate()?;
    let est = resolve_angle(&c)?;
    Ok((est.theta, est.map.expect("the probe estimator always produces a map")))
}

// one frame's pooled squared error and outcome
struct FrameOutcome {
    metrics: FrameMetrics,
    error_power: f64,
    counted: usize,
    dfe: DfeRun,
    reference: Vec<Complex64>,
    sync_quality_db: f64,
    coarse_doppler: f64,
}

fn run_frame(
    config: &ExperimentConfig,
    filters: &[Vec<Complex64>],
    preamble: &[Complex64],
    pulse: &PulseSpec,
    frame: usize,
) -> Result<FrameOutcome> {
    let n_d = config.protocol.n_d;
    let n_t = config.protocol.n_t;
    let fc = config.channel.fc;
    let t = pulse.symbol_period;

    let reference =
        frame_symbols(n_d, config.protocol.modulation, config.channel.seed, frame as u64);
    let mut stream = preamble.to_vec();
    stream.extend_from_slice(&reference);
    let tx = apply_transmit_beamforming(&stream, pulse, filters)?;

    let frame_len_s = stream.len() as f64 * t + INTERFRAME_GUARD_S;
    let t_start = config.protocol.feedback_delay_s + frame as f64 * frame_len_s;
    let mut spec = config.channel.clone();
    spec.seed = spec.seed.wrapping_add(FRAME_SEED_STRIDE.wrapping_mul(frame as u64));
    let rx = propagate(&tx, &spec, t_start)?;

    // skip the Doppler replica bank entirely on channels that cannot drift
    let sync_config = if any_drift(&spec) {
        SyncConfig::default()
    } else {
        SyncConfig { doppler_max: 0.0, ..SyncConfig::default() }
    };
    let sync = synchronize(&rx, preamble, pulse, fc, &sync_config)?;
    let mut v = doppler_compensate(&rx, sync.coarse_doppler, fc)?;

    // place payload symbol 0 at the equalizer's time origin: the replica's
    // first sample sits a pulse half-span before the first preamble symbol,
    // and resampling scales reception times by 1 - a
    let t_pre0 = rx.sample_time(sync.frame_start) + pulse.span_symbols as f64 * t;
    v.t0 -= t_pre0 * (1.0 - sync.coarse_doppler) + preamble.len() as f64 * t;

    let timing = SymbolTiming { symbol_period: t, fc };
    let outcome = dfe_run(&v, &config.equalizer, &timing, &reference[..n_t], n_d - n_t);
    let (dfe, completed) = match outcome {
        Ok(run) => (run, true),
        Err(Error::Divergence { partial, .. }) => (*partial, false),
        Err(e) => return Err(e),
    };

    let produced = dfe.soft.len().min(n_d);
    let mut error_power = 0.0f64;
    let mut counted = 0usize;
    for n in n_t..produced {
        error_power += (reference[n] - dfe.soft[n]).norm_sqr();
        counted += 1;
    }
    let mse_db = if completed {
        compute_frame_mse(&reference, &dfe.soft, n_t)?
    } else if counted > 0 {
        (10.0 * (error_power / counted as f64).log10()).max(MSE_FLOOR_DB)
    } else {
        0.0
    };
    let errs = bit_errors(
        &dfe.decisions[n_t.min(produced)..produced],
        &reference[n_t.min(produced)..produced],
        config.protocol.modulation,
    );
    Ok(FrameOutcome {
        metrics: FrameMetrics {
            mse_db,
            bit_errors: errs,
            symbols: n_d,
            converged: completed && mse_db.is_finite(),
        },
        error_power,
        counted,
        dfe,
        reference,
        sync_quality_db: sync.peak_quality_db,
        coarse_doppler: sync.coarse_doppler,
    })
}

/// Runs the full link once: angle measurement at `t = 0`, beam design, and
/// `frames` consecutive beamformed frames starting at `feedback_delay_s`
/// through the (possibly drifting) channel.
///
/// Equalizer divergence is recorded as `converged = false` with the partial
/// traces; every other failure propagates as an error.
pub fn run_single_link(config: &ExperimentConfig) -> Result<SingleLinkRun> {
    config.validate()?;
    let params = config.params()?;
    let pulse = &config.pulse;

    let theta_true = principal_path_angle(&config.channel)?;
    let estimate = resolve_angle(config)?;
    let weights = design_single_beam(
        &config.channel.geometry,
        estimate.theta,
        params.fc,
        params.fs,
        config.beam.l,
        params.samples_per_symbol,
        config.beam.alpha_rc,
    )?;
    let filters = synthesize_time_filters(&weights)?;

    let pre_seq = generate_mseq(&MSequenceSpec::for_degree(config.protocol.preamble_degree)?)?;
    let preamble: Vec<Complex64> =
        pre_seq.iter().map(|&b| Complex64::new(b, 0.0)).collect();

    let mut frame_metrics = Vec::with_capacity(config.protocol.frames);
    let mut pooled_power = 0.0f64;
    let mut pooled_count = 0usize;
    let mut last: Option<FrameOutcome> = None;
    for f in 0..config.protocol.frames {
        let outcome = run_frame(config, &filters, &preamble, pulse, f)?;
        frame_metrics.push(outcome.metrics);
        pooled_power += outcome.error_power;
        pooled_count += outcome.counted;
        last = Some(outcome);
    }
    let last = last.expect("at least one frame");

    let mse_db = if pooled_count == 0 {
        0.0
    } else if pooled_power <= 0.0 {
        MSE_FLOOR_DB
    } else {
        (10.0 * (pooled_power / pooled_count as f64).log10()).max(MSE_FLOOR_DB)
    };
    let metrics = FrameMetrics {
        mse_db,
        bit_errors: frame_metrics.iter().map(|m| m.bit_errors).sum(),
        symbols: frame_metrics.iter().map(|m| m.symbols).sum(),
        converged: frame_metrics.iter().all(|m| m.converged),
    };
    Ok(SingleLinkRun {
        metrics,
        frame_metrics,
        dfe: last.dfe,
        reference: last.reference,
        theta_used: estimate.theta,
        theta_true,
        sync_quality_db: last.sync_quality_db,
        coarse_doppler: last.coarse_doppler,
        map: estimate.map,
    })
}
