//! Experiment orchestration: configuration, single-link runs, Monte Carlo
//! sweeps, the two-user null-steering scenario, and result emission.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, PathSpec, SnrReference};
use crate::dsp::PulseSpec;
use crate::error::{Error, Result};
use crate::receiver::{AdaptiveAlgorithm, Constellation, EqualizerConfig};

mod emit;
mod link;
mod monte_carlo;
mod two_user;

pub use emit::{emit_results, load_config, load_manifest, Manifest, RunArtifacts, ARTIFACT_VERSION};
pub use link::{probe_angle_map, run_single_link, SingleLinkRun};
pub use monte_carlo::{run_monte_carlo, CdfPoint, MonteCarloResult};
pub use two_user::{run_two_user, TwoUserConfig, TwoUserRun, UserRun};

/// Every reported MSE is clamped here; perfect detection would be `-inf`.
pub const MSE_FLOOR_DB: f64 = -60.0;

/// Named signal-parameter sets, or a fully custom one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Space,
    Mace,
    Custom { fc: f64, fs: f64, r: f64, m: usize, delta: f64 },
}

/// Signal parameters resolved from a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    /// Carrier frequency in Hz.
    pub fc: f64,
    /// Sample rate in Hz.
    pub fs: f64,
    /// Symbol rate in Hz.
    pub symbol_rate: f64,
    /// Transmit elements.
    pub elements: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Samples per symbol.
    pub samples_per_symbol: usize,
    /// Default channel-probe m-sequence degree.
    pub probe_degree: u32,
}

const BASE_FS: f64 = 1e7 / 256.0; // 39 062.5 Hz

impl Profile {
    pub fn params(&self) -> Result<ProfileParams> {
        match *self {
            Profile::Space => Ok(ProfileParams {
                fc: 12_500.0,
                fs: BASE_FS,
                symbol_rate: BASE_FS / 6.0,
                elements: 24,
                spacing: 0.05,
                samples_per_symbol: 6,
                probe_degree: 12,
            }),
            Profile::Mace => Ok(ProfileParams {
                fc: 13_000.0,
                fs: BASE_FS,
                symbol_rate: BASE_FS / 8.0,
                elements: 12,
                spacing: 0.12,
                samples_per_symbol: 8,
                probe_degree: 11,
            }),
            Profile::Custom { fc, fs, r, m, delta } => {
                if !(fc > 0.0 && fs > 0.0 && r > 0.0 && delta > 0.0) || m == 0 {
                    return Err(Error::invalid("custom profile parameters must be positive"));
                }
                let ns = (fs / r).round();
                if ns < 2.0 || (fs / r - ns).abs() > 1e-6 {
                    return Err(Error::invalid(format!(
                        "fs / r = {} is not an integer samples-per-symbol count",
                        fs / r
                    )));
                }
                Ok(ProfileParams {
                    fc,
                    fs,
                    symbol_rate: r,
                    elements: m,
                    spacing: delta,
                    samples_per_symbol: ns as usize,
                    probe_degree: 9,
                })
            }
        }
    }
}

/// Where the beam designer gets the steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSource {
    /// Read the strongest path's angle straight from the channel description.
    Oracle,
    /// Estimate it from an uplink probe through the same channel.
    Estimated,
}

/// Beam-design settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    /// Weight transform length (even).
    pub l: usize,
    /// Band roll-off used for bin selection; must match the pulse roll-off.
    pub alpha_rc: f64,
    pub angle_source: AngleSource,
    /// Probe m-sequence degree; defaults to the profile's value.
    #[serde(default)]
    pub probe_degree: Option<u32>,
    /// Probe periods transmitted; the estimator averages the steady interior.
    #[serde(default = "default_probe_periods")]
    pub probe_periods: usize,
}

fn default_probe_periods() -> usize {
    8
}

/// Frame and run-length settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Consecutive frames per run.
    #[serde(default = "default_frames")]
    pub frames: usize,
    /// Symbols per frame, training included.
    pub n_d: usize,
    /// Training symbols at the head of each frame.
    pub n_t: usize,
    /// Seconds between the angle measurement and the first beamformed frame.
    #[serde(default = "default_feedback_delay")]
    pub feedback_delay_s: f64,
    /// Monte Carlo realization count.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// Payload and training alphabet.
    #[serde(default = "default_modulation")]
    pub modulation: Constellation,
    /// Synchronization preamble m-sequence degree.
    #[serde(default = "default_preamble_degree")]
    pub preamble_degree: u32,
}

fn default_frames() -> usize {
    1
}
fn default_feedback_delay() -> f64 {
    3.0
}
fn default_realizations() -> usize {
    1000
}
fn default_modulation() -> Constellation {
    Constellation::Bpsk
}
fn default_preamble_degree() -> u32 {
    7
}

/// Per-realization perturbation ranges for Monte Carlo sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSpec {
    /// Per-path gain perturbation, uniform in `+-` this many dB.
    #[serde(default)]
    pub gain_jitter_db: f64,
    /// Per-path delay perturbation, uniform in `+-` this many seconds.
    #[serde(default)]
    pub delay_jitter_s: f64,
    /// Per-path drift-slope perturbation, uniform in `+-` this range.
    #[serde(default)]
    pub slope_jitter: f64,
    /// Draw each path's sinusoidal-drift phase uniformly per realization.
    #[serde(default)]
    pub random_drift_phase: bool,
}

/// Complete experiment description; the JSON config file mirrors these
/// field names exactly and rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub pulse: PulseSpec,
    pub channel: ChannelSpec,
    /// Optional Monte Carlo perturbation ranges.
    #[serde(default)]
    pub randomization: Option<RandomizationSpec>,
    pub equalizer: EqualizerConfig,
    pub beam: BeamConfig,
    pub protocol: ProtocolConfig,
}

impl ExperimentConfig {
    /// Defaults for the 24-element, 12.5 kHz profile: 6 samples per symbol,
    /// 20/20 equalizer taps, 160 training symbols, 40 950-symbol frames.
    pub fn space() -> Self {
        let p = Profile::Space.params().expect("fixed profile");
        Self::from_params(Profile::Space, &p, 20, 20, 1e-4, 40_950, 160)
    }

    /// Defaults for the 12-element, 13 kHz profile: 8 samples per symbol,
    /// 15/8 equalizer taps, 92 training symbols, 20 470-symbol frames.
    pub fn mace() -> Self {
        let p = Profile::Mace.params().expect("fixed profile");
        Self::from_params(Profile::Mace, &p, 15, 8, 1e-2, 20_470, 92)
    }

    fn from_params(
        profile: Profile,
        p: &ProfileParams,
        nf: usize,
        nb: usize,
        kf1: f64,
        n_d: usize,
        n_t: usize,
    ) -> Self {
        let t = p.samples_per_symbol as f64 / p.fs;
        let pulse = PulseSpec::new(0.25, t, 16, p.samples_per_symbol).expect("valid pulse");
        let geometry =
            crate::beam::ArrayGeometry::new(p.elements, p.spacing, 1500.0).expect("valid array");
        let channel = ChannelSpec {
            geometry,
            fc: p.fc,
            // a principal broadside-ish arrival plus two weaker echoes inside
            // the feedback span of the default equalizer
            paths: vec![
                PathSpec {
                    gain: 1.0,
                    delay_s: 0.0,
                    angle_rad: 0.0,
                    drift: Default::default(),
                    angle_drift: 0.0,
                },
                PathSpec {
                    gain: 0.45,
                    delay_s: 1.5e-3,
                    angle_rad: 5f64.to_radians(),
                    drift: Default::default(),
                    angle_drift: 0.0,
                },
                PathSpec {
                    gain: 0.3,
                    delay_s: 2.8e-3,
                    angle_rad: -7f64.to_radians(),
                    drift: Default::default(),
                    angle_drift: 0.0,
                },
            ],
            snr_db: 20.0,
            snr_reference: SnrReference::Received,
            seed: 7,
        };
        let mut equalizer = EqualizerConfig::new(
            nf,
            nb,
            AdaptiveAlgorithm::rls(0.995),
            kf1,
            Constellation::Bpsk,
        );
        equalizer.nt = n_t;
        Self {
            profile,
            pulse,
            channel,
            randomization: None,
            equalizer,
            beam: BeamConfig {
                l: 4096,
                alpha_rc: 0.25,
                angle_source: AngleSource::Oracle,
                probe_degree: None,
                probe_periods: default_probe_periods(),
            },
            protocol: ProtocolConfig {
                frames: 1,
                n_d,
                n_t,
                feedback_delay_s: 3.0,
                realizations: default_realizations(),
                modulation: Constellation::Bpsk,
                preamble_degree: default_preamble_degree(),
            },
        }
    }

    pub fn params(&self) -> Result<ProfileParams> {
        self.profile.params()
    }

    /// Checks internal consistency, including that a named profile's fixed
    /// signal parameters are actually the ones configured.
    pub fn validate(&self) -> Result<()> {
        let p = self.profile.params()?;
        self.pulse.validate()?;
        self.channel.validate()?;
        self.equalizer.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if !close(self.channel.fc, p.fc) {
            return Err(Error::Config(format!(
                "channel fc {} does not match the profile's {}",
                self.channel.fc, p.fc
            )));
        }
        if self.channel.geometry.elements != p.elements {
            return Err(Error::Config(format!(
                "array has {} elements but the profile fixes {}",
                self.channel.geometry.elements, p.elements
            )));
        }
        if !close(self.channel.geometry.spacing, p.spacing) {
            return Err(Error::Config(format!(
                "element spacing {} does not match the profile's {}",
                self.channel.geometry.spacing, p.spacing
            )));
        }
        if self.pulse.samples_per_symbol != p.samples_per_symbol {
            return Err(Error::Config(format!(
                "pulse has {} samples per symbol but the profile fixes {}",
                self.pulse.samples_per_symbol, p.samples_per_symbol
            )));
        }
        if !close(self.pulse.sample_rate(), p.fs) {
            return Err(Error::Config(format!(
                "pulse sample rate {} does not match the profile's {}",
                self.pulse.sample_rate(),
                p.fs
            )));
        }
        if self.beam.alpha_rc != self.pulse.alpha_rc {
            return Err(Error::Config(format!(
                "beam band roll-off {} must match the pulse roll-off {}",
                self.beam.alpha_rc, self.pulse.alpha_rc
            )));
        }
        if self.protocol.n_t != self.equalizer.nt {
            return Err(Error::Config(format!(
                "protocol n_t {} and equalizer training length {} disagree",
                self.protocol.n_t, self.equalizer.nt
            )));
        }
        if self.protocol.n_d <= self.protocol.n_t {
            return Err(Error::Config(format!(
                "frame length n_d {} must exceed training length n_t {}",
                self.protocol.n_d, self.protocol.n_t
            )));
        }
        if self.protocol.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.protocol.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if !(self.protocol.feedback_delay_s.is_finite() && self.protocol.feedback_delay_s >= 0.0) {
            return Err(Error::Config("feedback_delay_s must be finite and nonnegative".into()));
        }
        if !(1..=16).contains(&self.protocol.preamble_degree)
            || !(1..=16).contains(&self.beam.probe_degree.unwrap_or(p.probe_degree))
        {
            return Err(Error::Config("sequence degrees must lie in 1..=16".into()));
        }
        Ok(())
    }
}

/// Per-frame outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    /// Post-training symbol-estimation error in dB, floored at -60.
    pub mse_db: f64,
    /// Payload bit errors after training.
    pub bit_errors: usize,
    /// Symbols carried by the frame, training included.
    pub symbols: usize,
    /// False when the equalizer diverged before the frame end.
    pub converged: bool,
}

/// Mean squared soft-estimation error over the post-training symbols,
/// `mean(|d[n] - d_hat[n]|^2)` for `n >= nt`, in dB and floored at -60 dB.
pub fn compute_frame_mse(d: &[Complex64], d_hat: &[Complex64], nt: usize) -> Result<f64> {
    if d.len() != d_hat.len() {
        return Err(Error::invalid(format!(
            "symbol and estimate lengths differ: {} vs {}",
            d.len(),
            d_hat.len()
        )));
    }
    if d.len() <= nt {
        return Err(Error::invalid(format!(
            "frame of {} symbols leaves nothing after {nt} training symbols",
            d.len()
        )));
    }
    let mut acc = 0.0f64;
    for n in nt..d.len() {
        acc += (d[n] - d_hat[n]).norm_sqr();
    }
    let mse = acc / (d.len() - nt) as f64;
    if mse <= 0.0 {
        return Ok(MSE_FLOOR_DB);
    }
    Ok((10.0 * mse.log10()).max(MSE_FLOOR_DB))
}
