//! Simulation library for angle-based transmit beamforming over
//! single-carrier underwater acoustic downlinks.
//!
//! The crate is organized as a transmit/channel/receive chain:
//!
//! - [`dsp`]: complex baseband signals, raised-cosine pulses, m-sequences,
//!   transforms, interpolation, and noise.
//! - [`beam`]: frequency-domain beam weight design for a uniform linear
//!   array, time-filter synthesis, transmit application, and pattern
//!   evaluation.
//! - [`channel`]: time-varying multipath propagation with per-element
//!   geometric delays, per-path Doppler drift laws, and additive noise.
//! - [`receiver`]: synchronization, resampling, Doppler compensation, and a
//!   fractionally-spaced decision-feedback equalizer with a second-order
//!   phase-locked loop.
//! - [`angle`]: probe-based element channel estimation and delay-angle maps
//!   for steering-angle selection.
//! - [`harness`]: experiment configuration, single-link and Monte Carlo
//!   drivers, the two-user null-steering scenario, and result emission.
//!
//! All operations are deterministic given explicit seeds.

pub mod angle;
pub mod beam;
pub mod channel;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod receiver;

pub use error::{Error, Result};
