//! Receive-side processing chain: frame synchronization, coarse Doppler
//! removal, and an adaptive fractionally-spaced decision-feedback equalizer
//! with an embedded second-order phase-locked loop.

mod dfe;
mod resample;
mod sync;

pub use dfe::{
    bit_errors, decision, dfe_run, AdaptiveAlgorithm, AdaptiveFilter, Constellation, DfeRun,
    EqualizerConfig, EqualizerState, Pll, SymbolStep, SymbolTiming,
};
pub use resample::{coarse_resample, doppler_compensate};
pub use sync::{synchronize, SyncConfig, SyncResult};
