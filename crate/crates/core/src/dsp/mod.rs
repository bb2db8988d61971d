//! Baseband DSP primitives shared by the transmit chain, channel, and
//! receiver: the complex baseband signal container, raised-cosine pulse
//! shaping, maximal-length sequences, DFT helpers, interpolators, and
//! seeded noise injection.

pub mod mseq;
pub mod pulse;
pub mod signal;
pub mod transform;

pub use mseq::{generate_mseq, MSequenceSpec};
pub use pulse::{pulse_shape, raised_cosine_taps, PulseSpec};
pub use signal::{ComplexBasebandSignal, SincInterpolator};
pub use transform::{dft, idft};
