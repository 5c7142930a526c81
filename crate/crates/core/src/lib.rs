//! Baseband OFDM simulation toolkit: a modem built on a 1/N-forward
//! transform pair, channel impairments (multipath, CFO, phase noise, AWGN),
//! analysis (ICI prediction, PAPR statistics, PSD, BER/EVM) and a
//! reproducible Monte-Carlo experiment harness.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod harness;
pub mod modem;
pub mod numerics;

pub use error::{Result, SimError};
pub use numerics::{ComplexSample, RngStream, Spectrum, TimeSignal};
