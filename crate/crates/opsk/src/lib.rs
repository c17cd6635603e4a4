//! Simulator and analysis toolkit for Odor Perceptual Shift Keying (OPSK),
//! an odor-based molecular-communication modulation scheme.
//!
//! Bit groups are keyed onto perceptual classes of odors (pleasantness,
//! intensity, edibility on a 0–100 scale). Symbols are instantaneous odor
//! releases that propagate through a noisy advection–diffusion channel and
//! are absorbed by a passive cube receiver, filtered by greatest mass,
//! demodulated under processor noise, and threshold-decoded back to bits.
//!
//! The crate is organized around the link pipeline:
//!
//! - [`perceptual`]: perceptual vector space, thresholds, class codes,
//!   bit mapping, odor-set quality, odor-bank generation.
//! - [`channel`]: per-interval Gaussian flow sampling, flow-rate-to-noise
//!   ratio, closed-form plume concentration, drift accumulation.
//! - [`receiver`]: closed-form cube absorption, absorption-time
//!   optimization, greatest-mass filtering, demodulation, decoding,
//!   silence detection.
//! - [`adaptive`]: depletion-triggered symbol-set updates with
//!   silence-based signaling and receiver-side recovery.
//! - [`sim`]: end-to-end Monte-Carlo runs, SER/rate/mass-ratio sweeps,
//!   the exact type-2 error oracle, and the operation-time extension study.
//! - [`link`]: full adaptive link simulation (transmitter and receiver
//!   state machines wired through the channel).
//! - [`config`] / [`table`] / [`cli`]: key=value scenario files, CSV
//!   emission, and the command-line front end.
//!
//! See the crate examples for one runnable program per capability.

pub mod adaptive;
pub mod channel;
pub mod cli;
pub mod config;
pub mod link;
pub mod perceptual;
pub mod receiver;
pub mod sim;
pub mod table;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A scenario/config file could not be parsed.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    /// The absorption-time search could not bracket or refine a maximum.
    #[error("optimizer: {0}")]
    Optimizer(String),
    /// The transmitter's odor bank cannot supply a requested release.
    #[error("depleted: {0}")]
    Depleted(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Top of the perceptual scale; the domain is the half-open `[0, 100)`.
pub const SCALE: f64 = 100.0;

/// Largest representable perceptual value, one ulp below [`SCALE`].
///
/// The class mapping is defined for values strictly below 100, so 100 is
/// excluded everywhere and inputs of exactly 100 clamp here.
pub fn scale_top() -> f64 {
    f64::from_bits(SCALE.to_bits() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_top_is_just_below_100() {
        let top = scale_top();
        assert!(top < SCALE);
        assert_eq!(top.next_up(), SCALE);
    }
}
