//! Link-level building blocks for adaptive multi-band faster-than-Nyquist
//! non-orthogonal FDM over a low-pass intensity-modulation/direct-detection
//! channel.
//!
//! Each sub-band squeezes `n` QAM symbols onto `m <= n` subcarriers with a
//! row-truncated orthogonal circulant transform. The coefficients of all
//! bands share one real-valued OFDM modulator. The receiver equalises per
//! bin, undoes the precoding and resolves the resulting inter-carrier
//! interference with a breadth-first sequence search per band.

pub mod channel;
pub mod constellation;
pub mod error;
pub mod link;
pub mod modem;
pub mod planner;
pub mod precoder;
pub mod receiver;

pub use error::{Error, Result};
