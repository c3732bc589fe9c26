//! Estimation and rate performance of receivers that demodulate the carrier
//! with `M >= 2` analog channels and quantize every channel with a 1-bit ADC.
//!
//! * [`specfun`] Gaussian tail, bivariate normal CDF, binary entropy.
//! * [`pilot`] periodic binary pilots and their band-limited waveforms.
//! * [`frontend`] demodulation geometry and snapshot means.
//! * [`fisher`] moment-based (pessimistic) Fisher information and quantization loss.
//! * [`capacity`] arcsine-law rate lower bound and the two-channel capacity.
//! * [`mc_oracle`] Monte-Carlo and quadrature ground truth.
//! * [`sweep`] deterministic parameter sweeps feeding the CLI.
//! * [`validate`] Monte-Carlo gates and the validation report.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capacity;
pub mod error;
pub mod fisher;
pub mod frontend;
pub mod linalg;
pub mod mc_oracle;
pub mod pilot;
pub mod specfun;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
