//! Joint optimization of transmit power and energy-detector threshold for a
//! secondary user sharing spectrum with a primary link.
//!
//! The crate is `no_std` (with `alloc`). Everything here is a pure function of
//! its inputs: detector characteristics ([`sensing`]), fading expectations
//! ([`channel`]), the ergodic objective and constraints ([`capacity`]) and the
//! dual-decomposition solver with the outer threshold search ([`optimizer`]).
//!
//! The `parallel` feature pulls in `std` and `rayon` and evaluates threshold
//! sweeps concurrently. Results do not depend on scheduling.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(missing_docs)]

extern crate alloc;

pub mod capacity;
pub mod channel;
mod error;
pub mod optimizer;
pub mod quadrature;
pub mod sensing;

pub use error::{Error, Result};

/// Converts a decibel value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}
