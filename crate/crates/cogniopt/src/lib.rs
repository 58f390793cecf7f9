//! Command-line front end, scenario files and verification oracles for
//! [`cogniopt_core`].

pub mod commands;
pub mod config;
mod error;
pub mod oracle;
pub mod output;

pub use error::{Error, Result};
