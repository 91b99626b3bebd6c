//! Files, configuration and the command line around [`gangtrack_core`].
//!
//! The `gangtrack` binary exposes [`commands`]; everything it reads or
//! writes is defined in [`io`], [`config`] and [`snapshot`].

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod scenario;
pub mod snapshot;
pub mod svg;

pub use error::CliError;
