//! Experiment driver behind the `adafm` binary.

pub mod commands;
pub mod config;

pub use commands::run;
pub use config::{RawConfig, Settings};

/// Process exit code for a failed command.
pub fn exit_code(err: &adafm::Error) -> u8 {
    match err {
        adafm::Error::Divergence { .. } | adafm::Error::Boosting(_) => 3,
        _ => 2,
    }
}
