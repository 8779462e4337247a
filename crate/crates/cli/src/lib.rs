//! Library side of the `semzsl` binary: run configuration, the
//! train/eval pipeline, and exit-code mapping.

pub mod config;
pub mod run;

pub use config::{ConfigError, Method, RunConfig};

use semzsl_core::ErrorKind;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA_FORMAT: i32 = 3;
pub const EXIT_TRANSPORT: i32 = 4;
pub const EXIT_OTHER: i32 = 1;

/// Process exit code for an error, from the first classifiable cause.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<semzsl_core::Error>() {
            return match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::DataFormat => EXIT_DATA_FORMAT,
                ErrorKind::Transport => EXIT_TRANSPORT,
            };
        }
    }
    EXIT_OTHER
}
