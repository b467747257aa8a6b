//! Commands behind the `prefdesign` binary. Each returns `anyhow::Result`;
//! [`exit_code`] maps a failure to the process exit status.

pub mod dataset;
pub mod plot;
pub mod runner;
mod svg;

use std::fmt;

use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "PREFDESIGN_OUTPUT_ROOT";

/// A problem with the user's inputs rather than with the computation.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<prefdesign::Error>() {
            if matches!(e, prefdesign::Error::InvalidConfig(_) | prefdesign::Error::UnknownStrategy(_)) {
                return EXIT_CONFIG;
            }
        }
    }
    EXIT_RUNTIME
}

/// Machine-readable failure record printed on stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
    pub causes: Vec<String>,
}

impl ErrorRecord {
    pub fn from_error(err: &anyhow::Error) -> Self {
        let exit_code = exit_code(err);
        Self {
            error: if exit_code == EXIT_CONFIG { "config" } else { "runtime" },
            exit_code,
            message: err.to_string(),
            causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
        }
    }
}
