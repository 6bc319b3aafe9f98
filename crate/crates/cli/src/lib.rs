//! Library side of the `cvt` binary: config resolution, the subcommand
//! implementations, the run manifest, and the bundled synthetic-task
//! generator (shared with the test suites).

pub mod appconfig;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod toygen;

pub use appconfig::{resolve, AppConfig};
pub use error::CliError;
pub use manifest::{sha256_file, InputDigest, RunManifest};
