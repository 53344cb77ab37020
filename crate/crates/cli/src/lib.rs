//! Command implementations behind the `adaptometer` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_analyze, cmd_generate, cmd_jsd, cmd_stats, cmd_synth, JsdMode};
pub use config::RunConfig;
pub use error::CliError;

/// Sizes the global worker pool; 0 keeps the default.
pub fn configure_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure {threads} threads: {e}")))
}
