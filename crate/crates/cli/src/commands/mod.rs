use std::path::PathBuf;

use crate::CliError;

pub mod rates;
pub mod sample_verify;
pub mod simulate;
pub mod verify;

/// Writes to the output file when given, stdout otherwise.
pub fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| {
            CliError::Config(format!("config field `out`: cannot write {path:?}: {e}"))
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
