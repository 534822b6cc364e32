// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::ConfigError;

/// Command failure, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: config, flags, pattern files. Exit 2.
    Validation(String),
    /// A computation failed or could not write its results. Exit 3.
    Computation(String),
    /// A verification suite reported failures. Exit 4.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<qlitho_core::Error> for CliError {
    fn from(e: qlitho_core::Error) -> Self {
        use qlitho_core::Error as E;
        match e {
            E::Normalization(_)
            | E::FlatProfile
            | E::ProbabilityOverflow(_)
            | E::NonCommensurate { .. } => CliError::Computation(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let io = |e: std::io::Error| {
        CliError::Computation(format!("writing {}: {e}", dir.join(name).display()))
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

/// `# `-prefixed header echoing the command and its resolved config.
pub fn header(command: &str, resolved: &str) -> Vec<String> {
    let mut lines = vec![format!("qlitho {command}")];
    lines.extend(
        resolved
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(String::from),
    );
    lines
}

pub fn commented(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}
