use std::path::PathBuf;

/// Exit status for a successful run.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    ConfigLine { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: malformed file at byte offset {offset}: {message}")]
    Format { path: PathBuf, offset: u64, message: String },

    #[error("{path}: checksum mismatch (expected {expected}, found {found}); the artifact is corrupted or was edited")]
    Checksum { path: PathBuf, expected: String, found: String },

    #[error("{path}: written under config hash {found}, but this run uses {expected}; refusing to mix artifacts")]
    HashMismatch { path: PathBuf, expected: String, found: String },

    #[error("missing artifact {path}; run `mflimit {command} --config <same config> --out <same dir>` first")]
    MissingArtifact { path: PathBuf, command: &'static str },

    #[error("run diverged (see DIVERGED marker in {dir}): {source}")]
    Diverged { dir: PathBuf, source: mflimit_core::Error },

    #[error("{failed} of {total} criteria failed")]
    Verification { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] mflimit_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use mflimit_core::Error as E;
        match self {
            CliError::Config(_) | CliError::ConfigLine { .. } | CliError::Format { .. } => EXIT_CONFIG,
            CliError::Io { .. } => 1,
            CliError::Checksum { .. } | CliError::HashMismatch { .. } | CliError::MissingArtifact { .. } | CliError::Verification { .. } => EXIT_VERIFY,
            CliError::Diverged { .. } => EXIT_DIVERGED,
            CliError::Core(e) => match e {
                E::Diverged { .. } | E::NonConvergence { .. } => EXIT_DIVERGED,
                E::MisalignedGrid { .. } | E::CountMismatch { .. } => EXIT_VERIFY,
                _ => EXIT_CONFIG,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
