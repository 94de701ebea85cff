use std::fmt;

/// Failure categories aligned with the process exit codes: input problems
/// exit 2, configuration problems exit 3, everything else exits 1.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Config(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "invalid input: {msg}"),
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<udib::CorpusError> for CliError {
    fn from(e: udib::CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<udib::ClusterError> for CliError {
    fn from(e: udib::ClusterError) -> Self {
        use udib::ClusterError::*;
        match e {
            InvalidConfig(_) | NoClusters => CliError::Config(e.to_string()),
            LengthMismatch { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<udib::SelectError> for CliError {
    fn from(e: udib::SelectError) -> Self {
        use udib::SelectError::*;
        match e {
            InvalidGrid(_) | InvalidWindow | EmptyInput => CliError::Config(e.to_string()),
            Corpus(inner) => inner.into(),
            Cluster(inner) => inner.into(),
            // data-dependent: the corpus produced a curve the heuristic
            // cannot rate
            CurveTooShort { .. } | NoEligiblePoint => CliError::Input(e.to_string()),
        }
    }
}

impl From<udib::SdmError> for CliError {
    fn from(e: udib::SdmError) -> Self {
        use udib::SdmError::*;
        match e {
            InvalidAlpha(_) | InvalidK => CliError::Config(e.to_string()),
            MissingRole(_) | NoPairs | EmptySelection => CliError::Input(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}
