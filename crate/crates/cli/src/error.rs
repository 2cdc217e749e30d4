use std::fmt;

use htc_conic::ConicError;
use htc_core::analysis::AnalysisError;
use htc_core::ccp::CcpError;
use htc_core::shor::RelaxationError;
use htc_core::CaseError;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input, or an unusable output path.
    Validation(String),
    /// A solve did not reach an optimal point.
    Solver(String),
    /// An analysis refused the instance (size guard, empty grid).
    Guard(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Guard(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Guard(m) => f.write_str(m),
        }
    }
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RelaxationError> for CliError {
    fn from(e: RelaxationError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<CcpError> for CliError {
    fn from(e: CcpError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<ConicError> for CliError {
    fn from(e: ConicError) -> Self {
        match e {
            ConicError::Io(e) => CliError::Validation(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Intractable { .. } | AnalysisError::BadGrid(_) | AnalysisError::NoFeasiblePoint => {
                CliError::Guard(e.to_string())
            }
            AnalysisError::Conic(e) => e.into(),
            AnalysisError::Relaxation(e) => e.into(),
            AnalysisError::MaxGen { .. } => CliError::Solver(e.to_string()),
        }
    }
}
