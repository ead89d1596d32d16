use disjoint_core::arrangements::ArrangementError;
use disjoint_core::exact_calculus::CalculusError;
use disjoint_core::phase::PhaseError;
use disjoint_core::phase_sums::SumError;
use disjoint_core::sieves::{CacheError, SieveError};
use disjoint_core::symbolic_blocks::BlockError;
use thiserror::Error;

/// Errors surfaced by the CLI, grouped by exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    /// Precision, memory or enumeration limits.
    #[error("resource: {0}")]
    Resource(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Io(_) => 3,
            LabError::Resource(_) => 4,
            LabError::Invariant(_) => 5,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<SieveError> for LabError {
    fn from(e: SieveError) -> Self {
        match e {
            SieveError::MemoryBudget { .. } => LabError::Resource(e.to_string()),
            _ => LabError::Usage(e.to_string()),
        }
    }
}

impl From<CacheError> for LabError {
    fn from(e: CacheError) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<PhaseError> for LabError {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::Precision { .. } | PhaseError::Width { .. } => LabError::Resource(e.to_string()),
            PhaseError::Io { .. } => LabError::Io(e.to_string()),
            _ => LabError::Usage(e.to_string()),
        }
    }
}

impl From<SumError> for LabError {
    fn from(e: SumError) -> Self {
        match e {
            SumError::Phase(p) => p.into(),
            SumError::Budget { .. } | SumError::Uncertified { .. } => LabError::Resource(e.to_string()),
            _ => LabError::Usage(e.to_string()),
        }
    }
}

impl From<ArrangementError> for LabError {
    fn from(e: ArrangementError) -> Self {
        match e {
            ArrangementError::Budget { .. } => LabError::Resource(e.to_string()),
            _ => LabError::Usage(e.to_string()),
        }
    }
}

impl From<BlockError> for LabError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::Phase(p) => p.into(),
            BlockError::Io { .. } | BlockError::Json { .. } | BlockError::Header(_) => LabError::Io(e.to_string()),
            _ => LabError::Usage(e.to_string()),
        }
    }
}

impl From<CalculusError> for LabError {
    fn from(e: CalculusError) -> Self {
        LabError::Usage(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        let e: LabError = SieveError::MemoryBudget { n_max: 1, required: 2, budget: 1 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: LabError = SumError::Uncertified { limit: 4 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: LabError = SumError::Phase(PhaseError::Precision { n: 1, bound: 1.0 }).into();
        assert_eq!(e.exit_code(), 4);
        let e: LabError = PhaseError::Parse { token: "x".into(), position: 0, message: "m".into() }.into();
        assert_eq!(e.exit_code(), 2);
        let e: LabError = CacheError::ShortHeader { len: 3 }.into();
        assert_eq!(e.exit_code(), 3);
        assert_eq!(LabError::Invariant("x".into()).exit_code(), 5);
    }
}
