use thiserror::Error;

/// Which controllability assumption failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Outdoor maximum must not exceed the comfort maximum.
    OutdoorBelowComfortMax,
    /// Full HVAC power must lift the coldest outdoor temperature to the band.
    HeaterCoversMinimum,
    /// The comfort band must be wider than one slot's worst-case swing (psi).
    BandWiderThanSwing,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Assumption::OutdoorBelowComfortMax => "t_out_max <= t_max",
            Assumption::HeaterCoversMinimum => "(eta/A) e_max + t_out_min >= t_min",
            Assumption::BandWiderThanSwing => "t_max - t_min > psi",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("assumption {which} violated: lhs {lhs} vs rhs {rhs}")]
    AssumptionViolated {
        which: Assumption,
        lhs: f64,
        rhs: f64,
    },
    #[error("invalid range for {field}: {reason}")]
    RangeError { field: &'static str, reason: String },
    #[error("infeasible controller parameters: {0}")]
    InfeasibleParameters(String),
    #[error("malformed config: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("trace length mismatch: {0}")]
    TraceLengthMismatch(String),
    #[error("infeasible initial state: {0}")]
    InfeasibleInitialState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: u64,
        column: String,
        message: String,
    },
    #[error("slot {slot}: {field} out of bounds ({message})")]
    BoundsError {
        slot: usize,
        field: &'static str,
        message: String,
    },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("EV window too short: {0}")]
    WindowTooShort(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run has no slot records")]
    EmptyRun,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
