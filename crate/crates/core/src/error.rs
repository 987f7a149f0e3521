use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model document is not well-formed (carries line/column when known).
    #[error("parse error{}: {message}", location(*line, *column))]
    Parse {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown species `{0}`")]
    Species(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    /// Output expression errors; `position` is a 0-based byte offset.
    #[error("expression parse error at {position}: {message}")]
    Expr { message: String, position: usize },
    #[error("unknown species `{0}` in expression")]
    UnknownSpecies(String),

    #[error("no second time-scale: {0}")]
    NoSecondScale(String),
    #[error("degenerate time-scale separation: {0}")]
    DegenerateScale(String),
    #[error("fiber exceeds {cap} states")]
    FiberNotFinite { cap: usize },
    #[error("fast dynamics on fiber {v:?} is not irreducible")]
    NotErgodic { v: Vec<i64> },
    #[error("no nonnegative state maps to reduced coordinate {v:?}")]
    NoRepresentative { v: Vec<i64> },
    #[error("singular linear system: {0}")]
    SingularSolve(String),

    #[error("stiff integrator failed: {0}")]
    StiffnessFailure(String),
    #[error("event cap of {cap} reached")]
    HorizonGuard { cap: u64 },
    #[error("truncated state space leaks {mass:e} probability mass")]
    Truncation { mass: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}
