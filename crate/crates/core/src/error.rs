use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid multiplier profile: {0}")]
    InvalidProfile(String),

    #[error("invalid packing configuration: {0}")]
    InvalidConfig(String),

    #[error("operand {value} is not representable in {bits} {signedness} bits")]
    OperandOutOfRange {
        value: i64,
        bits: u32,
        signedness: &'static str,
    },

    #[error("packed span of {span} bits exceeds the {port}-bit port")]
    SpanOverflow { span: u32, port: u32 },

    #[error("wide product does not fit the {0}-bit accumulator")]
    AccumulatorOverflow(u32),

    #[error("{requested} accumulations exceed the safe budget of {budget}")]
    AccumulationBudget { requested: u64, budget: u64 },

    #[error("expected {expected} operand LSB pairs, got {got}")]
    LsbCount { expected: usize, got: usize },

    #[error("no valid packing for w_b={w_b}, a_b={a_b}")]
    NoValidPacking { w_b: u32, a_b: u32 },

    #[error("bit-exactness failure: {0}")]
    Verification(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("missing lookup entry for {0}")]
    MissingEntry(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error("invalid assignment: {0}")]
    Assignment(String),

    #[error("regression: {0}")]
    Regression(String),

    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("search space of {0} combinations is too large for exhaustive allocation")]
    SpaceTooLarge(u128),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Usage and schema problems as opposed to domain failures.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::InvalidProfile(_)
                | Error::Network(_)
                | Error::Assignment(_)
        )
    }
}
