use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("vertex `{0}` declared twice")]
    DuplicateVertex(String),

    #[error("too many vertices: {0} (at most {max} supported)", max = crate::graph::MAX_VERTICES)]
    TooManyVertices(usize),

    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),

    #[error("duplicate {kind} edge between `{a}` and `{b}`")]
    DuplicateEdge { kind: &'static str, a: String, b: String },

    #[error("directed part contains a cycle through `{0}`")]
    DirectedCycle(String),

    #[error("graph syntax error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("vertex sets must be pairwise disjoint")]
    OverlappingSets,

    #[error("vertex set must be nonempty")]
    EmptySet,

    #[error("{0} is not a head of the graph")]
    NotAHead(String),

    #[error("{0} is not a district of the graph")]
    NotADistrict(String),

    #[error("parameter vector has length {found}, expected {expected}")]
    ParameterLength { expected: usize, found: usize },

    #[error("parameter {index} is {value}; all parameters must be strictly positive")]
    NonPositiveParameter { index: usize, value: f64 },

    #[error("parameter vector is outside the model: probability of state {state} is {value}")]
    InvalidParameters { state: usize, value: f64 },

    #[error("probability vector has length {found}, expected {expected}")]
    ProbabilityLength { expected: usize, found: usize },

    #[error("marginal probability of conditioning event is zero for {0}")]
    ZeroMarginal(String),

    #[error("count vector has length {found}, expected {expected}")]
    CountLength { expected: usize, found: usize },

    #[error("cell {cell} has zero count; strict mode requires all counts to be positive")]
    ZeroCount { cell: usize },

    #[error("count vector is empty (total count is zero)")]
    NoObservations,

    #[error("log-likelihood became non-finite")]
    NonFiniteLikelihood,

    #[error("Fisher information is not invertible (condition number {condition:e})")]
    SingularInformation { condition: f64 },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
