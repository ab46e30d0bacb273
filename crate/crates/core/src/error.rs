use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("case file parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid node id {id:?}: {reason}")]
    InvalidId { id: String, reason: &'static str },
    #[error("nodes[{index}]: duplicate node id {id:?}")]
    DuplicateNode { index: usize, id: String },
    #[error("edges[{index}]: endpoint {id:?} is not a node of the case")]
    DanglingEndpoint { index: usize, id: String },
    #[error("edges[{index}]: self-loop on {id:?}")]
    SelfLoop { index: usize, id: String },
    #[error("edges[{index}]: duplicate dependency {dependent:?} <- {predecessor:?}")]
    DuplicateEdge { index: usize, dependent: String, predecessor: String },
    #[error("a case needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("known_optimum {optimum} exceeds the edge count {edges}")]
    OptimumOutOfRange { optimum: usize, edges: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("brute force refused for n = {n} (limit {limit}); use the GA or LLM optimizer instead")]
    TooLarge { n: usize, limit: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum BaseError {
    #[error("solution base is empty")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("record score {claimed} does not match evaluated score {actual}")]
    ScoreMismatch { claimed: usize, actual: usize },
    #[error("invalid policy: {0}")]
    Policy(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("(I - {delta}A) is too ill-conditioned to invert (condition estimate {condition:.3e}); use a smaller delta")]
    IllConditioned { delta: f64, condition: f64 },
    #[error("delta * spectral radius = {product:.4} >= 1; the walk series diverges, use a smaller delta")]
    Divergent { product: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("parents are not permutations of the same node set")]
    MismatchedParents,
}
