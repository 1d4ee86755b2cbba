use thiserror::Error;

/// Errors raised while building or querying path-star instances.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("arm count D must be at least 2, got {0}")]
    TooFewArms(usize),
    #[error("arm length M must be at least 2, got {0}")]
    ArmTooShort(usize),
    #[error("vocabulary of {vocab_size} nodes cannot hold {required} distinct nodes")]
    VocabTooSmall { vocab_size: usize, required: usize },
    #[error("node {0} is not part of the graph")]
    UnknownNode(u32),
    #[error("node {0} is not a final node")]
    NotFinal(u32),
    #[error("node {node} is out of range for a vocabulary of {vocab_size}")]
    NodeOutOfRange { node: u32, vocab_size: usize },
    #[error("node {0} appears more than once")]
    DuplicateNode(u32),
    #[error("arms have inconsistent lengths")]
    RaggedArms,
}

/// Errors raised while serializing or parsing token sequences.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("token id {0} is outside the vocabulary")]
    OutOfVocabulary(u32),
    #[error("malformed edge at token {0}")]
    MalformedEdge(usize),
    #[error("duplicate node within an edge at token {0}")]
    DuplicateInEdge(usize),
    #[error("missing problem specification delimiters")]
    MissingQuery,
    #[error("edges do not form a path-star graph: {0}")]
    NotPathStar(String),
    #[error("malformed target region: {0}")]
    BadTarget(String),
    #[error("structured sample count S={s} must satisfy 1 <= S <= D-1 = {max}")]
    StructuredCount { s: usize, max: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}
