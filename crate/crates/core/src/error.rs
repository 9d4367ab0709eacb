use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // s-expression parsing
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParens(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("trailing content at byte {0}")]
    TrailingContent(usize),

    // AST conversion
    #[error("empty list cannot be converted to a term")]
    EmptyList,
    #[error("list head must be an atom")]
    NonAtomHead,

    // tensors
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotAScalar(alloc::vec::Vec<usize>),
    #[error("gradient keys do not match parameter keys ({0})")]
    KeyMismatch(String),
    #[error("non-finite input")]
    NonFiniteInput,

    // checkpoints
    #[error("checkpoint manifest for {name} expects {expected} values, found {found}")]
    ManifestShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptValue(String),

    // premise selection
    #[error("no candidate premises")]
    EmptyCandidates,
    #[error("empty dataset")]
    EmptyDataset,

    // grammar and decoding
    #[error("grammar: {0}")]
    Grammar(String),
    #[error("tactic tree does not match the grammar: {0}")]
    InvalidTree(String),
    #[error("no valid productions for nonterminal {0}")]
    NoValidProductions(String),
    #[error("premise argument requested but the context is empty")]
    NoPremises,
    #[error("gold action sequence is invalid: {0}")]
    GoldInvalid(String),
    #[error("decoding exceeded {0} steps")]
    MaxStepsExceeded(usize),
    #[error("checkpoint does not match the model: {0}")]
    CheckpointMismatch(String),

    // dataset handling
    #[error("cannot split {files} files into {parts} partitions")]
    TooFewFiles { files: usize, parts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
