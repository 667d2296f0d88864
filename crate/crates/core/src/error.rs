use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid alphabet size {0} (need m >= 2)")]
    AlphabetTooSmall(usize),

    #[error("letter {letter} out of range for alphabet of size {m}")]
    LetterOutOfRange { letter: usize, m: usize },

    #[error("substitution not in class: {0}")]
    NotInClass(String),

    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("nonpositive roof entry at index {0}")]
    NonPositiveRoof(usize),

    #[error("Rauzy-nondeterministic: tie between competing lengths")]
    RauzyTie,

    #[error("reducible permutation {0:?}")]
    Reducible(Vec<usize>),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("matrix is not invertible over the integers")]
    NotInvertible,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("ill-conditioned subspace frame (min singular value {0:.3e})")]
    IllConditioned(f64),

    #[error("no positive window within depth {0}")]
    NoPositiveWindow(usize),

    #[error("sequence index {0} outside the explicit range")]
    SequenceIndex(i64),

    #[error("orbit budget exceeded: requested R = {requested}, budget {budget}")]
    OrbitBudget { requested: f64, budget: f64 },

    #[error("missing good return words")]
    MissingReturnWords,

    #[error("lattice not full: {0}")]
    LatticeNotFull(String),

    #[error("precision exhausted at n = {0}")]
    PrecisionExhausted(usize),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
