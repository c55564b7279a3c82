use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid phoneme token `{0}`")]
    InvalidToken(String),
    #[error("invalid word `{0}`: only letters, apostrophes, hyphens and periods are accepted")]
    InvalidWord(String),
    #[error("word `{0}` is not in the pronouncing dictionary")]
    OutOfVocabulary(String),
    #[error("phoneme `{0}` has no viseme group")]
    MappingGap(String),
    #[error("phoneme `{phoneme}` appears in both `{first}` and `{second}`")]
    TableConflict {
        phoneme: String,
        first: String,
        second: String,
    },
    #[error("viseme table must define exactly {expected} groups, found {found}")]
    TableArity { expected: usize, found: usize },
    #[error("viseme group `{0}` has no phonemes")]
    EmptyGroup(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate vector (norm below 1e-12): {0}")]
    DegenerateVector(String),
    #[error("empty sequence: at least one frame is required")]
    EmptySequence,
    #[error("class index {index} out of range for {classes} classes")]
    Index { index: usize, classes: usize },
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("schedule step {step} outside [0, {total}]")]
    Schedule { step: usize, total: usize },
    #[error("gradient check: {0}")]
    GradCheck(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
}
