use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sentence {index}: prediction has {pred} tags, gold has {gold}")]
    LengthMismatch {
        index: usize,
        pred: usize,
        gold: usize,
    },
    #[error("prediction and gold corpora differ in sentence count: {pred} vs {gold}")]
    CorpusMismatch { pred: usize, gold: usize },
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error("significance needs at least 2 runs per side, got {0}")]
    TooFewRuns(usize),
    #[error("paired test needs equal run counts, got {0} and {1}")]
    UnpairedLengths(usize, usize),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
}
