use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("batch carries no gold tags")]
    UnlabeledBatch,
    #[error("non-finite {kind} loss at step {step}")]
    NonFiniteLoss { step: u64, kind: &'static str },
    #[error("cvt mode needs unlabeled sentences")]
    NoUnlabeledData,
    #[error("no labeled sentences")]
    NoLabeledData,
    #[error("no validation sentences")]
    NoValidationData,
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("checkpoint is version {found}; this build reads {expected}")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error(transparent)]
    Encoder(#[from] encoder::EncoderError),
    #[error(transparent)]
    Ndiff(#[from] ndiff::NdiffError),
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint metadata: {0}")]
    Meta(#[from] serde_json::Error),
}
