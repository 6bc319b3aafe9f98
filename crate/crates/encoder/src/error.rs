use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("{kind} id {id} out of range for vocabulary of {vocab}")]
    TokenIdOutOfRange {
        kind: &'static str,
        id: usize,
        vocab: usize,
    },
    #[error("unknown view {0:?}; expected full, fwd, bwd, future, or past")]
    UnknownView(String),
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error(transparent)]
    Ndiff(#[from] ndiff::NdiffError),
}
