use thiserror::Error;

#[derive(Debug, Error)]
pub enum NdiffError {
    #[error("{kernel}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        kernel: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{kernel}: invalid argument: {msg}")]
    InvalidArgument { kernel: &'static str, msg: String },
    #[error("variable does not belong to this tape")]
    ForeignVariable,
    #[error("backward requires a scalar loss, got {numel} elements")]
    NonScalarLoss { numel: usize },
    #[error("non-finite loss value")]
    NonFiniteLoss,
    #[error("non-finite gradient for parameter '{0}'")]
    NonFiniteGradient(String),
    #[error("duplicate parameter id '{0}'")]
    DuplicateParameter(String),
    #[error("unknown parameter id '{0}'")]
    UnknownParameter(String),
    #[error("negative decay coefficient {0}")]
    NegativeDecay(f64),
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidDropoutRate(f64),
    #[error("weight payload is corrupt: {0}")]
    CorruptPayload(String),
    #[error("weight payload format version {found} is not supported (expected {expected})")]
    PayloadVersion { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
