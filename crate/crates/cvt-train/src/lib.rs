//! Semi-supervised training for the sequence tagger: a supervised
//! cross-entropy objective on labeled batches and a consistency objective
//! that distills the full-context primary head into four restricted-view
//! auxiliary heads on unlabeled batches.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod loss;
pub mod tagging;
pub mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointMeta, LoadedCheckpoint, CHECKPOINT_VERSION,
};
pub use config::{LossKind, TrainConfig, TrainMode, TrainState};
pub use error::TrainError;
pub use loss::{
    consistency_from_teacher, consistency_loss, supervised_loss, teacher_distribution, Teacher,
};
pub use tagging::{evaluate_f1, tag_sentences};
pub use train::{train, TrainReport};
