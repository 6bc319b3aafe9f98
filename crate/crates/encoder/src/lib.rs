//! CNN-BiLSTM sentence encoder with one primary prediction head over the
//! full bidirectional context and four auxiliary heads over restricted
//! views (forward, backward, future, past), the structure cross-view
//! training teaches from.

pub mod config;
pub mod error;
pub mod model;

pub use config::EncoderConfig;
pub use error::EncoderError;
pub use model::{lstm_cell, CvtModel, EncoderStates, LstmParams, Mode, View};
