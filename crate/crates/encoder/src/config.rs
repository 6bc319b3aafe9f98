use serde::{Deserialize, Serialize};

use crate::error::EncoderError;

/// Network dimensions and dropout rates.
///
/// The two dropout numbers are drop probabilities (probability a unit is
/// zeroed), one for labeled batches and one for unlabeled batches.
/// `num_tags` is normally filled in from the tag vocabulary; 0 means
/// "not set yet" and fails validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub word_dim: usize,
    pub char_emb_dim: usize,
    pub char_filter_widths: Vec<usize>,
    pub char_filters: usize,
    pub lstm1_size: usize,
    pub lstm2_size: usize,
    pub projection_size: usize,
    pub dropout_labeled: f64,
    pub dropout_unlabeled: f64,
    pub num_tags: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_dim: 300,
            char_emb_dim: 50,
            char_filter_widths: vec![2, 3, 4],
            char_filters: 300,
            lstm1_size: 1024,
            lstm2_size: 512,
            projection_size: 512,
            dropout_labeled: 0.5,
            dropout_unlabeled: 0.8,
            num_tags: 0,
        }
    }
}

impl EncoderConfig {
    /// Full-scale settings.
    pub fn paper() -> Self {
        Self::default()
    }

    /// Small dimensions for fast tests and local experiments.
    pub fn desk() -> Self {
        EncoderConfig {
            word_dim: 50,
            char_filters: 25,
            lstm1_size: 64,
            lstm2_size: 64,
            projection_size: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_emb_dim", self.char_emb_dim),
            ("char_filters", self.char_filters),
            ("lstm1_size", self.lstm1_size),
            ("lstm2_size", self.lstm2_size),
            ("projection_size", self.projection_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(EncoderError::Config(format!("{name} must be positive")));
            }
        }
        if self.char_filter_widths.is_empty() || self.char_filter_widths.contains(&0) {
            return Err(EncoderError::Config(
                "char_filter_widths must be non-empty positive".into(),
            ));
        }
        for (name, r) in [
            ("dropout_labeled", self.dropout_labeled),
            ("dropout_unlabeled", self.dropout_unlabeled),
        ] {
            if !(0.0..1.0).contains(&r) {
                return Err(EncoderError::Config(format!("{name} must be in [0,1)")));
            }
        }
        if self.num_tags == 0 {
            return Err(EncoderError::Config("num_tags must be positive".into()));
        }
        Ok(())
    }

    /// Width of one token representation: word vector plus one pooled
    /// feature block per filter width.
    pub fn token_dim(&self) -> usize {
        self.word_dim + self.char_filter_widths.len() * self.char_filters
    }

    /// Primary-head input width: both layer-1 directions plus the
    /// bidirectional layer-2 output.
    pub fn full_view_width(&self) -> usize {
        4 * self.projection_size
    }
}
