use encoder::EncoderConfig;
use serde::{Deserialize, Serialize};

use crate::error::TrainError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Cvt,
    SupervisedOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_steps: u64,
    pub batch_size_labeled: usize,
    pub batch_size_unlabeled: usize,
    pub eval_every_steps: u64,
    pub patience_evals: u32,
    pub min_delta_f1: f64,
    pub seed: u64,
    pub mode: TrainMode,
    /// Consistency steps taken after each supervised step in cvt mode.
    pub unlabeled_steps_per_labeled: u32,
    pub base_lr: f64,
    pub momentum: f64,
    pub decay: f64,
    pub clip_norm: f64,
    /// Exponential moving average of weights for evaluation; off unless
    /// set.
    pub ema_decay: Option<f64>,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_steps: 400_000,
            batch_size_labeled: 64,
            batch_size_unlabeled: 64,
            eval_every_steps: 30_000,
            patience_evals: 5,
            min_delta_f1: 0.05,
            seed: 0,
            mode: TrainMode::Cvt,
            unlabeled_steps_per_labeled: 1,
            base_lr: 0.5,
            momentum: 0.9,
            decay: 0.005,
            clip_norm: 5.0,
            ema_decay: None,
            encoder: EncoderConfig::paper(),
        }
    }
}

impl TrainConfig {
    pub fn paper() -> Self {
        Self::default()
    }

    /// Small preset that trains in minutes on toy data.
    pub fn desk() -> Self {
        TrainConfig {
            max_steps: 2_000,
            eval_every_steps: 1_000,
            encoder: EncoderConfig::desk(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.max_steps == 0 {
            return Err(TrainError::Config("max_steps must be positive".into()));
        }
        if self.eval_every_steps == 0 {
            return Err(TrainError::Config(
                "eval_every_steps must be positive".into(),
            ));
        }
        if self.patience_evals == 0 {
            return Err(TrainError::Config("patience_evals must be >= 1".into()));
        }
        if self.batch_size_labeled == 0 || self.batch_size_unlabeled == 0 {
            return Err(TrainError::Config("batch sizes must be >= 1".into()));
        }
        if self.unlabeled_steps_per_labeled == 0 {
            return Err(TrainError::Config(
                "unlabeled_steps_per_labeled must be >= 1".into(),
            ));
        }
        if self.min_delta_f1 < 0.0 {
            return Err(TrainError::Config("min_delta_f1 must be >= 0".into()));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0 < d && d < 1.0) {
                return Err(TrainError::Config("ema_decay must be in (0,1)".into()));
            }
        }
        Ok(())
    }
}

/// Mutable loop state, persisted with every checkpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed optimizer steps of any kind.
    pub step: u64,
    pub best_f1: Option<f64>,
    pub evals_since_improvement: u32,
    pub supervised_loss_avg: f64,
    pub supervised_steps: u64,
    pub consistency_loss_avg: f64,
    pub consistency_steps: u64,
}

impl TrainState {
    pub(crate) fn record_loss(&mut self, kind: LossKind, value: f64) {
        match kind {
            LossKind::Supervised => {
                self.supervised_steps += 1;
                self.supervised_loss_avg +=
                    (value - self.supervised_loss_avg) / self.supervised_steps as f64;
            }
            LossKind::Consistency => {
                self.consistency_steps += 1;
                self.consistency_loss_avg +=
                    (value - self.consistency_loss_avg) / self.consistency_steps as f64;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Supervised,
    Consistency,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Supervised => "supervised",
            LossKind::Consistency => "consistency",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults() {
        let c = TrainConfig::paper();
        assert_eq!(c.max_steps, 400_000);
        assert_eq!(c.batch_size_labeled, 64);
        assert_eq!(c.batch_size_unlabeled, 64);
        assert_eq!(c.base_lr, 0.5);
        assert!(c.ema_decay.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn desk_is_tiny() {
        let c = TrainConfig::desk();
        assert_eq!(c.max_steps, 2_000);
        assert_eq!(c.encoder.projection_size, 64);
        c.validate().unwrap();
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = TrainConfig::desk();
        c.patience_evals = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::desk();
        c.ema_decay = Some(1.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn mode_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&TrainMode::SupervisedOnly).unwrap(),
            "\"supervised_only\""
        );
        assert_eq!(serde_json::to_string(&TrainMode::Cvt).unwrap(), "\"cvt\"");
    }

    #[test]
    fn running_averages() {
        let mut s = TrainState::default();
        s.record_loss(LossKind::Supervised, 2.0);
        s.record_loss(LossKind::Supervised, 4.0);
        assert!((s.supervised_loss_avg - 3.0).abs() < 1e-12);
        assert_eq!(s.supervised_steps, 2);
        assert_eq!(s.consistency_steps, 0);
    }
}
