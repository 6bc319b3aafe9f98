//! SGD with classical momentum, inverse-time learning-rate decay, and
//! global-norm gradient clipping.

use crate::error::NdiffError;
use crate::params::{ParamId, ParamStore};
use crate::real::Real;

/// `lr(t) = base / (1 + decay * t)` where `t` counts completed updates.
pub fn lr_schedule(base: f64, decay: f64, step: u64) -> f64 {
    base / (1.0 + decay * step as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct SgdConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub decay: f64,
    /// Gradients are rescaled so their global L2 norm never exceeds this.
    pub clip_norm: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.5,
            momentum: 0.9,
            decay: 0.005,
            clip_norm: 5.0,
        }
    }
}

pub struct SgdMomentum<T> {
    cfg: SgdConfig,
    velocity: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> SgdMomentum<T> {
    pub fn new(cfg: SgdConfig, store: &ParamStore<T>) -> Result<Self, NdiffError> {
        if cfg.decay < 0.0 {
            return Err(NdiffError::NegativeDecay(cfg.decay));
        }
        let velocity = store
            .iter()
            .map(|(_, p)| vec![T::zero(); p.value.numel()])
            .collect();
        Ok(Self {
            cfg,
            velocity,
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Momentum buffers in parameter order (for checkpointing).
    pub fn velocities(&self) -> &[Vec<T>] {
        &self.velocity
    }

    /// Reinstate checkpointed momentum buffers and the completed-step
    /// count. Buffer count and lengths must match the current parameters.
    pub fn restore(&mut self, velocity: Vec<Vec<T>>, step: u64) -> Result<(), NdiffError> {
        if velocity.len() != self.velocity.len()
            || velocity
                .iter()
                .zip(&self.velocity)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(NdiffError::InvalidArgument {
                kernel: "sgd_restore",
                msg: "velocity buffers do not match parameters".into(),
            });
        }
        self.velocity = velocity;
        self.step = step;
        Ok(())
    }

    /// Learning rate the next update will use.
    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.cfg.base_lr, self.cfg.decay, self.step)
    }

    /// Apply one update from the gradients accumulated in the store, then
    /// zero them. Returns the learning rate that was used.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<f64, NdiffError> {
        let lr = self.current_lr();

        // Global norm over trainable gradients, accumulated in f64 so the
        // clip decision is stable under f32 training.
        let mut sum_sq = 0f64;
        for (i, (_, p)) in store.iter().enumerate() {
            if !p.trainable {
                continue;
            }
            debug_assert_eq!(self.velocity[i].len(), p.grad.len());
            for &g in &p.grad {
                let g = g.as_f64();
                if !g.is_finite() {
                    return Err(NdiffError::NonFiniteGradient(p.id.clone()));
                }
                sum_sq += g * g;
            }
        }
        let norm = sum_sq.sqrt();
        let scale = if norm > self.cfg.clip_norm {
            T::from_f64(self.cfg.clip_norm / norm)
        } else {
            T::one()
        };

        let mu = T::from_f64(self.cfg.momentum);
        let lr_t = T::from_f64(lr);
        for i in 0..store.len() {
            let p = store.get_mut(ParamId(i));
            if !p.trainable {
                continue;
            }
            let vel = &mut self.velocity[i];
            let value = p.value.make_mut();
            for ((v, th), &g) in vel.iter_mut().zip(value.iter_mut()).zip(&p.grad) {
                *v = mu * *v + g * scale;
                *th = *th - lr_t * *v;
            }
        }
        store.zero_grads();
        self.step += 1;
        Ok(lr)
    }
}
