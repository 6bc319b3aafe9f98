//! The two training objectives: cross-entropy on labeled batches and the
//! teacher-to-auxiliary KL consistency loss on unlabeled batches.

use corpus::Batch;
use encoder::{CvtModel, Mode, View};
use ndiff::{ParamStore, Real, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;

pub fn mask_factors<T: Real>(batch: &Batch) -> Vec<T> {
    batch
        .mask
        .iter()
        .map(|&m| T::from_f64(m as f64))
        .collect()
}

/// −(1/N) Σ log p_primary(gold) over unmasked tokens. The model runs in
/// train mode with the labeled dropout rate; only the primary head
/// contributes.
pub fn supervised_loss<T: Real, R: Rng>(
    model: &CvtModel,
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    batch: &Batch,
    rng: &mut R,
) -> Result<Var, TrainError> {
    let tags = batch.tags.as_ref().ok_or(TrainError::UnlabeledBatch)?;
    let rate = model.config.dropout_labeled;
    let states = model.encode(tape, store, batch, rate, Mode::Train, rng)?;
    let logits = model.view_logits(tape, store, &states, View::Full, rate, Mode::Train, rng)?;
    let logp = tape.log_softmax(logits)?;
    let picked = tape.pick_per_row(logp, tags)?;
    let mask = mask_factors::<T>(batch);
    let mean = tape.masked_mean(picked, &mask)?;
    Ok(tape.scale(mean, -1.0)?)
}

/// Primary-head distribution over a batch with dropout disabled, captured
/// as plain tensors. Used both to freeze the teacher for finite-difference
/// checks and by tests that rig specific target distributions.
pub struct Teacher<T> {
    pub p: Tensor<T>,
    pub logp: Tensor<T>,
}

pub fn teacher_distribution<T: Real>(
    model: &CvtModel,
    store: &ParamStore<T>,
    batch: &Batch,
) -> Result<Teacher<T>, TrainError> {
    let mut tape = Tape::new();
    // eval mode draws nothing from the rng
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let states = model.encode(&mut tape, store, batch, 0.0, Mode::Eval, &mut rng)?;
    let logits =
        model.view_logits(&mut tape, store, &states, View::Full, 0.0, Mode::Eval, &mut rng)?;
    let p = tape.softmax(logits)?;
    let logp = tape.log_softmax(logits)?;
    Ok(Teacher {
        p: tape.value(p).clone(),
        logp: tape.value(logp).clone(),
    })
}

/// (1/(4N)) Σ_views Σ_tokens KL(p_teacher ‖ p_view). The teacher is the
/// primary head with dropout off, behind `stop_gradient`, so gradients
/// reach the encoder only through the auxiliary branches and the primary
/// head's own analytic gradient is exactly zero.
pub fn consistency_loss<T: Real, R: Rng>(
    model: &CvtModel,
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    batch: &Batch,
    rng: &mut R,
) -> Result<Var, TrainError> {
    let t_states = model.encode(tape, store, batch, 0.0, Mode::Eval, rng)?;
    let t_logits =
        model.view_logits(tape, store, &t_states, View::Full, 0.0, Mode::Eval, rng)?;
    let sm = tape.softmax(t_logits)?;
    let lsm = tape.log_softmax(t_logits)?;
    let p = tape.stop_gradient(sm)?;
    let logp = tape.stop_gradient(lsm)?;
    student_kl(model, tape, store, batch, p, logp, rng)
}

/// Consistency loss against an already-frozen teacher. Finite-difference
/// checks must use this form: values still flow forward through
/// `stop_gradient`, so nudging a teacher-path parameter inside
/// `consistency_loss` would move the loss numerically even though the
/// analytic gradient ignores it.
pub fn consistency_from_teacher<T: Real, R: Rng>(
    model: &CvtModel,
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    batch: &Batch,
    teacher: &Teacher<T>,
    rng: &mut R,
) -> Result<Var, TrainError> {
    let p = tape.constant(teacher.p.clone());
    let logp = tape.constant(teacher.logp.clone());
    student_kl(model, tape, store, batch, p, logp, rng)
}

fn student_kl<T: Real, R: Rng>(
    model: &CvtModel,
    tape: &mut Tape<T>,
    store: &ParamStore<T>,
    batch: &Batch,
    p: Var,
    logp: Var,
    rng: &mut R,
) -> Result<Var, TrainError> {
    let rate = model.config.dropout_unlabeled;
    let states = model.encode(tape, store, batch, rate, Mode::Train, rng)?;
    let mask = mask_factors::<T>(batch);
    let mut total: Option<Var> = None;
    for view in View::AUXILIARY {
        let logits = model.view_logits(tape, store, &states, view, rate, Mode::Train, rng)?;
        let logq = tape.log_softmax(logits)?;
        let diff = tape.sub(logp, logq)?;
        let prod = tape.mul(p, diff)?;
        let kl = tape.row_sum(prod)?;
        let mean = tape.masked_mean(kl, &mask)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, mean)?,
            None => mean,
        });
    }
    Ok(tape.scale(total.expect("four views"), 0.25)?)
}
