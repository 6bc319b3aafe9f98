//! The training loop: alternating supervised and consistency steps,
//! periodic span-F1 evaluation, early stopping on patience, and best/final
//! checkpoints plus a JSONL log under the output directory.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use corpus::{make_batches, Batch, EmbeddingMatrix, LabeledSentence, UnlabeledSentence, Vocabulary};
use encoder::CvtModel;
use ndiff::{ParamStore, SgdConfig, SgdMomentum, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::save_checkpoint;
use crate::config::{LossKind, TrainConfig, TrainMode, TrainState};
use crate::error::TrainError;
use crate::loss::{consistency_loss, supervised_loss};
use crate::tagging::evaluate_f1;

const EVAL_BATCH: usize = 64;

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub steps: u64,
    pub best_f1: Option<f64>,
    pub final_f1: f64,
    pub stopped_early: bool,
    /// `(step, f1)` for every validation pass, in order.
    pub evals: Vec<(u64, f64)>,
    pub best_dir: PathBuf,
    pub final_dir: PathBuf,
    pub log_path: PathBuf,
    pub state: TrainState,
}

/// Deterministic cycling batch source: reshuffles with `seed + epoch` each
/// time the pool is exhausted.
struct BatchCycle<'a, S: corpus::Sentence> {
    sentences: &'a [S],
    vocab: &'a Vocabulary,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    queue: Vec<Batch>,
    next: usize,
}

impl<'a, S: corpus::Sentence> BatchCycle<'a, S> {
    fn new(
        sentences: &'a [S],
        vocab: &'a Vocabulary,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self, TrainError> {
        let queue = make_batches(sentences, vocab, batch_size, seed, true)?;
        Ok(Self {
            sentences,
            vocab,
            batch_size,
            seed,
            epoch: 0,
            queue,
            next: 0,
        })
    }

    fn take(&mut self) -> Result<Batch, TrainError> {
        if self.next >= self.queue.len() {
            self.epoch += 1;
            self.queue = make_batches(
                self.sentences,
                self.vocab,
                self.batch_size,
                self.seed.wrapping_add(self.epoch),
                true,
            )?;
            self.next = 0;
        }
        let b = self.queue[self.next].clone();
        self.next += 1;
        Ok(b)
    }
}

/// Exponential moving average of the weights, swapped in for evaluation
/// and checkpointing when enabled.
struct Ema {
    decay: f32,
    shadow: Vec<Vec<f32>>,
}

impl Ema {
    fn new(decay: f64, store: &ParamStore<f32>) -> Self {
        Ema {
            decay: decay as f32,
            shadow: store.iter().map(|(_, p)| p.value.data().to_vec()).collect(),
        }
    }

    fn update(&mut self, store: &ParamStore<f32>) {
        for ((_, p), s) in store.iter().zip(self.shadow.iter_mut()) {
            for (si, &v) in s.iter_mut().zip(p.value.data()) {
                *si = self.decay * *si + (1.0 - self.decay) * v;
            }
        }
    }

    /// Exchange shadow and live weights; call twice to restore.
    fn swap(&mut self, store: &mut ParamStore<f32>) {
        let ids: Vec<(ndiff::ParamId, Vec<usize>)> = store
            .iter()
            .map(|(id, p)| (id, p.value.shape().to_vec()))
            .collect();
        for ((id, shape), s) in ids.into_iter().zip(self.shadow.iter_mut()) {
            let live = store.get(id).value.data().to_vec();
            let shadow = std::mem::replace(s, live);
            store
                .set_value(id, ndiff::Tensor::new(shape, shadow).expect("shape preserved"))
                .expect("parameter exists");
        }
    }
}

pub fn train(
    labeled: &[LabeledSentence],
    unlabeled: &[UnlabeledSentence],
    validation: &[LabeledSentence],
    vocab: &Vocabulary,
    embeddings: Option<&EmbeddingMatrix>,
    config: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(TrainError::NoLabeledData);
    }
    if validation.is_empty() {
        return Err(TrainError::NoValidationData);
    }
    let cvt = config.mode == TrainMode::Cvt;
    if cvt && unlabeled.is_empty() {
        return Err(TrainError::NoUnlabeledData);
    }

    // Checkpoints must carry the resolved tag count, not the caller's
    // placeholder, so the patched config is used everywhere from here on.
    let mut config = config.clone();
    config.encoder.num_tags = vocab.n_tags();
    let config = &config;
    let model_seed = config.seed;
    let (model, mut store) = CvtModel::new::<f32>(
        config.encoder.clone(),
        vocab.n_words(),
        vocab.n_chars(),
        model_seed,
    )?;
    if let Some(emb) = embeddings {
        model.set_word_embeddings(&mut store, emb)?;
    }
    let mut optimizer = SgdMomentum::new(
        SgdConfig {
            base_lr: config.base_lr,
            momentum: config.momentum,
            decay: config.decay,
            clip_norm: config.clip_norm,
        },
        &store,
    )?;
    let mut ema = config.ema_decay.map(|d| Ema::new(d, &store));
    // Dropout draws; a separate stream from batch shuffling.
    let mut drop_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));

    let mut labeled_batches =
        BatchCycle::new(labeled, vocab, config.batch_size_labeled, config.seed)?;
    let mut unlabeled_batches = if cvt {
        Some(BatchCycle::new(
            unlabeled,
            vocab,
            config.batch_size_unlabeled,
            config.seed.wrapping_add(0x5555_5555),
        )?)
    } else {
        None
    };

    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("train_log.jsonl");
    let mut log = fs::File::create(&log_path)?;
    let best_dir = out_dir.join("best");
    let final_dir = out_dir.join("final");

    let mut state = TrainState::default();
    let mut evals: Vec<(u64, f64)> = Vec::new();
    let mut stopped_early = false;

    'outer: while state.step < config.max_steps {
        let batch = labeled_batches.take()?;
        let stop = run_step(
            &model,
            &mut store,
            &mut optimizer,
            &mut ema,
            &batch,
            LossKind::Supervised,
            &mut state,
            config,
            vocab,
            validation,
            &mut drop_rng,
            &mut log,
            &mut evals,
            &best_dir,
            model_seed,
        )?;
        if stop {
            stopped_early = true;
            break 'outer;
        }
        if state.step >= config.max_steps {
            break;
        }
        if cvt {
            for _ in 0..config.unlabeled_steps_per_labeled {
                let batch = unlabeled_batches.as_mut().expect("cvt mode").take()?;
                let stop = run_step(
                    &model,
                    &mut store,
                    &mut optimizer,
                    &mut ema,
                    &batch,
                    LossKind::Consistency,
                    &mut state,
                    config,
                    vocab,
                    validation,
                    &mut drop_rng,
                    &mut log,
                    &mut evals,
                    &best_dir,
                    model_seed,
                )?;
                if stop {
                    stopped_early = true;
                    break 'outer;
                }
                if state.step >= config.max_steps {
                    break 'outer;
                }
            }
        }
    }

    let final_f1 = with_ema(&mut ema, &mut store, |store| {
        evaluate_f1(&model, store, vocab, validation, EVAL_BATCH)
    })?;
    with_ema(&mut ema, &mut store, |store| {
        save_checkpoint(
            &final_dir,
            store,
            vocab,
            config,
            &state,
            model_seed,
            Some(&optimizer),
        )
    })?;
    if state.best_f1.is_none() {
        // No evaluation ever ran inside the loop; the final weights are the
        // best we have seen.
        state.best_f1 = Some(final_f1);
        with_ema(&mut ema, &mut store, |store| {
            save_checkpoint(
                &best_dir,
                store,
                vocab,
                config,
                &state,
                model_seed,
                Some(&optimizer),
            )
        })?;
    }
    writeln!(
        log,
        "{}",
        serde_json::json!({
            "step": state.step,
            "kind": "final",
            "f1": final_f1,
            "best": state.best_f1,
        })
    )?;

    Ok(TrainReport {
        steps: state.step,
        best_f1: state.best_f1,
        final_f1,
        stopped_early,
        evals,
        best_dir,
        final_dir,
        log_path,
        state,
    })
}

/// One optimizer step plus any evaluation it triggers. Returns true when
/// patience is exhausted.
#[allow(clippy::too_many_arguments)]
fn run_step(
    model: &CvtModel,
    store: &mut ParamStore<f32>,
    optimizer: &mut SgdMomentum<f32>,
    ema: &mut Option<Ema>,
    batch: &Batch,
    kind: LossKind,
    state: &mut TrainState,
    config: &TrainConfig,
    vocab: &Vocabulary,
    validation: &[LabeledSentence],
    drop_rng: &mut ChaCha8Rng,
    log: &mut fs::File,
    evals: &mut Vec<(u64, f64)>,
    best_dir: &Path,
    model_seed: u64,
) -> Result<bool, TrainError> {
    let mut tape = Tape::new();
    let loss = match kind {
        LossKind::Supervised => supervised_loss(model, &mut tape, store, batch, drop_rng)?,
        LossKind::Consistency => consistency_loss(model, &mut tape, store, batch, drop_rng)?,
    };
    let value = tape.value(loss).data()[0] as f64;
    if !value.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            step: state.step + 1,
            kind: kind.name(),
        });
    }
    tape.backward(loss, store)?;
    let lr = optimizer.step(store)?;
    if let Some(e) = ema.as_mut() {
        e.update(store);
    }
    state.step += 1;
    state.record_loss(kind, value);
    writeln!(
        log,
        "{}",
        serde_json::json!({
            "step": state.step,
            "kind": kind.name(),
            "loss": value,
            "lr": lr,
        })
    )?;

    if state.step % config.eval_every_steps != 0 {
        return Ok(false);
    }
    let f1 = with_ema(ema, store, |store| {
        evaluate_f1(model, store, vocab, validation, EVAL_BATCH)
    })?;
    evals.push((state.step, f1));
    let improved = match state.best_f1 {
        None => true,
        Some(best) => f1 > best + config.min_delta_f1,
    };
    if improved {
        state.best_f1 = Some(f1);
        state.evals_since_improvement = 0;
        with_ema(ema, store, |store| {
            save_checkpoint(
                best_dir,
                store,
                vocab,
                config,
                state,
                model_seed,
                Some(&*optimizer),
            )
        })?;
    } else {
        state.evals_since_improvement += 1;
    }
    writeln!(
        log,
        "{}",
        serde_json::json!({
            "step": state.step,
            "kind": "eval",
            "f1": f1,
            "best": state.best_f1,
            "stale_evals": state.evals_since_improvement,
        })
    )?;
    Ok(state.evals_since_improvement >= config.patience_evals)
}

/// Run `f` with the EMA weights swapped in (a no-op when EMA is off).
fn with_ema<R>(
    ema: &mut Option<Ema>,
    store: &mut ParamStore<f32>,
    f: impl FnOnce(&mut ParamStore<f32>) -> Result<R, TrainError>,
) -> Result<R, TrainError> {
    if let Some(e) = ema.as_mut() {
        e.swap(store);
        let out = f(store);
        e.swap(store);
        out
    } else {
        f(store)
    }
}
