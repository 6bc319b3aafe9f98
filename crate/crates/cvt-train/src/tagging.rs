//! Inference: batch sentences, take the primary head's argmax per token,
//! and repair the result into valid IOB2.

use corpus::{iob2_repair, make_batches, Sentence, Vocabulary};
use encoder::{CvtModel, Mode, View};
use ndiff::{ParamStore, Real, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TrainError;

pub fn tag_sentences<S: Sentence, T: Real>(
    model: &CvtModel,
    store: &ParamStore<T>,
    vocab: &Vocabulary,
    sentences: &[S],
    batch_size: usize,
) -> Result<Vec<Vec<String>>, TrainError> {
    let mut out = vec![Vec::new(); sentences.len()];
    if sentences.is_empty() {
        return Ok(out);
    }
    let k = vocab.n_tags();
    for batch in make_batches(sentences, vocab, batch_size, 0, false)? {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let states = model.encode(&mut tape, store, &batch, 0.0, Mode::Eval, &mut rng)?;
        let probs = model.predict(&mut tape, store, &states, View::Full, 0.0, Mode::Eval, &mut rng)?;
        let data = tape.value(probs).data().to_vec();
        for (row, &orig) in batch.sentence_indices.iter().enumerate() {
            let mut tags = Vec::with_capacity(batch.lengths[row]);
            for t in 0..batch.lengths[row] {
                let cell = row * batch.t_max + t;
                let dist = &data[cell * k..(cell + 1) * k];
                tags.push(vocab.tag(argmax(dist)).to_string());
            }
            out[orig] = iob2_repair(&tags);
        }
    }
    Ok(out)
}

/// First index of the maximum, so tag-id order breaks ties deterministically.
fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v.as_f64() > row[best].as_f64() {
            best = i;
        }
    }
    best
}

/// Span F1 of the model on labeled sentences, via the shared scorer.
pub fn evaluate_f1(
    model: &CvtModel,
    store: &ParamStore<f32>,
    vocab: &Vocabulary,
    sentences: &[corpus::LabeledSentence],
    batch_size: usize,
) -> Result<f64, TrainError> {
    let pred = tag_sentences(model, store, vocab, sentences, batch_size)?;
    let gold: Vec<Vec<String>> = sentences.iter().map(|s| s.tags.clone()).collect();
    let report = eval::score(&pred, &gold)?;
    Ok(report.overall.f1())
}
