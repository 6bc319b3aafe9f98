//! Padded batches over id-mapped sentences.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CorpusError;
use crate::sentence::{LabeledSentence, UnlabeledSentence};
use crate::vocab::{Vocabulary, PAD_ID};

/// Words longer than this keep only their first 32 characters.
pub const MAX_WORD_CHARS: usize = 32;

#[derive(Clone, Debug)]
pub struct Batch {
    pub size: usize,
    pub t_max: usize,
    pub c_max: usize,
    /// `[size × t_max]` word ids, PAD-filled.
    pub words: Vec<usize>,
    /// `[size × t_max × c_max]` char ids, PAD-filled.
    pub chars: Vec<usize>,
    /// `[size × t_max]` tag ids for labeled input; padding cells hold 0 and
    /// are excluded by the mask.
    pub tags: Option<Vec<usize>>,
    /// `[size × t_max]`, 1 for real tokens.
    pub mask: Vec<u8>,
    pub lengths: Vec<usize>,
    /// Position of each row in the original sentence slice.
    pub sentence_indices: Vec<usize>,
}

pub trait Sentence {
    fn tokens(&self) -> &[String];
    fn tags(&self) -> Option<&[String]> {
        None
    }
}

impl Sentence for LabeledSentence {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
    fn tags(&self) -> Option<&[String]> {
        Some(&self.tags)
    }
}

impl Sentence for UnlabeledSentence {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Chop sentences into padded batches. With `shuffle` the order is a
/// seeded permutation (deterministic per seed); otherwise file order. The
/// final batch may be smaller.
pub fn make_batches<S: Sentence>(
    sentences: &[S],
    vocab: &Vocabulary,
    batch_size: usize,
    seed: u64,
    shuffle: bool,
) -> Result<Vec<Batch>, CorpusError> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }

    let mut batches = Vec::with_capacity(sentences.len().div_ceil(batch_size));
    for group in order.chunks(batch_size) {
        batches.push(build_batch(sentences, group, vocab)?);
    }
    Ok(batches)
}

fn build_batch<S: Sentence>(
    sentences: &[S],
    group: &[usize],
    vocab: &Vocabulary,
) -> Result<Batch, CorpusError> {
    let size = group.len();
    let t_max = group
        .iter()
        .map(|&i| sentences[i].tokens().len())
        .max()
        .unwrap_or(0);
    let c_max = group
        .iter()
        .flat_map(|&i| sentences[i].tokens())
        .map(|w| w.chars().count().min(MAX_WORD_CHARS))
        .max()
        .unwrap_or(1)
        .max(1);

    let mut words = vec![PAD_ID; size * t_max];
    let mut chars = vec![PAD_ID; size * t_max * c_max];
    let mut mask = vec![0u8; size * t_max];
    let mut lengths = Vec::with_capacity(size);
    let labeled = group
        .iter()
        .all(|&i| sentences[i].tags().is_some());
    let mut tags = if labeled {
        Some(vec![0usize; size * t_max])
    } else {
        None
    };

    for (b, &si) in group.iter().enumerate() {
        let sent = &sentences[si];
        let toks = sent.tokens();
        lengths.push(toks.len());
        for (t, tok) in toks.iter().enumerate() {
            words[b * t_max + t] = vocab.word_id(tok);
            mask[b * t_max + t] = 1;
            for (c, ch) in tok.chars().take(MAX_WORD_CHARS).enumerate() {
                chars[(b * t_max + t) * c_max + c] = vocab.char_id(ch);
            }
        }
        if let (Some(tags), Some(sent_tags)) = (tags.as_mut(), sent.tags()) {
            for (t, tag) in sent_tags.iter().enumerate() {
                tags[b * t_max + t] = vocab.tag_id(tag)?;
            }
        }
    }

    Ok(Batch {
        size,
        t_max,
        c_max,
        words,
        chars,
        tags,
        mask,
        lengths,
        sentence_indices: group.to_vec(),
    })
}
