//! Pretrained word-embedding loader for "word v1 .. vD" text files.

use std::collections::HashSet;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CorpusError;
use crate::vocab::{Vocabulary, PAD_ID};

#[derive(Debug)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    /// Row-major `[n_words × dim]`, indexed by word id.
    pub rows: Vec<f64>,
    /// Vocabulary words copied verbatim from the file.
    pub found: usize,
    /// File lines dropped because they could not be parsed.
    pub skipped_lines: usize,
}

/// Collect the word column of an embedding file (for `build_vocab`).
pub fn embedding_vocab<R: BufRead>(reader: R) -> Result<HashSet<String>, CorpusError> {
    let mut words = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(w) = line.split_whitespace().next() {
            words.insert(w.to_string());
        }
    }
    Ok(words)
}

/// Load pretrained vectors for `vocab`'s words. Found words are copied
/// verbatim (falling back to the lowercased form when the cased one is
/// missing); the rest, UNK included, draw from a seeded uniform
/// [-0.25, 0.25]; the PAD row stays zero. Header-ish or unparseable lines
/// are skipped and counted; a well-formed vector of the wrong width is a
/// hard error.
pub fn load_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingMatrix, CorpusError> {
    let n = vocab.n_words();
    let mut rows = vec![0f64; n * dim];
    let mut have = vec![false; n];
    have[PAD_ID] = true; // PAD keeps its zeros

    // Vocabulary words we still want, including as lowercase fallbacks.
    // Exact-case hits always win over a fallback.
    let mut exact: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    let mut lower: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (id, w) in vocab.words().iter().enumerate() {
        exact.insert(w.as_str(), id);
        lower.entry(w.to_lowercase()).or_insert(id);
    }

    let mut skipped_lines = 0usize;
    let mut from_lower: Vec<bool> = vec![false; n];
    for line in reader.lines() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            if values.len() >= 2 && values.iter().all(|v| v.parse::<f64>().is_ok()) {
                return Err(CorpusError::DimMismatch {
                    expected: dim,
                    found: values.len(),
                });
            }
            skipped_lines += 1;
            continue;
        }
        let parse = |vals: &[&str]| -> Option<Vec<f64>> {
            vals.iter().map(|v| v.parse::<f64>().ok()).collect()
        };
        let target = exact.get(word).copied();
        let fallback = lower.get(word).copied();
        let Some(id) = target.or(fallback) else {
            continue;
        };
        let is_exact = target.is_some();
        // A lowercase fallback never displaces an exact-case hit.
        if !is_exact && have[id] && !from_lower[id] {
            continue;
        }
        match parse(&values) {
            Some(vec) => {
                rows[id * dim..(id + 1) * dim].copy_from_slice(&vec);
                have[id] = true;
                from_lower[id] = !is_exact;
            }
            None => skipped_lines += 1,
        }
    }

    let found = have.iter().skip(1).filter(|&&h| h).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in 0..n {
        if !have[id] {
            for v in &mut rows[id * dim..(id + 1) * dim] {
                *v = rng.random_range(-0.25..0.25);
            }
        }
    }
    Ok(EmbeddingMatrix {
        dim,
        rows,
        found,
        skipped_lines,
    })
}
