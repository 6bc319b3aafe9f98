//! Vocabulary construction: words, characters, tags.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::CorpusError;
use crate::sentence::{LabeledSentence, UnlabeledSentence};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    word_ids: HashMap<String, usize>,
    chars: Vec<char>,
    char_ids: HashMap<char, usize>,
    tags: Vec<String>,
    tag_ids: HashMap<String, usize>,
}

fn ranked<T: Ord + Clone + std::hash::Hash>(counts: &HashMap<T, usize>) -> Vec<T> {
    let mut items: Vec<(&T, usize)> = counts.iter().map(|(k, &c)| (k, c)).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().map(|(k, _)| k.clone()).collect()
}

/// Build vocabularies from training data. Words kept: frequency ≥
/// `min_count` across labeled+unlabeled tokens, plus any training word the
/// embedding file knows regardless of count. Characters come from all
/// training tokens; tags from labeled data only. Ordering is frequency
/// descending, ties lexicographic, so construction is deterministic.
pub fn build_vocab(
    labeled: &[LabeledSentence],
    unlabeled: &[UnlabeledSentence],
    embedding_vocab: &HashSet<String>,
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    if labeled.is_empty() {
        return Err(CorpusError::EmptyLabeled);
    }
    let min_count = min_count.max(1);

    let mut word_counts: HashMap<String, usize> = HashMap::new();
    let mut char_counts: HashMap<char, usize> = HashMap::new();
    let mut tag_counts: HashMap<String, usize> = HashMap::new();
    let bump = |counts: &mut HashMap<char, usize>, token: &str| {
        for ch in token.chars() {
            *counts.entry(ch).or_insert(0) += 1;
        }
    };
    for s in labeled {
        for tok in &s.tokens {
            *word_counts.entry(tok.clone()).or_insert(0) += 1;
            bump(&mut char_counts, tok);
        }
        for tag in &s.tags {
            *tag_counts.entry(tag.clone()).or_insert(0) += 1;
        }
    }
    for s in unlabeled {
        for tok in &s.tokens {
            *word_counts.entry(tok.clone()).or_insert(0) += 1;
            bump(&mut char_counts, tok);
        }
    }

    let mut words = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    for w in ranked(&word_counts) {
        if word_counts[&w] >= min_count || embedding_vocab.contains(&w) {
            words.push(w);
        }
    }
    let mut chars = vec!['\u{0}', '\u{1}']; // placeholder glyphs for PAD/UNK slots
    chars.extend(ranked(&char_counts));
    let tags = ranked(&tag_counts);

    let word_ids = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let char_ids = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let tag_ids = tags
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        words,
        word_ids,
        chars,
        char_ids,
        tags,
        tag_ids,
    })
}

impl Vocabulary {
    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    /// Word id with UNK fallback.
    pub fn word_id(&self, w: &str) -> usize {
        self.word_ids.get(w).copied().unwrap_or(UNK_ID)
    }

    /// True only for words stored in the vocabulary itself.
    pub fn has_word(&self, w: &str) -> bool {
        self.word_ids.contains_key(w)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn tag_id(&self, t: &str) -> Result<usize, CorpusError> {
        self.tag_ids
            .get(t)
            .copied()
            .ok_or_else(|| CorpusError::UnknownTag(t.to_string()))
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Words in id order (including the PAD/UNK rows).
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Write words/chars/tags as three text files under `dir`.
    pub fn to_files(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("words.txt"), self.words.join("\n") + "\n")?;
        // Chars as hex codepoints: survives editors and the two reserved
        // placeholder slots.
        let chars: String = self
            .chars
            .iter()
            .map(|c| format!("{:x}\n", *c as u32))
            .collect();
        fs::write(dir.join("chars.txt"), chars)?;
        fs::write(dir.join("tags.txt"), self.tags.join("\n") + "\n")?;
        Ok(())
    }

    pub fn from_files(dir: &Path) -> Result<Self, CorpusError> {
        let words: Vec<String> = fs::read_to_string(dir.join("words.txt"))?
            .lines()
            .map(str::to_string)
            .collect();
        let mut chars = Vec::new();
        for (i, line) in fs::read_to_string(dir.join("chars.txt"))?.lines().enumerate() {
            let cp = u32::from_str_radix(line.trim(), 16).map_err(|_| CorpusError::Parse {
                line: i + 1,
                msg: format!("bad codepoint '{line}' in chars.txt"),
            })?;
            chars.push(char::from_u32(cp).ok_or_else(|| CorpusError::Parse {
                line: i + 1,
                msg: format!("invalid codepoint {cp:#x} in chars.txt"),
            })?);
        }
        let tags: Vec<String> = fs::read_to_string(dir.join("tags.txt"))?
            .lines()
            .map(str::to_string)
            .collect();
        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let char_ids = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let tag_ids = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            words,
            word_ids,
            chars,
            char_ids,
            tags,
            tag_ids,
        })
    }
}
