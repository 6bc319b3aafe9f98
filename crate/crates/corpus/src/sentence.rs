//! Sentence types and the CoNLL / one-sentence-per-line readers.

use std::io::BufRead;

use crate::error::CorpusError;
use crate::spans::is_valid_tag;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnlabeledSentence {
    pub tokens: Vec<String>,
}

/// Read CoNLL-style data: token in the first column, tag in the last,
/// blank lines between sentences, `-DOCSTART-` lines skipped. Tags are
/// normalized to IOB2 on the way in: an `I-` that opens a chunk becomes
/// `B-` (IOB1 files become canonical without further ceremony).
pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut prev_label: Option<String> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !tokens.is_empty() {
                sentences.push(LabeledSentence {
                    tokens: std::mem::take(&mut tokens),
                    tags: std::mem::take(&mut tags),
                });
            }
            prev_label = None;
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        if cols.len() < 2 {
            return Err(CorpusError::Parse {
                line: lineno,
                msg: format!("expected token and tag columns, got {:?}", trimmed),
            });
        }
        let token = cols[0];
        let tag = *cols.last().unwrap();
        if !is_valid_tag(tag) {
            return Err(CorpusError::Parse {
                line: lineno,
                msg: format!("invalid IOB tag '{tag}'"),
            });
        }
        let tag = match tag.split_once('-') {
            Some(("I", label)) if prev_label.as_deref() != Some(label) => {
                format!("B-{label}")
            }
            _ => tag.to_string(),
        };
        prev_label = tag.split_once('-').map(|(_, l)| l.to_string());
        tokens.push(token.to_string());
        tags.push(tag);
    }
    if !tokens.is_empty() {
        sentences.push(LabeledSentence { tokens, tags });
    }
    Ok(sentences)
}

/// Serialize sentences back to "token tag" lines with blank separators;
/// reading the result reproduces the input exactly (it is already IOB2).
pub fn write_conll(sentences: &[LabeledSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push(' ');
            out.push_str(tag);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// One whitespace-tokenized sentence per line; blank lines skipped; at
/// most `max_sentences` returned.
pub fn read_unlabeled<R: BufRead>(
    reader: R,
    max_sentences: usize,
) -> Result<Vec<UnlabeledSentence>, CorpusError> {
    let mut sentences = Vec::new();
    for line in reader.lines() {
        if sentences.len() >= max_sentences {
            break;
        }
        let line = line?;
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            sentences.push(UnlabeledSentence { tokens });
        }
    }
    Ok(sentences)
}
