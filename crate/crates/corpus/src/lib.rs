//! Data ingestion for the tagging toolkit: CoNLL-style labeled text,
//! one-sentence-per-line unlabeled text, pretrained embeddings in GloVe
//! text format, vocabulary construction, IOB2 <-> span conversion, and
//! padded batch assembly.
//!
//! Everything here is a pure function of its inputs and seeds; readers
//! normalize tags to IOB2 so downstream code can assume the canonical
//! scheme.

pub mod batch;
pub mod embed;
pub mod error;
pub mod sentence;
pub mod spans;
pub mod vocab;

pub use batch::{make_batches, Batch, Sentence, MAX_WORD_CHARS};
pub use embed::{embedding_vocab, load_embeddings, EmbeddingMatrix};
pub use error::CorpusError;
pub use sentence::{read_conll, read_unlabeled, write_conll, LabeledSentence, UnlabeledSentence};
pub use spans::{iob2_repair, is_valid_tag, spans_to_tags, tags_to_spans, Span};
pub use vocab::{build_vocab, Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
