//! IOB2 tags <-> labeled spans.

use std::collections::BTreeSet;

use crate::error::CorpusError;

/// Inclusive token range carrying a chunk label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Split a tag into its prefix and label. `O` has no label.
fn parse_tag(tag: &str) -> Result<(char, &str), CorpusError> {
    if tag == "O" {
        return Ok(('O', ""));
    }
    match tag.split_once('-') {
        Some((p @ ("B" | "I"), label)) if !label.is_empty() => {
            Ok((p.chars().next().unwrap(), label))
        }
        _ => Err(CorpusError::InvalidTag(tag.to_string())),
    }
}

/// True for `O`, `B-<label>`, `I-<label>`.
pub fn is_valid_tag(tag: &str) -> bool {
    parse_tag(tag).is_ok()
}

/// Extract maximal chunks from an IOB2 sequence. An `I-` continuing a
/// different label than the open chunk is invalid here (the readers
/// normalize such input first).
pub fn tags_to_spans(tags: &[String]) -> Result<BTreeSet<Span>, CorpusError> {
    let mut spans = BTreeSet::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let (prefix, label) = parse_tag(tag)?;
        match prefix {
            'B' => {
                if let Some((start, lab)) = open.take() {
                    spans.insert(Span {
                        start,
                        end: i - 1,
                        label: lab.to_string(),
                    });
                }
                open = Some((i, label));
            }
            'I' => match open {
                Some((_, lab)) if lab == label => {}
                _ => return Err(CorpusError::InvalidTag(tag.clone())),
            },
            _ => {
                if let Some((start, lab)) = open.take() {
                    spans.insert(Span {
                        start,
                        end: i - 1,
                        label: lab.to_string(),
                    });
                }
            }
        }
    }
    if let Some((start, lab)) = open {
        spans.insert(Span {
            start,
            end: tags.len() - 1,
            label: lab.to_string(),
        });
    }
    Ok(spans)
}

/// Inverse of [`tags_to_spans`]: write `B-`/`I-` runs over an all-`O`
/// sequence. Spans must be disjoint and inside `[0, length)`.
pub fn spans_to_tags(
    spans: &BTreeSet<Span>,
    length: usize,
) -> Result<Vec<String>, CorpusError> {
    let mut tags = vec!["O".to_string(); length];
    let mut taken = vec![false; length];
    for span in spans {
        if span.start > span.end || span.end >= length {
            return Err(CorpusError::SpanOutOfRange {
                start: span.start,
                end: span.end,
                len: length,
            });
        }
        for i in span.start..=span.end {
            if taken[i] {
                return Err(CorpusError::OverlappingSpans(
                    span.start, span.end, i, i,
                ));
            }
            taken[i] = true;
            tags[i] = if i == span.start {
                format!("B-{}", span.label)
            } else {
                format!("I-{}", span.label)
            };
        }
    }
    Ok(tags)
}

/// Rewrite a possibly loose IOB sequence into canonical IOB2: an `I-` that
/// opens a chunk (after `O`, start, or a different label) becomes `B-`.
/// Malformed tag strings become `O`. Model output is repaired with this
/// before scoring, matching conlleval's lenient treatment.
pub fn iob2_repair(tags: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev_label: Option<String> = None;
    for tag in tags {
        match parse_tag(tag) {
            Ok(('O', _)) | Err(_) => {
                out.push("O".to_string());
                prev_label = None;
            }
            Ok(('B', label)) => {
                out.push(format!("B-{label}"));
                prev_label = Some(label.to_string());
            }
            Ok((_, label)) => {
                if prev_label.as_deref() == Some(label) {
                    out.push(format!("I-{label}"));
                } else {
                    out.push(format!("B-{label}"));
                    prev_label = Some(label.to_string());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn figure_example_extracts_the_ote() {
        let spans = tags_to_spans(&tags(&["O", "B-OTE", "I-OTE"])).unwrap();
        assert_eq!(spans.len(), 1);
        let s = spans.iter().next().unwrap();
        assert_eq!((s.start, s.end, s.label.as_str()), (1, 2, "OTE"));
    }

    #[test]
    fn all_outside_is_empty() {
        assert!(tags_to_spans(&tags(&["O", "O"])).unwrap().is_empty());
    }

    #[test]
    fn adjacent_b_tags_open_two_chunks() {
        let spans = tags_to_spans(&tags(&["B-PER", "B-PER"])).unwrap();
        let got: Vec<(usize, usize)> = spans.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn spans_to_tags_inverse_examples() {
        let mut set = BTreeSet::new();
        set.insert(Span { start: 1, end: 2, label: "OTE".into() });
        assert_eq!(spans_to_tags(&set, 3).unwrap(), tags(&["O", "B-OTE", "I-OTE"]));

        assert_eq!(spans_to_tags(&BTreeSet::new(), 2).unwrap(), tags(&["O", "O"]));

        let mut adj = BTreeSet::new();
        adj.insert(Span { start: 0, end: 0, label: "A".into() });
        adj.insert(Span { start: 1, end: 1, label: "A".into() });
        assert_eq!(spans_to_tags(&adj, 2).unwrap(), tags(&["B-A", "B-A"]));
    }

    #[test]
    fn overlap_and_range_are_rejected() {
        let mut set = BTreeSet::new();
        set.insert(Span { start: 0, end: 2, label: "A".into() });
        set.insert(Span { start: 2, end: 3, label: "B".into() });
        assert!(matches!(
            spans_to_tags(&set, 5),
            Err(CorpusError::OverlappingSpans(..))
        ));

        let mut far = BTreeSet::new();
        far.insert(Span { start: 1, end: 4, label: "A".into() });
        assert!(matches!(
            spans_to_tags(&far, 3),
            Err(CorpusError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn bad_tags_error_in_strict_mode_and_repair_leniently() {
        assert!(tags_to_spans(&tags(&["B-"])).is_err());
        assert!(tags_to_spans(&tags(&["X-OTE"])).is_err());
        assert!(tags_to_spans(&tags(&["O", "I-OTE"])).is_err());

        assert_eq!(
            iob2_repair(&tags(&["O", "I-OTE", "I-OTE", "I-LOC", "junk"])),
            tags(&["O", "B-OTE", "I-OTE", "B-LOC", "O"])
        );
    }
}
