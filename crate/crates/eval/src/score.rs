//! Span-exact scoring with conlleval semantics.

use std::collections::BTreeMap;

use corpus::{iob2_repair, tags_to_spans};
use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Round to 2 decimals, half away from zero, for display parity with
/// conlleval-style output.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl Counts {
    // An empty prediction against an empty gold is vacuously perfect, so
    // self-scoring any corpus (even one with no chunks) reports 100.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            if self.gold == 0 { 100.0 } else { 0.0 }
        } else {
            100.0 * self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            if self.predicted == 0 { 100.0 } else { 0.0 }
        } else {
            100.0 * self.correct as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Counts,
    /// Per-label counts, sorted by label.
    pub labels: BTreeMap<String, Counts>,
    pub sentences: usize,
    pub tokens: usize,
}

/// Micro-averaged exact-match span scoring. Predictions are first repaired
/// to IOB2 (an `I-` opening a chunk reads as `B-`), the way conlleval
/// tolerates them; gold must already be valid.
pub fn score(pred: &[Vec<String>], gold: &[Vec<String>]) -> Result<EvalReport, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::CorpusMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    let mut overall = Counts::default();
    let mut labels: BTreeMap<String, Counts> = BTreeMap::new();
    let mut tokens = 0usize;
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(EvalError::LengthMismatch {
                index: i,
                pred: p.len(),
                gold: g.len(),
            });
        }
        tokens += g.len();
        let p_spans = tags_to_spans(&iob2_repair(p))?;
        let g_spans = tags_to_spans(g)?;
        for s in &p_spans {
            overall.predicted += 1;
            labels.entry(s.label.clone()).or_default().predicted += 1;
        }
        for s in &g_spans {
            overall.gold += 1;
            labels.entry(s.label.clone()).or_default().gold += 1;
        }
        for s in p_spans.intersection(&g_spans) {
            overall.correct += 1;
            labels.entry(s.label.clone()).or_default().correct += 1;
        }
    }
    Ok(EvalReport {
        overall,
        labels,
        sentences: gold.len(),
        tokens,
    })
}

impl EvalReport {
    /// conlleval-shaped text: a totals line, the overall metrics, then one
    /// line per label.
    pub fn render(&self) -> String {
        let mut out = format!(
            "processed {} tokens with {} phrases; found: {} phrases; correct: {}.\n",
            self.tokens, self.overall.gold, self.overall.predicted, self.overall.correct
        );
        out.push_str(&format!(
            "precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}\n",
            round2(self.overall.precision()),
            round2(self.overall.recall()),
            round2(self.overall.f1()),
        ));
        for (label, c) in &self.labels {
            out.push_str(&format!(
                "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}\n",
                label,
                round2(c.precision()),
                round2(c.recall()),
                round2(c.f1()),
                c.predicted,
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_match_is_all_hundred() {
        let gold = vec![tags(&["O", "B-OTE", "I-OTE"]), tags(&["B-PER", "O"])];
        let r = score(&gold, &gold).unwrap();
        assert_eq!(r.overall.precision(), 100.0);
        assert_eq!(r.overall.recall(), 100.0);
        assert_eq!(r.overall.f1(), 100.0);
        assert_eq!(r.labels["OTE"].f1(), 100.0);
        assert_eq!(r.labels["PER"].f1(), 100.0);
    }

    #[test]
    fn half_recall_example() {
        // pred {(0,1,PER)}, gold {(0,1,PER),(3,3,LOC)}.
        let pred = vec![tags(&["B-PER", "I-PER", "O", "O"])];
        let gold = vec![tags(&["B-PER", "I-PER", "O", "B-LOC"])];
        let r = score(&pred, &gold).unwrap();
        assert_eq!(r.overall.predicted, 1);
        assert_eq!(r.overall.gold, 2);
        assert_eq!(r.overall.correct, 1);
        assert_eq!(r.overall.precision(), 100.0);
        assert_eq!(r.overall.recall(), 50.0);
        assert_eq!(round2(r.overall.f1()), 66.67);
    }

    #[test]
    fn wrong_label_right_boundaries_is_incorrect() {
        let pred = vec![tags(&["B-LOC", "I-LOC"])];
        let gold = vec![tags(&["B-PER", "I-PER"])];
        let r = score(&pred, &gold).unwrap();
        assert_eq!(r.overall.correct, 0);
        assert_eq!(r.overall.f1(), 0.0);
    }

    #[test]
    fn length_mismatch_names_the_sentence() {
        let pred = vec![tags(&["O"]), tags(&["O", "O"])];
        let gold = vec![tags(&["O"]), tags(&["O"])];
        match score(&pred, &gold) {
            Err(EvalError::LengthMismatch { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected length mismatch, got {other:?}"),
        }
    }

    #[test]
    fn invalid_predictions_are_repaired_like_conlleval() {
        let pred = vec![tags(&["I-PER", "I-PER"])];
        let gold = vec![tags(&["B-PER", "I-PER"])];
        let r = score(&pred, &gold).unwrap();
        assert_eq!(r.overall.correct, 1);
    }

    #[test]
    fn reordering_sentences_does_not_change_scores() {
        let pred = vec![tags(&["B-A", "O"]), tags(&["O", "B-B"])];
        let gold = vec![tags(&["B-A", "O"]), tags(&["B-B", "O"])];
        let r1 = score(&pred, &gold).unwrap();
        let pred_r = vec![pred[1].clone(), pred[0].clone()];
        let gold_r = vec![gold[1].clone(), gold[0].clone()];
        let r2 = score(&pred_r, &gold_r).unwrap();
        assert_eq!(r1.overall.correct, r2.overall.correct);
        assert_eq!(r1.overall.f1(), r2.overall.f1());
    }

    #[test]
    fn render_mentions_counts_and_percentages() {
        let pred = vec![tags(&["B-PER", "I-PER", "O", "O"])];
        let gold = vec![tags(&["B-PER", "I-PER", "O", "B-LOC"])];
        let text = score(&pred, &gold).unwrap().render();
        assert!(text.contains("processed 4 tokens with 2 phrases"), "{text}");
        assert!(text.contains("found: 1 phrases; correct: 1."), "{text}");
        assert!(text.contains("FB1:  66.67"), "{text}");
        assert!(text.contains("LOC"), "{text}");
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round2(66.666_666), 66.67);
        assert_eq!(round2(0.125), 0.13);
        assert_eq!(round2(-0.125), -0.13);
        assert_eq!(round2(80.084), 80.08);
        assert_eq!(round2(0.094), 0.09);
    }
}
