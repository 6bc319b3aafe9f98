//! Aggregation of repeated-run metrics.

use serde::Serialize;

use crate::error::EvalError;

#[derive(Clone, Debug, Serialize)]
pub struct RunAggregate {
    pub runs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); absent for a single run.
    pub std: Option<f64>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 denominator. Panics on fewer than 2 points;
/// callers gate on length.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn aggregate(runs: &[f64]) -> Result<RunAggregate, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::EmptyRuns);
    }
    let std = if runs.len() >= 2 {
        Some(sample_variance(runs).sqrt())
    } else {
        None
    };
    Ok(RunAggregate {
        runs: runs.to_vec(),
        mean: mean(runs),
        std,
    })
}

impl RunAggregate {
    /// `mean ± std` over n runs, or just the mean when n = 1.
    pub fn render(&self) -> String {
        match self.std {
            Some(s) => format!(
                "{:.2} \u{b1} {:.2} (n={})",
                crate::score::round2(self.mean),
                crate::score::round2(s),
                self.runs.len()
            ),
            None => format!("{:.2} (n=1)", crate::score::round2(self.mean)),
        }
    }
}
