//! Span-level evaluation for sequence tagging: exact-match chunk scoring
//! in the conlleval style, aggregation of repeated runs, and significance
//! tests between systems.

pub mod error;
pub mod score;
pub mod significance;
pub mod stats;

pub use error::EvalError;
pub use score::{round2, score, Counts, EvalReport};
pub use significance::{significance, Method, SignificanceResult};
pub use stats::{aggregate, RunAggregate};
