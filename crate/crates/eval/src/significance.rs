//! Two-sided significance tests over per-seed metric runs.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::EvalError;
use crate::stats::{mean, sample_variance};

/// When a + b have at most this many runs, permutation tests enumerate every
/// assignment; above it they draw `RESAMPLES` seeded resamples.
pub const EXHAUSTIVE_LIMIT: usize = 12;
pub const RESAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    WelchT,
    Permutation,
}

#[derive(Clone, Copy, Debug)]
pub struct SignificanceResult {
    pub requested: Method,
    /// Method actually applied; differs from `requested` only on the
    /// degenerate-variance fallback from Welch to permutation.
    pub used: Method,
    pub paired: bool,
    /// t statistic when Welch ran.
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub degenerate_variance: bool,
    /// Permutation p came from full enumeration rather than resampling.
    pub exhaustive: Option<bool>,
}

pub fn significance(
    a: &[f64],
    b: &[f64],
    method: Method,
    paired: bool,
    seed: u64,
) -> Result<SignificanceResult, EvalError> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(EvalError::TooFewRuns(n));
    }
    if paired && a.len() != b.len() {
        return Err(EvalError::UnpairedLengths(a.len(), b.len()));
    }
    match method {
        Method::Permutation => Ok(permutation(a, b, paired, seed, method, false)),
        Method::WelchT => match welch(a, b, paired) {
            Some((t, p)) => Ok(SignificanceResult {
                requested: method,
                used: Method::WelchT,
                paired,
                statistic: Some(t),
                p_value: p,
                degenerate_variance: false,
                exhaustive: None,
            }),
            // Zero variance leaves the t statistic undefined; the
            // permutation test still gives a meaningful answer.
            None => Ok(permutation(a, b, paired, seed, method, true)),
        },
    }
}

/// Welch's t; returns None when the variance term is zero (degenerate).
fn welch(a: &[f64], b: &[f64], paired: bool) -> Option<(f64, f64)> {
    let (t, df) = if paired {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let sd2 = sample_variance(&d);
        if sd2 == 0.0 {
            return None;
        }
        let n = d.len() as f64;
        (mean(&d) / (sd2 / n).sqrt(), n - 1.0)
    } else {
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (va, vb) = (sample_variance(a), sample_variance(b));
        let se2 = va / na + vb / nb;
        if se2 == 0.0 {
            return None;
        }
        // Welch–Satterthwaite degrees of freedom.
        let df = se2 * se2
            / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
        ((mean(a) - mean(b)) / se2.sqrt(), df)
    };
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Some((t, p.clamp(0.0, 1.0)))
}

fn permutation(
    a: &[f64],
    b: &[f64],
    paired: bool,
    seed: u64,
    requested: Method,
    degenerate: bool,
) -> SignificanceResult {
    let total = a.len() + b.len();
    let exhaustive = total <= EXHAUSTIVE_LIMIT;
    let p = match (paired, exhaustive) {
        (false, true) => perm_unpaired_exact(a, b),
        (false, false) => perm_unpaired_sampled(a, b, seed),
        (true, true) => perm_paired_exact(a, b),
        (true, false) => perm_paired_sampled(a, b, seed),
    };
    SignificanceResult {
        requested,
        used: Method::Permutation,
        paired,
        statistic: None,
        p_value: p,
        degenerate_variance: degenerate,
        exhaustive: Some(exhaustive),
    }
}

fn mean_of(pool: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| pool[i]).sum::<f64>() / idx.len() as f64
}

/// Exact unpaired permutation over all C(na+nb, na) relabelings. The
/// identity assignment is part of the enumeration, so p ≥ 1/count and
/// identical inputs give exactly 1.
fn perm_unpaired_exact(a: &[f64], b: &[f64]) -> f64 {
    let pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let obs = (mean(a) - mean(b)).abs();
    let mut hits = 0usize;
    let mut count = 0usize;
    for combo in (0..pool.len()).combinations(a.len()) {
        let in_a: Vec<usize> = combo;
        let sum_a: f64 = in_a.iter().map(|&i| pool[i]).sum();
        let sum_b: f64 = pool.iter().sum::<f64>() - sum_a;
        let d = (sum_a / a.len() as f64 - sum_b / b.len() as f64).abs();
        count += 1;
        if d >= obs - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / count as f64
}

fn perm_unpaired_sampled(a: &[f64], b: &[f64], seed: u64) -> f64 {
    let pool: Vec<f64> = a.iter().chain(b).copied().collect();
    let obs = (mean(a) - mean(b)).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..RESAMPLES {
        let pick = rand::seq::index::sample(&mut rng, pool.len(), a.len()).into_vec();
        let ma = mean_of(&pool, &pick);
        let sum: f64 = pool.iter().sum();
        let mb = (sum - pick.iter().map(|&i| pool[i]).sum::<f64>()) / b.len() as f64;
        if (ma - mb).abs() >= obs - 1e-12 {
            hits += 1;
        }
    }
    // +1 smoothing keeps the identity relabeling counted, so p > 0.
    (hits + 1) as f64 / (RESAMPLES + 1) as f64
}

/// Exact paired permutation: every sign assignment of the differences.
fn perm_paired_exact(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let obs = mean(&d).abs();
    let n = d.len();
    let mut hits = 0usize;
    for bits in 0u64..(1u64 << n) {
        let s: f64 = d
            .iter()
            .enumerate()
            .map(|(i, &v)| if bits >> i & 1 == 1 { -v } else { v })
            .sum();
        if (s / n as f64).abs() >= obs - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

fn perm_paired_sampled(a: &[f64], b: &[f64], seed: u64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let obs = mean(&d).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..RESAMPLES {
        let s: f64 = d
            .iter()
            .map(|&v| {
                if rand::Rng::random::<bool>(&mut rng) {
                    -v
                } else {
                    v
                }
            })
            .sum();
        if (s / d.len() as f64).abs() >= obs - 1e-12 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (RESAMPLES + 1) as f64
}
