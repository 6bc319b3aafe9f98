//! Central-difference verification of analytic gradients.
//!
//! The loss closure must be deterministic: called repeatedly against the
//! same store it has to rebuild the identical graph (fix any dropout seeds).

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::NdiffError;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

pub type LossFn<'a> = dyn Fn(&ParamStore<f64>) -> Result<(Tape<f64>, Var), NdiffError> + 'a;

#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    /// Parameter id, or group prefix for the grouped variant.
    pub name: String,
    /// Coordinates actually probed.
    pub coords: usize,
    pub max_abs: f64,
    pub max_rel: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max_rel))
    }

    pub fn ok(&self, tol: f64) -> bool {
        !self.entries.is_empty() && self.max_rel() < tol
    }
}

/// Check every trainable parameter separately, probing at most
/// `coords_per_param` seeded coordinates of each.
pub fn grad_check(
    store: &mut ParamStore<f64>,
    loss: &LossFn,
    eps: f64,
    coords_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport, NdiffError> {
    run(store, loss, eps, coords_per_param, seed, |id| id.to_string())
}

/// Check parameters in groups keyed by the id prefix before the first `.`,
/// probing at most `coords_per_group` coordinates spread across each group.
/// Much cheaper than [`grad_check`] when a model has many small tensors.
pub fn grad_check_grouped(
    store: &mut ParamStore<f64>,
    loss: &LossFn,
    eps: f64,
    coords_per_group: usize,
    seed: u64,
) -> Result<GradCheckReport, NdiffError> {
    run(store, loss, eps, coords_per_group, seed, |id| {
        id.split('.').next().unwrap_or(id).to_string()
    })
}

fn eval(store: &ParamStore<f64>, loss: &LossFn) -> Result<f64, NdiffError> {
    let (tape, var) = loss(store)?;
    let v = tape.value(var);
    if v.numel() != 1 {
        return Err(NdiffError::NonScalarLoss { numel: v.numel() });
    }
    let x = v.item();
    if !x.is_finite() {
        return Err(NdiffError::NonFiniteLoss);
    }
    Ok(x)
}

fn run(
    store: &mut ParamStore<f64>,
    loss: &LossFn,
    eps: f64,
    coords_per_group: usize,
    seed: u64,
    group_of: impl Fn(&str) -> String,
) -> Result<GradCheckReport, NdiffError> {
    if eps <= 0.0 {
        return Err(NdiffError::InvalidArgument {
            kernel: "grad_check",
            msg: format!("eps must be positive, got {}", eps),
        });
    }

    // Analytic pass.
    store.zero_grads();
    let (tape, var) = loss(store)?;
    if tape.value(var).numel() != 1 {
        return Err(NdiffError::NonScalarLoss {
            numel: tape.value(var).numel(),
        });
    }
    if !tape.value(var).item().is_finite() {
        return Err(NdiffError::NonFiniteLoss);
    }
    tape.backward(var, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|(_, p)| p.grad.clone()).collect();
    drop(tape);

    // Group trainable params, preserving creation order inside a group.
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, (_, p)) in store.iter().enumerate() {
        if p.trainable {
            groups.entry(group_of(&p.id)).or_default().push(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (name, members) in groups {
        let total: usize = members
            .iter()
            .map(|&i| store.get(ParamId(i)).value.numel())
            .sum();
        let amount = coords_per_group.min(total);
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, total, amount).into_vec();
        picks.sort_unstable();

        let mut max_abs = 0f64;
        let mut max_rel = 0f64;
        for flat in picks {
            // Map the flat offset to (parameter, coordinate).
            let mut off = flat;
            let mut pi = members[0];
            for &i in &members {
                let n = store.get(ParamId(i)).value.numel();
                if off < n {
                    pi = i;
                    break;
                }
                off -= n;
            }

            let orig = store.get(ParamId(pi)).value.data()[off];
            nudge(store, pi, off, orig + eps);
            let plus = eval(store, loss)?;
            nudge(store, pi, off, orig - eps);
            let minus = eval(store, loss)?;
            nudge(store, pi, off, orig);

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][off];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(1e-8);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        entries.push(GradCheckEntry {
            name,
            coords: amount,
            max_abs,
            max_rel,
        });
    }
    Ok(GradCheckReport { entries })
}

fn nudge(store: &mut ParamStore<f64>, pi: usize, off: usize, v: f64) {
    store.get_mut(ParamId(pi)).value.make_mut()[off] = v;
}
