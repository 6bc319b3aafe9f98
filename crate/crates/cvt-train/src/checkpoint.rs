//! Checkpoints: a `meta.json` with config and loop state, the vocabulary
//! files, and a weight payload holding every parameter plus (optionally)
//! the optimizer's momentum buffers under `optim.v.*` ids.

use std::fs;
use std::path::Path;

use corpus::Vocabulary;
use encoder::CvtModel;
use ndiff::{load_payload, save_payload, ParamStore, PayloadEntry, SgdMomentum, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::{TrainConfig, TrainState};
use crate::error::TrainError;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
const VELOCITY_PREFIX: &str = "optim.v.";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub model_seed: u64,
    pub config: TrainConfig,
    pub state: TrainState,
}

pub struct LoadedCheckpoint {
    pub model: CvtModel,
    pub store: ParamStore<f32>,
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    pub state: TrainState,
    pub model_seed: u64,
    /// Momentum buffers in parameter order, when the checkpoint carried
    /// optimizer state.
    pub velocities: Option<Vec<Vec<f32>>>,
}

#[allow(clippy::too_many_arguments)]
pub fn save_checkpoint(
    dir: &Path,
    store: &ParamStore<f32>,
    vocab: &Vocabulary,
    config: &TrainConfig,
    state: &TrainState,
    model_seed: u64,
    optimizer: Option<&SgdMomentum<f32>>,
) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        model_seed,
        config: config.clone(),
        state: state.clone(),
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    vocab.to_files(dir)?;

    let mut entries: Vec<PayloadEntry> = store
        .iter()
        .map(|(_, p)| PayloadEntry {
            id: p.id.clone(),
            shape: p.value.shape().to_vec(),
            data: p.value.data().to_vec(),
        })
        .collect();
    if let Some(opt) = optimizer {
        for ((_, p), v) in store.iter().zip(opt.velocities()) {
            entries.push(PayloadEntry {
                id: format!("{VELOCITY_PREFIX}{}", p.id),
                shape: p.value.shape().to_vec(),
                data: v.clone(),
            });
        }
    }
    save_payload(dir, &entries)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<LoadedCheckpoint, TrainError> {
    let text = fs::read_to_string(dir.join(META_FILE))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| TrainError::CorruptCheckpoint("meta.json has no version".into()))?;
    if found != CHECKPOINT_VERSION as u64 {
        return Err(TrainError::CheckpointVersion {
            found: found.min(u32::MAX as u64) as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let meta: CheckpointMeta = serde_json::from_value(raw)?;
    meta.config.validate()?;

    let vocab = Vocabulary::from_files(dir)?;
    if meta.config.encoder.num_tags != vocab.n_tags() {
        return Err(TrainError::CorruptCheckpoint(format!(
            "config expects {} tags but vocabulary has {}",
            meta.config.encoder.num_tags,
            vocab.n_tags()
        )));
    }
    let (model, mut store) = CvtModel::new::<f32>(
        meta.config.encoder.clone(),
        vocab.n_words(),
        vocab.n_chars(),
        meta.model_seed,
    )?;

    let mut weights = std::collections::HashMap::new();
    let mut velocity_entries = std::collections::HashMap::new();
    for e in load_payload(dir)? {
        if let Some(name) = e.id.strip_prefix(VELOCITY_PREFIX) {
            velocity_entries.insert(name.to_string(), e);
        } else {
            weights.insert(e.id.clone(), e);
        }
    }

    let names: Vec<(ndiff::ParamId, String, usize)> = store
        .iter()
        .map(|(id, p)| (id, p.id.clone(), p.value.numel()))
        .collect();
    for (id, name, _) in &names {
        let e = weights.remove(name).ok_or_else(|| {
            TrainError::CorruptCheckpoint(format!("payload is missing tensor {name}"))
        })?;
        store.set_value(*id, Tensor::new(e.shape, e.data)?)?;
    }
    if let Some(stray) = weights.keys().next() {
        return Err(TrainError::CorruptCheckpoint(format!(
            "payload tensor {stray} does not match any model parameter"
        )));
    }

    let velocities = if velocity_entries.is_empty() {
        None
    } else {
        let mut out = Vec::with_capacity(names.len());
        for (_, name, numel) in &names {
            let e = velocity_entries.remove(name).ok_or_else(|| {
                TrainError::CorruptCheckpoint(format!("payload is missing velocity for {name}"))
            })?;
            if e.data.len() != *numel {
                return Err(TrainError::CorruptCheckpoint(format!(
                    "velocity for {name} has {} values, expected {numel}",
                    e.data.len()
                )));
            }
            out.push(e.data);
        }
        if let Some(stray) = velocity_entries.keys().next() {
            return Err(TrainError::CorruptCheckpoint(format!(
                "velocity {stray} does not match any model parameter"
            )));
        }
        Some(out)
    };

    Ok(LoadedCheckpoint {
        model,
        store,
        vocab,
        config: meta.config,
        state: meta.state,
        model_seed: meta.model_seed,
        velocities,
    })
}
