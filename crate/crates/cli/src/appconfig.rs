//! Run configuration: JSON file with a fixed schema, two presets, and
//! `--set key=value` overrides. Precedence is defaults < preset < file <
//! `--set`; unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use cvt_train::TrainConfig;
use encoder::EncoderConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// `paper` or `desk`; fills the train/encoder fields before the file's
    /// own values apply.
    pub preset: Option<String>,
    pub labeled: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub min_count: usize,
    /// Cap on unlabeled sentences read.
    pub max_unlabeled: Option<usize>,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            preset: None,
            labeled: None,
            unlabeled: None,
            validation: None,
            embeddings: None,
            min_count: 1,
            max_unlabeled: None,
            output_dir: PathBuf::from("run"),
            train: TrainConfig::default(),
        }
    }
}

const TOP_LEVEL_KEYS: &[&str] = &[
    "preset",
    "labeled",
    "unlabeled",
    "validation",
    "embeddings",
    "min_count",
    "max_unlabeled",
    "output_dir",
    "train",
];

fn preset_train(name: &str) -> Result<TrainConfig, CliError> {
    match name {
        "paper" => Ok(TrainConfig::paper()),
        "desk" => Ok(TrainConfig::desk()),
        other => Err(CliError::Config(format!(
            "unknown preset {other:?} (expected \"paper\" or \"desk\")"
        ))),
    }
}

/// Merge `overlay` into `base`: objects merge key-wise, anything else
/// replaces.
fn deep_merge(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_set(entry: &str) -> Result<(Vec<String>, serde_json::Value), CliError> {
    let (key, raw) = entry.split_once('=').ok_or_else(|| {
        CliError::Usage(format!("--set needs key=value, got {entry:?}"))
    })?;
    if key.is_empty() {
        return Err(CliError::Usage(format!("--set has empty key in {entry:?}")));
    }
    let mut path: Vec<String> = key.split('.').map(str::to_string).collect();
    // Bare train-config keys may omit the `train.` prefix, so
    // `--set mode=supervised_only` works as the short form.
    if !TOP_LEVEL_KEYS.contains(&path[0].as_str()) {
        path.insert(0, "train".to_string());
    }
    let value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    Ok((path, value))
}

fn set_path(root: &mut serde_json::Value, path: &[String], value: serde_json::Value) {
    let mut slot = root;
    for key in &path[..path.len() - 1] {
        if !slot.is_object() {
            *slot = serde_json::json!({});
        }
        slot = slot
            .as_object_mut()
            .unwrap()
            .entry(key.clone())
            .or_insert(serde_json::json!({}));
    }
    if !slot.is_object() {
        *slot = serde_json::json!({});
    }
    slot.as_object_mut()
        .unwrap()
        .insert(path.last().unwrap().clone(), value);
}

/// Build the fully resolved config for a run.
pub fn resolve(
    config_path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
) -> Result<AppConfig, CliError> {
    let file_value: serde_json::Value = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(CliError::file(p))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::json!({}),
    };
    if !file_value.is_object() {
        return Err(CliError::Config("config file must be a JSON object".into()));
    }

    let parsed_sets = sets
        .iter()
        .map(|s| parse_set(s))
        .collect::<Result<Vec<_>, _>>()?;

    // The preset may come from the file or from --set; it decides the
    // starting train config, so extract it first.
    let mut preset = match file_value.get("preset") {
        None | Some(serde_json::Value::Null) => None,
        Some(serde_json::Value::String(s)) => Some(s.clone()),
        Some(other) => {
            return Err(CliError::Config(format!(
                "preset must be a string, got {other}"
            )))
        }
    };
    for (path, value) in &parsed_sets {
        if path.as_slice() == ["preset"] {
            preset = match value {
                serde_json::Value::String(s) => Some(s.clone()),
                serde_json::Value::Null => None,
                other => {
                    return Err(CliError::Config(format!(
                        "preset must be a string, got {other}"
                    )))
                }
            };
        }
    }

    let mut base = AppConfig::default();
    if let Some(name) = &preset {
        base.train = preset_train(name)?;
        base.preset = Some(name.clone());
    }

    let mut merged = serde_json::to_value(&base).expect("config serializes");
    deep_merge(&mut merged, file_value);
    if let Some(s) = seed {
        set_path(&mut merged, &["train".into(), "seed".into()], s.into());
    }
    for (path, value) in parsed_sets {
        set_path(&mut merged, &path, value);
    }

    let cfg: AppConfig = serde_json::from_value(merged)
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.train.validate().map_err(CliError::from)?;
    cfg.train
        .encoder
        .validate_dims()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Dimensions-only validation for resolve time: `num_tags` is not known
/// until the tag vocabulary exists, so it is exempt here.
trait ValidateDims {
    fn validate_dims(&self) -> Result<(), encoder::EncoderError>;
}

impl ValidateDims for EncoderConfig {
    fn validate_dims(&self) -> Result<(), encoder::EncoderError> {
        let mut probe = self.clone();
        probe.num_tags = probe.num_tags.max(1);
        probe.validate()
    }
}
