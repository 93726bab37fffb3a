//! Canonical JSON and the versioned model file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Vocabulary};
use crate::error::{Error, Result};
use crate::learners::TrainedModel;

pub const MODEL_FORMAT_VERSION: u64 = 1;

/// Pretty-printed JSON with object keys sorted and floats written in their
/// shortest round-trip form.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value).map_err(|e| Error::json("serialize", e))?;
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::json("serialize", e))?;
    text.push('\n');
    Ok(text)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a dataset's canonical serialization.
pub fn fingerprint(dataset: &Dataset) -> Result<String> {
    Ok(sha256_hex(canonical_json(dataset)?.as_bytes()))
}

/// Hash of the vocabulary and venue list: two datasets with equal values can
/// be scored by the same model.
pub fn feature_space_fingerprint(vocabulary: &Vocabulary, venues: &[String]) -> Result<String> {
    let value = serde_json::json!({ "fields": vocabulary.fields(), "venues": venues });
    Ok(sha256_hex(canonical_json(&value)?.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u64,
    /// RFC 3339 time taken from `SOURCE_DATE_EPOCH`; absent otherwise so that
    /// identical runs produce identical files.
    pub created_at: Option<String>,
    pub feature_space_fingerprint: String,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(model: TrainedModel) -> Result<Self> {
        Ok(ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            created_at: source_date(),
            feature_space_fingerprint: feature_space_fingerprint(&model.vocabulary, &model.venues)?,
            model,
        })
    }
}

fn source_date() -> Option<String> {
    let secs: u64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    let t = std::time::UNIX_EPOCH + std::time::Duration::from_secs(secs);
    Some(humantime::format_rfc3339_seconds(t).to_string())
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    canonical_json(&ModelFile::new(model.clone())?)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, model_to_json(model)?.as_bytes())
}

pub fn model_from_json(text: &str) -> Result<ModelFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
    let found = value.get("format_version").and_then(Value::as_u64).unwrap_or(0);
    if found != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::json("model", e))?;
    let expected = feature_space_fingerprint(&file.model.vocabulary, &file.model.venues)?;
    if expected != file.feature_space_fingerprint {
        return Err(Error::InvalidInput("model feature-space fingerprint does not match its contents".into()));
    }
    Ok(file)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = crate::io::read_to_string(path)?;
    model_from_json(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::json(path.display().to_string(), source),
        other => other,
    })
}

/// Warning text when `dataset` lives in a different feature space from the
/// model (different vocabulary or venue list). Also logged.
pub fn check_feature_space(file: &ModelFile, dataset: &Dataset) -> Result<Option<String>> {
    let found = feature_space_fingerprint(&dataset.vocabulary, &dataset.venues)?;
    if found == file.feature_space_fingerprint {
        return Ok(None);
    }
    let msg = format!(
        "dataset feature space {} differs from model feature space {}; inputs will be re-projected",
        &found[..12],
        &file.feature_space_fingerprint[..12]
    );
    log::warn!("{msg}");
    Ok(Some(msg))
}
