//! Decision-tree model files (JSON).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use epiprep_core::dtree::{ModelLoadError, TreeModel, MODEL_FORMAT};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Load { path: PathBuf, source: ModelLoadError },
}

pub fn model_to_json(model: &TreeModel) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("tree models always serialize");
    s.push('\n');
    s
}

/// Parses and validates a model. The format tag is checked before the
/// structure so a future version is reported as such.
pub fn model_from_json(text: &str) -> Result<TreeModel, Result<ModelLoadError, serde_json::Error>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(Err)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(MODEL_FORMAT) => {}
        Some(other) => return Err(Ok(ModelLoadError::Version(other.to_string()))),
        None => return Err(Ok(ModelLoadError::Version(String::new()))),
    }
    let model: TreeModel = serde_json::from_value(value).map_err(Err)?;
    model.validate().map_err(Ok)?;
    Ok(model)
}

pub fn save_model(model: &TreeModel, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, model_to_json(model)).map_err(|e| ModelFileError::Io { path: path.into(), source: e })
}

pub fn load_model(path: &Path) -> Result<TreeModel, ModelFileError> {
    let text = fs::read_to_string(path).map_err(|e| ModelFileError::Io { path: path.into(), source: e })?;
    model_from_json(&text).map_err(|e| match e {
        Ok(source) => ModelFileError::Load { path: path.into(), source },
        Err(source) => ModelFileError::Json { path: path.into(), source },
    })
}
