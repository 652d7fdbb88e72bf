//! Small JSON records: extraction requests, roll estimates and estimation
//! results.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use epiprep_core::estimator::{Branch, EstimationResult};
use epiprep_core::standard_match::RollEstimate;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestMode {
    Fixed,
}

/// Asks an extractor for the features of `image` described at one common
/// orientation. `out` is where the pipeline will look for the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub image: String,
    pub mode: RequestMode,
    pub angle_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExtractionRequest {
    pub fn fixed(image: impl Into<String>, angle_rad: f64) -> Self {
        Self { image: image.into(), mode: RequestMode::Fixed, angle_rad, out: None }
    }
}

/// Roll estimate and the branches it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollRecord {
    pub roll: Option<RollEstimate>,
    pub alpha_exp_deg: Option<f64>,
    pub branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub branch: Branch,
    pub angle_rad: f64,
}

/// Result of the estimate command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// Row-major.
    pub f: [f64; 9],
    pub inliers: Vec<usize>,
    pub support: usize,
    pub iterations: usize,
    pub branch: Branch,
    pub seed: u64,
    /// Support of every branch that ran, in input order.
    pub branch_support: Vec<(Branch, usize)>,
}

impl ResultRecord {
    pub fn new(r: &EstimationResult, branch_support: Vec<(Branch, usize)>) -> Self {
        Self {
            f: r.f,
            inliers: r.inliers.clone(),
            support: r.support,
            iterations: r.iterations,
            branch: r.branch,
            seed: r.seed,
            branch_support,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), RecordError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| RecordError::Json { path: path.into(), source: e })?;
    s.push('\n');
    fs::write(path, s).map_err(|e| RecordError::Io { path: path.into(), source: e })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RecordError> {
    let text = fs::read_to_string(path).map_err(|e| RecordError::Io { path: path.into(), source: e })?;
    serde_json::from_str(&text).map_err(|e| RecordError::Json { path: path.into(), source: e })
}

/// Reads a request file and rejects a non-finite angle or an empty image
/// name.
pub fn read_request(path: &Path) -> Result<ExtractionRequest, RecordError> {
    let r: ExtractionRequest = read_json(path)?;
    if r.image.is_empty() || !r.angle_rad.is_finite() {
        return Err(RecordError::Invalid { path: path.into(), message: format!("invalid request {r:?}") });
    }
    Ok(r)
}
