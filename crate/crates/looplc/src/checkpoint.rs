//! Versioned JSON checkpoints.
//!
//! Weights, biases and the input standardisation are stored as base64 blobs
//! of little-endian `f64`, so a reload reproduces forward passes bit for bit.
//! The problem the model was trained on is embedded, together with the
//! SHA-256 of its canonical JSON.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use looplc_core::neural::{MlpModel, OutputActivation};
use looplc_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::format::ProblemFile;

pub const CHECKPOINT_FORMAT: &str = "looplc-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBlob {
    pub rows: usize,
    pub cols: usize,
    /// Column-major.
    pub weights: String,
    pub bias: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub mode: String,
    /// Interior finder used for `u_o`: `lp` or `bfs`.
    pub interior: String,
    pub epoch: usize,
    pub seed: u64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub output_activation: String,
    pub layers: Vec<LayerBlob>,
    pub input_shift: String,
    pub input_scale: String,
    pub problem_hash: String,
    pub problem: ProblemFile,
    pub metadata: Metadata,
}

pub fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64(what: &str, blob: &str, expected: usize) -> AppResult<Vec<f64>> {
    let bytes = STANDARD
        .decode(blob)
        .map_err(|e| AppError::CorruptCheckpoint(format!("{what}: {e}")))?;
    if bytes.len() != 8 * expected {
        return Err(AppError::CorruptCheckpoint(format!(
            "{what}: {} bytes, expected {}",
            bytes.len(),
            8 * expected
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Hex SHA-256 of the compact JSON of a problem file.
pub fn problem_hash(problem: &ProblemFile) -> AppResult<String> {
    let bytes = serde_json::to_vec(problem).map_err(|e| AppError::Format(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Checkpoint {
    pub fn new(model: &MlpModel, problem: ProblemFile, metadata: Metadata) -> AppResult<Self> {
        let layers = model
            .weights
            .iter()
            .zip(&model.biases)
            .map(|(w, b)| LayerBlob {
                rows: w.nrows(),
                cols: w.ncols(),
                weights: encode_f64(w.as_slice()),
                bias: encode_f64(b.as_slice()),
            })
            .collect();
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layer_dims: model.layer_dims.clone(),
            output_activation: model.output_activation.as_str().into(),
            layers,
            input_shift: encode_f64(model.input_shift.as_slice()),
            input_scale: encode_f64(model.input_scale.as_slice()),
            problem_hash: problem_hash(&problem)?,
            problem,
            metadata,
        })
    }

    pub fn model(&self) -> AppResult<MlpModel> {
        let act = OutputActivation::from_name(&self.output_activation)
            .ok_or_else(|| AppError::CorruptCheckpoint(format!("unknown activation `{}`", self.output_activation)))?;
        let dims = &self.layer_dims;
        if dims.len() < 2 || self.layers.len() != dims.len() - 1 {
            return Err(AppError::CorruptCheckpoint(format!(
                "{} layers for dims {dims:?}",
                self.layers.len()
            )));
        }
        let mut model = MlpModel::zeros(dims, act)?;
        for (l, blob) in self.layers.iter().enumerate() {
            if (blob.rows, blob.cols) != (dims[l + 1], dims[l]) {
                return Err(AppError::CorruptCheckpoint(format!(
                    "layer {l} has shape {}x{}",
                    blob.rows, blob.cols
                )));
            }
            let w = decode_f64("weights", &blob.weights, blob.rows * blob.cols)?;
            model.weights[l] = Matrix::from_column_slice(blob.rows, blob.cols, &w);
            model.biases[l] = Vector::from_vec(decode_f64("bias", &blob.bias, blob.rows)?);
        }
        model.input_shift = Vector::from_vec(decode_f64("input_shift", &self.input_shift, dims[0])?);
        model.input_scale = Vector::from_vec(decode_f64("input_scale", &self.input_scale, dims[0])?);
        Ok(model)
    }

    /// `Some(message)` when the embedded problem no longer matches its hash,
    /// or differs from `current`.
    pub fn hash_warning(&self, current: Option<&ProblemFile>) -> AppResult<Option<String>> {
        let embedded = problem_hash(&self.problem)?;
        if embedded != self.problem_hash {
            return Ok(Some(format!(
                "checkpoint problem hash {} does not match its embedded problem ({embedded})",
                self.problem_hash
            )));
        }
        if let Some(p) = current {
            let h = problem_hash(p)?;
            if h != self.problem_hash {
                return Ok(Some(format!(
                    "checkpoint was trained on problem {} but the given problem hashes to {h}",
                    self.problem_hash
                )));
            }
        }
        Ok(None)
    }

    pub fn to_json(&self) -> AppResult<String> {
        crate::format::to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> AppResult<Self> {
        // version first, so a future layout reports a version error rather than a parse error
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| AppError::CorruptCheckpoint(e.to_string()))?;
        if raw.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(AppError::CorruptCheckpoint("missing checkpoint format tag".into()));
        }
        let version = raw
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| AppError::CorruptCheckpoint("missing version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(AppError::CheckpointVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Checkpoint = serde_json::from_value(raw).map_err(|e| AppError::CorruptCheckpoint(e.to_string()))?;
        ckpt.model()?;
        Ok(ckpt)
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> AppResult<()> {
    fs::write(path, ckpt.to_json()?).map_err(|e| AppError::io(path, e))
}

/// Loads and validates a checkpoint; hash mismatches are logged as warnings.
pub fn load_checkpoint(path: &Path) -> AppResult<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let ckpt = Checkpoint::from_json(&text)?;
    if let Some(w) = ckpt.hash_warning(None)? {
        log::warn!("{w}");
    }
    Ok(ckpt)
}
