//! Versioned parameter checkpoints and the model manifest.
//!
//! Container layout: `RJPA` magic, u32 format version, u64 header length,
//! JSON header (specs, seed, hyperparameters, parameter table), then one
//! flat little-endian f64 array per named parameter in header order.

use crate::error::{LabError, Result};
use rijepa_core::experiments::Preprocessor;
use rijepa_core::model::{DualEncoderModel, ModelMode};
use rijepa_core::nn::EncoderSpec;
use rijepa_core::rng::RngStream;
use rijepa_core::rulemine::{BinningSpec, Vocabulary};
use rijepa_core::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"RJPA";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    mode: ModelMode,
    data_spec: EncoderSpec,
    rule_spec: Option<EncoderSpec>,
    g_spec: EncoderSpec,
    seed: u64,
    hyperparameters: serde_json::Value,
    params: Vec<ParamInfo>,
}

/// Write a model checkpoint; `hyperparameters` is an arbitrary JSON echo of
/// the run configuration.
pub fn save_model(
    path: &Path,
    model: &DualEncoderModel,
    seed: u64,
    hyperparameters: serde_json::Value,
) -> Result<()> {
    let named = model.named_params();
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        mode: model.mode,
        data_spec: model.f_c_data.spec.clone(),
        rule_spec: model.rules.as_ref().map(|r| r.context.spec.clone()),
        g_spec: model.g.spec.clone(),
        seed,
        hyperparameters,
        params: named
            .iter()
            .map(|(name, t)| ParamInfo { name: name.clone(), rows: t.rows(), cols: t.cols() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    file.write_all(MAGIC).map_err(|e| LabError::io(path, e))?;
    file.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(|e| LabError::io(path, e))?;
    file.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(|e| LabError::io(path, e))?;
    file.write_all(&header_bytes).map_err(|e| LabError::io(path, e))?;
    for (_, tensor) in &named {
        let mut buf = Vec::with_capacity(tensor.len() * 8);
        for v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&buf).map_err(|e| LabError::io(path, e))?;
    }
    Ok(())
}

/// Rebuild a model from a checkpoint (seed-deterministic skeleton, then
/// exact parameter restore).
pub fn load_model(path: &Path) -> Result<(DualEncoderModel, u64, serde_json::Value)> {
    let mut file = fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(|e| LabError::io(path, e))?;
    if &magic != MAGIC {
        return Err(LabError::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).map_err(|e| LabError::io(path, e))?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(LabError::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|e| LabError::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(|e| LabError::io(path, e))?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;

    let mut model = DualEncoderModel::with_specs(
        header.mode,
        header.data_spec.clone(),
        header.rule_spec.clone(),
        header.g_spec.clone(),
        &RngStream::new(header.seed),
    );
    if model.named_params().len() != header.params.len() {
        return Err(LabError::Checkpoint(format!(
            "parameter table mismatch: model has {}, checkpoint lists {}",
            model.named_params().len(),
            header.params.len()
        )));
    }
    for info in &header.params {
        let n = info.rows * info.cols;
        let mut buf = vec![0u8; n * 8];
        file.read_exact(&mut buf).map_err(|e| LabError::io(path, e))?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        model
            .set_param(&info.name, &values)
            .map_err(|e| LabError::Checkpoint(format!("restoring '{}': {e}", info.name)))?;
    }
    Ok((model, header.seed, header.hyperparameters))
}

/// The JSON manifest next to a checkpoint: mode, dims, vocabulary, binning
/// spec, pole vectors, and preprocessing statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub mode: ModelMode,
    pub data_in_dim: usize,
    pub latent_dim: usize,
    pub vocab_size: usize,
    pub vocabulary: Vec<String>,
    pub binning: Option<BinningSpec>,
    pub pole_high: Option<Vec<f64>>,
    pub pole_low: Option<Vec<f64>>,
    pub preprocessor: Option<Preprocessor>,
    pub seed: u64,
}

impl ModelManifest {
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_tokens(self.vocabulary.clone())
    }

    pub fn poles(&self) -> Option<(Tensor, Tensor)> {
        match (&self.pole_high, &self.pole_low) {
            (Some(h), Some(l)) => {
                Some((Tensor::row_vector(h), Tensor::row_vector(l)))
            }
            _ => None,
        }
    }
}

/// `<checkpoint>.manifest.json`.
pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut os = checkpoint.as_os_str().to_os_string();
    os.push(".manifest.json");
    PathBuf::from(os)
}

pub fn save_manifest(checkpoint: &Path, manifest: &ModelManifest) -> Result<()> {
    let path = manifest_path(checkpoint);
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text).map_err(|e| LabError::io(&path, e))
}

pub fn load_manifest(checkpoint: &Path) -> Result<ModelManifest> {
    let path = manifest_path(checkpoint);
    let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.rjpa");
        let model = DualEncoderModel::new_dual(9, Some(5), &RngStream::new(42));
        save_model(&path, &model, 42, serde_json::json!({"lr": 1e-3})).unwrap();
        let (restored, seed, hp) = load_model(&path).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(hp["lr"], 1e-3);
        assert_eq!(restored.params_checksum(), model.params_checksum());
    }

    #[test]
    fn unified_checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.rjpa");
        let model = DualEncoderModel::new_unified(3, &RngStream::new(7));
        save_model(&path, &model, 7, serde_json::Value::Null).unwrap();
        let (restored, _, _) = load_model(&path).unwrap();
        assert_eq!(restored.params_checksum(), model.params_checksum());
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.rjpa");
        fs::write(&path, b"NOPE....").unwrap();
        assert!(matches!(load_model(&path), Err(LabError::Checkpoint(_))));
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("model.rjpa");
        let manifest = ModelManifest {
            mode: ModelMode::Dual,
            data_in_dim: 28,
            latent_dim: 32,
            vocab_size: 2,
            vocabulary: vec!["target_risk=0.0".into(), "target_risk=1.0".into()],
            binning: Some(BinningSpec::clinical_default()),
            pole_high: Some(vec![0.5; 32]),
            pole_low: Some(vec![-0.5; 32]),
            preprocessor: None,
            seed: 111,
        };
        save_manifest(&ckpt, &manifest).unwrap();
        let loaded = load_manifest(&ckpt).unwrap();
        assert_eq!(loaded.vocab_size, 2);
        assert!(loaded.poles().is_some());
        assert_eq!(loaded.vocabulary().len(), 2);
    }
}
