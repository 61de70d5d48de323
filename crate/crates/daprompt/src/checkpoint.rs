//! Checkpoint directories: model weights, a sidecar manifest for integrity
//! checks, optimizer-free training state and the append-only training log.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::PromptModel;
use crate::training::{StepLog, TrainState, TrainingConfig};

pub const SCHEMA_VERSION: u32 = 1;

const MODEL_FILE: &str = "model.json";
const MANIFEST_FILE: &str = "manifest.json";
const STATE_FILE: &str = "state.json";
const TRAIN_LOG_FILE: &str = "train_log.jsonl";

/// Sidecar manifest checked against the weights on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema_version: u32,
    pub backbone_name: String,
    pub vocab_size: usize,
    pub variant: String,
    pub seed: u64,
}

impl CheckpointManifest {
    pub fn of(model: &PromptModel) -> Self {
        CheckpointManifest {
            schema_version: SCHEMA_VERSION,
            backbone_name: model.config.backbone_name.clone(),
            vocab_size: model.vocab.total_size(),
            variant: model.variant.name().to_string(),
            seed: model.config.seed,
        }
    }
}

/// Reproducibility record of a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config: TrainingConfig,
    pub corpus_sha256: String,
    pub crate_version: String,
}

impl RunManifest {
    pub fn new(config: &TrainingConfig, corpus: &Corpus) -> Result<Self> {
        Ok(RunManifest {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            corpus_sha256: corpus_digest(corpus)?,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// SHA-256 of the canonical JSON form of the corpus.
pub fn corpus_digest(corpus: &Corpus) -> Result<String> {
    let bytes = serde_json::to_vec(corpus)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text.as_bytes()).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write model, manifest and state into `dir`, creating it if needed.
pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    model: &PromptModel,
    state: &TrainState,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_json(&dir.join(MODEL_FILE), model)?;
    write_json(&dir.join(MANIFEST_FILE), &CheckpointManifest::of(model))?;
    write_json(&dir.join(STATE_FILE), state)
}

/// Load a checkpoint, restore lookup indexes and verify the manifest.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(PromptModel, TrainState)> {
    let dir = dir.as_ref();
    let mut model: PromptModel = read_json(&dir.join(MODEL_FILE))?;
    model.reindex();
    let manifest: CheckpointManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let expected = CheckpointManifest::of(&model);
    if manifest != expected {
        return Err(Error::Integrity(format!(
            "checkpoint manifest mismatch: stored {manifest:?}, derived {expected:?}"
        )));
    }
    let state: TrainState = read_json(&dir.join(STATE_FILE))?;
    if state.loss_history.len() != state.step {
        return Err(Error::Integrity(format!(
            "training state records {} losses for {} steps",
            state.loss_history.len(),
            state.step
        )));
    }
    Ok((model, state))
}

/// Append-only JSONL training log inside a checkpoint directory.
pub struct TrainLogWriter {
    path: PathBuf,
    file: fs::File,
}

impl TrainLogWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join(TRAIN_LOG_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(TrainLogWriter { path, file })
    }

    pub fn append(&mut self, log: &StepLog) -> Result<()> {
        let line = serde_json::to_string(log)?;
        writeln!(self.file, "{line}").map_err(|e| Error::io(self.path.display().to_string(), e))
    }
}

/// Read a training log back as step records.
pub fn read_train_log(dir: impl AsRef<Path>) -> Result<Vec<StepLog>> {
    let path = dir.as_ref().join(TRAIN_LOG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Write a run manifest next to the checkpoint files.
pub fn save_run_manifest(dir: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_json(&dir.join("run_manifest.json"), manifest)
}

pub fn load_run_manifest(dir: impl AsRef<Path>) -> Result<RunManifest> {
    read_json(&dir.as_ref().join("run_manifest.json"))
}
