//! Core domain types, the dataset manifest, ingestion, and validation.
//!
//! A dataset is a JSON manifest referencing plain text tables:
//!
//! - prediction / label files: one integer class label per line, no header;
//! - logit files: one row per example, K comma-separated decimals, no header.
//!
//! Paths inside the manifest are resolved relative to the manifest's
//! directory. Example alignment across models is positional: row `i` of
//! every file refers to the same example. Row indices in error messages are
//! 0-based.
//!
//! Ingestion is total: a manifest either yields a fully validated
//! [`ModelSet`] or a structured [`DataError`]; no partially loaded state is
//! observable. Per-model files are loaded in parallel; validation results
//! do not depend on load order.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Data split a table was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "ID_VAL")]
    IdVal,
    #[serde(rename = "OOD")]
    Ood,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::IdVal => f.write_str("ID_VAL"),
            Split::Ood => f.write_str("OOD"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {source}")]
    ManifestJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: row {row}: cannot parse '{text}' as {expected}")]
    Parse {
        path: PathBuf,
        row: usize,
        text: String,
        expected: &'static str,
    },
    #[error("{path}: file holds no rows")]
    EmptyFile { path: PathBuf },
    #[error("manifest lists no models")]
    NoModels,
    #[error("class_count must be positive")]
    BadClassCount,
    #[error("duplicate model id '{id}'")]
    DuplicateId { id: String },
    #[error("labels ({split}): row {row}: class {value} outside [0, {class_count})")]
    LabelOutOfRange {
        split: Split,
        row: usize,
        value: i64,
        class_count: u32,
    },
    #[error("model '{model_id}' ({split}): row {row}: class {value} outside [0, {class_count})")]
    PredictionOutOfRange {
        model_id: String,
        split: Split,
        row: usize,
        value: i64,
        class_count: u32,
    },
    #[error("model '{model_id}' ({split}): expected {expected} rows, found {actual}")]
    LengthMismatch {
        model_id: String,
        split: Split,
        expected: usize,
        actual: usize,
    },
    #[error("labels ({split}): expected {expected} rows, found {actual}")]
    LabelLength {
        split: Split,
        expected: usize,
        actual: usize,
    },
    #[error("model '{model_id}' ({split}): row {row}: logit row has {actual} entries, expected {expected}")]
    LogitWidth {
        model_id: String,
        split: Split,
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("model '{model_id}' ({split}): row {row}: non-finite logit entry")]
    NonFiniteLogit {
        model_id: String,
        split: Split,
        row: usize,
    },
    #[error("model '{model_id}' ({split}): row {row}: logit argmax {argmax} disagrees with stored prediction {stored}")]
    ArgmaxMismatch {
        model_id: String,
        split: Split,
        row: usize,
        argmax: u32,
        stored: u32,
    },
    #[error("logit block length {len} is not a multiple of class count {classes}")]
    BadBlockShape { len: usize, classes: usize },
    #[error("row {row}: non-finite logit entry")]
    NonFinite { row: usize },
}

/// Raw per-class scores for a block of examples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitBlock {
    classes: usize,
    data: Vec<f64>,
}

impl LogitBlock {
    pub fn new(classes: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if classes == 0 || !data.len().is_multiple_of(classes) {
            return Err(DataError::BadBlockShape {
                len: data.len(),
                classes,
            });
        }
        Ok(Self { classes, data })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.classes..(r + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }
}

/// Row-wise argmax of a logit block, ties broken toward the lowest class
/// index. Fails on the first non-finite entry.
pub fn derive_predictions_from_logits(logits: &LogitBlock) -> Result<Vec<u32>, DataError> {
    let mut out = Vec::with_capacity(logits.rows());
    for (row, scores) in logits.iter_rows().enumerate() {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { row });
        }
        let mut best = 0usize;
        for (k, &v) in scores.iter().enumerate().skip(1) {
            if v > scores[best] {
                best = k;
            }
        }
        out.push(best as u32);
    }
    Ok(out)
}

/// One classifier's stored predictions (and optional logits) on both splits.
#[derive(Debug, Clone)]
pub struct ModelRecord {
    pub id: String,
    pub id_val_predictions: Vec<u32>,
    pub ood_predictions: Vec<u32>,
    pub id_val_logits: Option<LogitBlock>,
    pub ood_logits: Option<LogitBlock>,
}

impl ModelRecord {
    pub fn predictions(&self, split: Split) -> &[u32] {
        match split {
            Split::IdVal => &self.id_val_predictions,
            Split::Ood => &self.ood_predictions,
        }
    }

    pub fn logits(&self, split: Split) -> Option<&LogitBlock> {
        match split {
            Split::IdVal => self.id_val_logits.as_ref(),
            Split::Ood => self.ood_logits.as_ref(),
        }
    }
}

/// An ordered set of classifiers sharing one label space. Immutable once
/// built; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ModelSet {
    models: Vec<ModelRecord>,
    class_count: u32,
}

impl ModelSet {
    /// Validates all cross-model invariants: unique ids, equal per-split
    /// lengths, in-range predictions, and logit/prediction consistency.
    pub fn new(models: Vec<ModelRecord>, class_count: u32) -> Result<Self, DataError> {
        if class_count == 0 {
            return Err(DataError::BadClassCount);
        }
        if models.is_empty() {
            return Err(DataError::NoModels);
        }
        let mut seen = BTreeSet::new();
        for m in &models {
            if !seen.insert(m.id.clone()) {
                return Err(DataError::DuplicateId { id: m.id.clone() });
            }
        }
        let m_val = models[0].id_val_predictions.len();
        let m_ood = models[0].ood_predictions.len();
        for m in &models {
            for (split, preds, expected) in [
                (Split::IdVal, &m.id_val_predictions, m_val),
                (Split::Ood, &m.ood_predictions, m_ood),
            ] {
                if preds.len() != expected {
                    return Err(DataError::LengthMismatch {
                        model_id: m.id.clone(),
                        split,
                        expected,
                        actual: preds.len(),
                    });
                }
                if preds.is_empty() {
                    return Err(DataError::LengthMismatch {
                        model_id: m.id.clone(),
                        split,
                        expected: 1,
                        actual: 0,
                    });
                }
                for (row, &v) in preds.iter().enumerate() {
                    if v >= class_count {
                        return Err(DataError::PredictionOutOfRange {
                            model_id: m.id.clone(),
                            split,
                            row,
                            value: v as i64,
                            class_count,
                        });
                    }
                }
            }
            for (split, logits, preds) in [
                (Split::IdVal, &m.id_val_logits, &m.id_val_predictions),
                (Split::Ood, &m.ood_logits, &m.ood_predictions),
            ] {
                let Some(block) = logits else { continue };
                if block.classes() != class_count as usize {
                    return Err(DataError::LogitWidth {
                        model_id: m.id.clone(),
                        split,
                        row: 0,
                        expected: class_count as usize,
                        actual: block.classes(),
                    });
                }
                if block.rows() != preds.len() {
                    return Err(DataError::LengthMismatch {
                        model_id: m.id.clone(),
                        split,
                        expected: preds.len(),
                        actual: block.rows(),
                    });
                }
                let derived = derive_predictions_from_logits(block).map_err(|e| match e {
                    DataError::NonFinite { row } => DataError::NonFiniteLogit {
                        model_id: m.id.clone(),
                        split,
                        row,
                    },
                    other => other,
                })?;
                for (row, (&argmax, &stored)) in derived.iter().zip(preds.iter()).enumerate() {
                    if argmax != stored {
                        return Err(DataError::ArgmaxMismatch {
                            model_id: m.id.clone(),
                            split,
                            row,
                            argmax,
                            stored,
                        });
                    }
                }
            }
        }
        Ok(Self {
            models,
            class_count,
        })
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.models
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.id.clone()).collect()
    }

    /// Number of ID-validation examples.
    pub fn m_val(&self) -> usize {
        self.models[0].id_val_predictions.len()
    }

    /// Number of OOD examples.
    pub fn m_ood(&self) -> usize {
        self.models[0].ood_predictions.len()
    }

    pub fn model(&self, idx: usize) -> &ModelRecord {
        &self.models[idx]
    }
}

/// Ground-truth labels for one split.
#[derive(Debug, Clone)]
pub struct LabeledSplit {
    pub labels: Vec<u32>,
    pub split: Split,
}

/// Manifest schema: paths are relative to the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub class_count: u32,
    pub id_val_labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_labels: Option<PathBuf>,
    pub models: Vec<ManifestModel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestModel {
    pub id: String,
    pub id_val_predictions: PathBuf,
    pub ood_predictions: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_val_logits: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_logits: Option<PathBuf>,
    /// Optional architecture tag, used by the ablation harness to build
    /// homogeneous model subsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
}

/// Everything a manifest yields after validation.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub set: ModelSet,
    pub id_labels: LabeledSplit,
    pub ood_labels: Option<LabeledSplit>,
    /// model id -> architecture tag, for models that carry one.
    pub architectures: BTreeMap<String, String>,
}

/// Loads and fully validates a manifest. Per-model files are read in
/// parallel; the result is independent of scheduling.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|source| DataError::ManifestJson {
            path: path.to_path_buf(),
            source,
        })?;
    if manifest.class_count == 0 {
        return Err(DataError::BadClassCount);
    }
    if manifest.models.is_empty() {
        return Err(DataError::NoModels);
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let id_labels = read_class_file(&base.join(&manifest.id_val_labels)).and_then(|labels| {
        check_label_range(&labels, Split::IdVal, manifest.class_count)?;
        Ok(labels)
    })?;
    let ood_labels = match &manifest.ood_labels {
        Some(p) => {
            let labels = read_class_file(&base.join(p))?;
            check_label_range(&labels, Split::Ood, manifest.class_count)?;
            Some(labels)
        }
        None => None,
    };

    let models: Vec<ModelRecord> = manifest
        .models
        .par_iter()
        .map(|m| load_model(base, m, manifest.class_count))
        .collect::<Result<_, _>>()?;

    let set = ModelSet::new(models, manifest.class_count)?;
    if id_labels.len() != set.m_val() {
        return Err(DataError::LabelLength {
            split: Split::IdVal,
            expected: set.m_val(),
            actual: id_labels.len(),
        });
    }
    if let Some(labels) = &ood_labels {
        if labels.len() != set.m_ood() {
            return Err(DataError::LabelLength {
                split: Split::Ood,
                expected: set.m_ood(),
                actual: labels.len(),
            });
        }
    }
    let architectures = manifest
        .models
        .iter()
        .filter_map(|m| m.architecture.clone().map(|a| (m.id.clone(), a)))
        .collect();
    Ok(LoadedManifest {
        set,
        id_labels: LabeledSplit {
            labels: id_labels,
            split: Split::IdVal,
        },
        ood_labels: ood_labels.map(|labels| LabeledSplit {
            labels,
            split: Split::Ood,
        }),
        architectures,
    })
}

fn load_model(base: &Path, m: &ManifestModel, class_count: u32) -> Result<ModelRecord, DataError> {
    let id_val_predictions = read_class_file(&base.join(&m.id_val_predictions))?;
    let ood_predictions = read_class_file(&base.join(&m.ood_predictions))?;
    let id_val_logits = m
        .id_val_logits
        .as_ref()
        .map(|p| read_logit_file(&base.join(p), class_count))
        .transpose()?;
    let ood_logits = m
        .ood_logits
        .as_ref()
        .map(|p| read_logit_file(&base.join(p), class_count))
        .transpose()?;
    // Range checks against class_count run in ModelSet::new so they also
    // cover programmatically built sets; only parse errors surface here.
    Ok(ModelRecord {
        id: m.id.clone(),
        id_val_predictions,
        ood_predictions,
        id_val_logits,
        ood_logits,
    })
}

fn check_label_range(labels: &[u32], split: Split, class_count: u32) -> Result<(), DataError> {
    for (row, &v) in labels.iter().enumerate() {
        if v >= class_count {
            return Err(DataError::LabelOutOfRange {
                split,
                row,
                value: v as i64,
                class_count,
            });
        }
    }
    Ok(())
}

/// Reads a prediction or label file: one integer per line. Values must be
/// non-negative; range checks against K happen during set validation.
pub fn read_class_file(path: &Path) -> Result<Vec<u32>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line.parse().map_err(|_| DataError::Parse {
            path: path.to_path_buf(),
            row,
            text: line.to_string(),
            expected: "integer class label",
        })?;
        if v < 0 || v > u32::MAX as i64 {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                row,
                text: line.to_string(),
                expected: "non-negative class label",
            });
        }
        out.push(v as u32);
    }
    if out.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(out)
}

/// Reads a logit file: one row per example, `class_count` comma-separated
/// decimals. Non-finite values are hard errors.
pub fn read_logit_file(path: &Path, class_count: u32) -> Result<LogitBlock, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let k = class_count as usize;
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut width = 0usize;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| DataError::Parse {
                path: path.to_path_buf(),
                row,
                text: field.trim().to_string(),
                expected: "decimal logit",
            })?;
            data.push(v);
            width += 1;
        }
        if width != k {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                row,
                text: line.to_string(),
                expected: "K comma-separated logits",
            });
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(DataError::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    LogitBlock::new(k, data)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let tmp = path.with_extension("tmp");
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err)
}

/// Writes a prediction or label column in the manifest text format.
pub fn write_class_file(path: &Path, values: &[u32]) -> Result<(), DataError> {
    let mut text = String::with_capacity(values.len() * 3);
    for v in values {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Writes a logit block in the manifest text format. Decimal rendering is
/// shortest-roundtrip, so reading the file back reproduces the block
/// bit-exactly.
pub fn write_logit_file(path: &Path, block: &LogitBlock) -> Result<(), DataError> {
    let mut text = String::new();
    for row in block.iter_rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Writes a complete dataset (manifest plus referenced files) under `dir`.
/// Returns the manifest path. Model files land in `dir/models/`.
pub fn write_dataset(
    dir: &Path,
    set: &ModelSet,
    id_labels: &LabeledSplit,
    ood_labels: Option<&LabeledSplit>,
    architectures: &BTreeMap<String, String>,
) -> Result<PathBuf, DataError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let models_dir = dir.join("models");
    fs::create_dir_all(&models_dir).map_err(io_err(&models_dir))?;

    write_class_file(&dir.join("id_val_labels.txt"), &id_labels.labels)?;
    if let Some(ood) = ood_labels {
        write_class_file(&dir.join("ood_labels.txt"), &ood.labels)?;
    }

    let mut entries = Vec::with_capacity(set.len());
    for m in set.models() {
        let id_path = PathBuf::from(format!("models/{}_id.txt", m.id));
        let ood_path = PathBuf::from(format!("models/{}_ood.txt", m.id));
        write_class_file(&dir.join(&id_path), &m.id_val_predictions)?;
        write_class_file(&dir.join(&ood_path), &m.ood_predictions)?;
        let id_logits = match &m.id_val_logits {
            Some(block) => {
                let p = PathBuf::from(format!("models/{}_id_logits.txt", m.id));
                write_logit_file(&dir.join(&p), block)?;
                Some(p)
            }
            None => None,
        };
        let ood_logits = match &m.ood_logits {
            Some(block) => {
                let p = PathBuf::from(format!("models/{}_ood_logits.txt", m.id));
                write_logit_file(&dir.join(&p), block)?;
                Some(p)
            }
            None => None,
        };
        entries.push(ManifestModel {
            id: m.id.clone(),
            id_val_predictions: id_path,
            ood_predictions: ood_path,
            id_val_logits: id_logits,
            ood_logits,
            architecture: architectures.get(&m.id).cloned(),
        });
    }
    let manifest = Manifest {
        class_count: set.class_count(),
        id_val_labels: PathBuf::from("id_val_labels.txt"),
        ood_labels: ood_labels.map(|_| PathBuf::from("ood_labels.txt")),
        models: entries,
        metadata: BTreeMap::new(),
    };
    let manifest_path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(manifest_path)
}
