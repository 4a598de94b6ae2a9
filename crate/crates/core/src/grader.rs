//! The similarity grader: a test response is assigned the label of the most
//! similar same-item reference, provided that similarity clears the
//! operational threshold; otherwise it is rejected as incorrect.
//!
//! Adversarial hardening works on the reference set: gaming responses are
//! added as incorrect references and the threshold is recalibrated.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{GoldLabel, Response};
use crate::embedding::{cosine, Embedder, EmbeddingError, EmbeddingVector};

/// One labeled, embedded training response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefEntry {
    pub response_id: String,
    pub vector: EmbeddingVector,
    pub label: GoldLabel,
}

/// Labeled references grouped by item, the embedder that produced them, and
/// the operational threshold. Immutable after build/augment.
#[derive(Debug, Clone)]
pub struct ReferenceIndex {
    entries: BTreeMap<String, Vec<RefEntry>>,
    embedder: Arc<Embedder>,
    pub tau: f64,
    pub classifier_id: String,
}

/// A grader verdict with its similarity evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub response_id: String,
    pub predicted_label: GoldLabel,
    pub max_similarity: f64,
    pub matched_reference_id: Option<String>,
    pub classifier_id: String,
    /// Set when the response's item had no references at all (coverage gap).
    pub no_references: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum GraderError {
    #[error("cannot build an index from an empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("threshold {0} is not finite or outside [-1, 1]")]
    InvalidThreshold(f64),
    #[error("augmentation response {0:?} is labeled correct; gaming references must be incorrect")]
    AugmentWithCorrectLabel(String),
    #[error("calibration grid is empty")]
    EmptyGrid,
    #[error("calibration validation set is empty")]
    EmptyValidation,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed index file, line {line}: {message}")]
    MalformedIndex { line: usize, message: String },
    #[error("index was built with embedder config {expected}, loader was given {actual}")]
    EmbedderMismatch { expected: String, actual: String },
}

// The index accepts any finite threshold (an unreachable tau > 1 is a valid
// way to reject everything); calibration grids stay inside [-1, 1].
fn check_tau(tau: f64) -> Result<(), GraderError> {
    if !tau.is_finite() {
        return Err(GraderError::InvalidThreshold(tau));
    }
    Ok(())
}

fn check_grid_value(tau: f64) -> Result<(), GraderError> {
    if !tau.is_finite() || !(-1.0..=1.0).contains(&tau) {
        return Err(GraderError::InvalidThreshold(tau));
    }
    Ok(())
}

/// Embed every training response and group the entries by item.
pub fn build_index(
    train: &[Response],
    embedder: Arc<Embedder>,
    tau: f64,
    classifier_id: impl Into<String>,
) -> Result<ReferenceIndex, GraderError> {
    if train.is_empty() {
        return Err(GraderError::EmptyTrainingSet);
    }
    check_tau(tau)?;
    let mut entries: BTreeMap<String, Vec<RefEntry>> = BTreeMap::new();
    for response in train {
        let vector = embedder.embed_response(response)?;
        entries.entry(response.item_id.clone()).or_default().push(RefEntry {
            response_id: response.response_id.clone(),
            vector,
            label: response.gold_label,
        });
    }
    Ok(ReferenceIndex { entries, embedder, tau, classifier_id: classifier_id.into() })
}

impl ReferenceIndex {
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn item_entries(&self, item_id: &str) -> Option<&[RefEntry]> {
        self.entries.get(item_id).map(Vec::as_slice)
    }

    pub fn embedder(&self) -> &Arc<Embedder> {
        &self.embedder
    }

    /// Same references and embedder under a different threshold.
    pub fn with_tau(&self, tau: f64) -> Result<Self, GraderError> {
        check_tau(tau)?;
        let mut index = self.clone();
        index.tau = tau;
        Ok(index)
    }

    /// New index with gaming responses appended as incorrect references; the
    /// original index is unchanged. Responses labeled correct are rejected.
    pub fn augment(&self, gaming_train: &[Response]) -> Result<Self, GraderError> {
        let mut index = self.clone();
        for response in gaming_train {
            if response.gold_label != GoldLabel::Incorrect {
                return Err(GraderError::AugmentWithCorrectLabel(response.response_id.clone()));
            }
            let vector = self.embedder.embed_response(response)?;
            index.entries.entry(response.item_id.clone()).or_default().push(RefEntry {
                response_id: response.response_id.clone(),
                vector,
                label: GoldLabel::Incorrect,
            });
        }
        Ok(index)
    }
}

/// Free-function form of [`ReferenceIndex::augment`].
pub fn augment(index: &ReferenceIndex, gaming_train: &[Response]) -> Result<ReferenceIndex, GraderError> {
    index.augment(gaming_train)
}

/// Nearest same-item reference for a query vector: highest similarity wins,
/// exact ties break to the lexicographically smallest response_id.
fn nearest<'a>(entries: &'a [RefEntry], query: &EmbeddingVector) -> Option<(&'a RefEntry, f64)> {
    let mut best: Option<(&RefEntry, f64)> = None;
    for entry in entries {
        let sim = cosine(query, &entry.vector).expect("index entries share the embedder dimension");
        best = match best {
            None => Some((entry, sim)),
            Some((cur, cur_sim)) => {
                if sim > cur_sim || (sim == cur_sim && entry.response_id < cur.response_id) {
                    Some((entry, sim))
                } else {
                    Some((cur, cur_sim))
                }
            }
        };
    }
    best
}

/// Classify one response against the index.
pub fn predict(index: &ReferenceIndex, response: &Response) -> Result<Prediction, GraderError> {
    predict_excluding(index, response, None)
}

/// Like [`predict`], but ignores the reference with `exclude_id`. Used for
/// leave-self-out feature generation when stacking over training responses.
pub fn predict_excluding(
    index: &ReferenceIndex,
    response: &Response,
    exclude_id: Option<&str>,
) -> Result<Prediction, GraderError> {
    let no_match = |no_references: bool, max_similarity: f64| Prediction {
        response_id: response.response_id.clone(),
        predicted_label: GoldLabel::Incorrect,
        max_similarity,
        matched_reference_id: None,
        classifier_id: index.classifier_id.clone(),
        no_references,
    };

    let Some(all_entries) = index.entries.get(&response.item_id) else {
        return Ok(no_match(true, -1.0));
    };
    let entries: Vec<RefEntry> = match exclude_id {
        None => all_entries.clone(),
        Some(id) => all_entries.iter().filter(|e| e.response_id != id).cloned().collect(),
    };
    if entries.is_empty() {
        return Ok(no_match(true, -1.0));
    }

    let query = index.embedder.embed_response(response)?;
    let (entry, sim) = nearest(&entries, &query).expect("entries checked non-empty");
    if sim >= index.tau {
        Ok(Prediction {
            response_id: response.response_id.clone(),
            predicted_label: entry.label,
            max_similarity: sim,
            matched_reference_id: Some(entry.response_id.clone()),
            classifier_id: index.classifier_id.clone(),
            no_references: false,
        })
    } else {
        Ok(no_match(false, sim))
    }
}

/// Precomputed nearest-reference evidence, reusable across thresholds.
#[derive(Debug, Clone)]
pub struct NearestEvidence {
    pub max_similarity: f64,
    pub nearest_label: Option<GoldLabel>,
}

/// Compute each validation response's nearest-reference evidence once, so a
/// threshold sweep does not redo the similarity search per grid point.
pub fn nearest_evidence(
    index: &ReferenceIndex,
    responses: &[Response],
) -> Result<Vec<NearestEvidence>, GraderError> {
    responses
        .iter()
        .map(|response| {
            let Some(entries) = index.entries.get(&response.item_id) else {
                return Ok(NearestEvidence { max_similarity: -1.0, nearest_label: None });
            };
            if entries.is_empty() {
                return Ok(NearestEvidence { max_similarity: -1.0, nearest_label: None });
            }
            let query = index.embedder.embed_response(response)?;
            let (entry, sim) = nearest(entries, &query).expect("non-empty");
            Ok(NearestEvidence { max_similarity: sim, nearest_label: Some(entry.label) })
        })
        .collect()
}

fn f1_at_tau(evidence: &[NearestEvidence], gold: &[Response], tau: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (ev, response) in evidence.iter().zip(gold) {
        let predicted = match ev.nearest_label {
            Some(label) if ev.max_similarity >= tau => label,
            _ => GoldLabel::Incorrect,
        };
        match (predicted, response.gold_label) {
            (GoldLabel::Correct, GoldLabel::Correct) => tp += 1,
            (GoldLabel::Correct, GoldLabel::Incorrect) => fp += 1,
            (GoldLabel::Incorrect, GoldLabel::Correct) => fn_ += 1,
            (GoldLabel::Incorrect, GoldLabel::Incorrect) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        // No positives anywhere: any threshold is equally (vacuously) perfect.
        return 0.0;
    }
    2.0 * tp as f64 / denom as f64
}

/// Pick the grid threshold maximizing binary F1 (correct as positive class)
/// on the validation set. Ties break toward the larger, more conservative
/// threshold.
pub fn calibrate_threshold(
    index: &ReferenceIndex,
    validation: &[Response],
    grid: &[f64],
) -> Result<f64, GraderError> {
    if grid.is_empty() {
        return Err(GraderError::EmptyGrid);
    }
    if validation.is_empty() {
        return Err(GraderError::EmptyValidation);
    }
    for &tau in grid {
        check_grid_value(tau)?;
    }
    let evidence = nearest_evidence(index, validation)?;
    let mut best: Option<(f64, f64)> = None; // (f1, tau)
    for &tau in grid {
        let f1 = f1_at_tau(&evidence, validation, tau);
        best = match best {
            None => Some((f1, tau)),
            Some((best_f1, best_tau)) => {
                if f1 > best_f1 || (f1 == best_f1 && tau > best_tau) {
                    Some((f1, tau))
                } else {
                    Some((best_f1, best_tau))
                }
            }
        };
    }
    Ok(best.expect("grid checked non-empty").1)
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
    tau: f64,
    classifier_id: String,
    embedder_config_hash: String,
    dimension: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    item_id: String,
    response_id: String,
    label: GoldLabel,
    vector: EmbeddingVector,
}

/// Persist an index as JSONL: a header line with the threshold and embedder
/// config hash, then one entry per reference.
pub fn save_index(index: &ReferenceIndex, path: impl AsRef<Path>) -> Result<(), GraderError> {
    let mut file = File::create(path.as_ref())?;
    let header = IndexHeader {
        format: "gradeshield-index".to_string(),
        version: 1,
        tau: index.tau,
        classifier_id: index.classifier_id.clone(),
        embedder_config_hash: index.embedder.config_hash(),
        dimension: index.embedder.dimension(),
    };
    writeln!(file, "{}", serde_json::to_string(&header).expect("serializable header"))?;
    for (item_id, entries) in &index.entries {
        for entry in entries {
            let line = IndexLine {
                item_id: item_id.clone(),
                response_id: entry.response_id.clone(),
                label: entry.label,
                vector: entry.vector.clone(),
            };
            writeln!(file, "{}", serde_json::to_string(&line).expect("serializable entry"))?;
        }
    }
    Ok(())
}

/// Reload a persisted index. The embedder must match the one recorded at save
/// time (verified via the config hash).
pub fn load_index(path: impl AsRef<Path>, embedder: Arc<Embedder>) -> Result<ReferenceIndex, GraderError> {
    let file = File::open(path.as_ref())?;
    read_index(BufReader::new(file), embedder)
}

pub fn read_index(reader: impl Read, embedder: Arc<Embedder>) -> Result<ReferenceIndex, GraderError> {
    let mut lines = BufReader::new(reader).lines();
    let header_line = lines
        .next()
        .ok_or(GraderError::MalformedIndex { line: 1, message: "empty file".to_string() })??;
    let header: IndexHeader = serde_json::from_str(&header_line)
        .map_err(|e| GraderError::MalformedIndex { line: 1, message: e.to_string() })?;
    let actual = embedder.config_hash();
    if header.embedder_config_hash != actual {
        return Err(GraderError::EmbedderMismatch { expected: header.embedder_config_hash, actual });
    }
    let mut entries: BTreeMap<String, Vec<RefEntry>> = BTreeMap::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: IndexLine = serde_json::from_str(&line)
            .map_err(|e| GraderError::MalformedIndex { line: idx + 2, message: e.to_string() })?;
        entries.entry(parsed.item_id).or_default().push(RefEntry {
            response_id: parsed.response_id,
            vector: parsed.vector,
            label: parsed.label,
        });
    }
    Ok(ReferenceIndex { entries, embedder, tau: header.tau, classifier_id: header.classifier_id })
}
