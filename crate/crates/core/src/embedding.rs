//! Fixed-dimension text vectors via a deterministic hashed TF-IDF embedder or
//! externally supplied embedding files, plus cosine similarity.
//!
//! The hashed embedder buckets token n-grams with a seeded sign hash and
//! weights them by tf·idf, so distinct configurations (seed, dimension,
//! n-gram order) behave as distinct base models. Real transformer embeddings
//! computed offline enter through the TSV loader.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Response;
use crate::text;

/// A fixed-dimension real vector representing a text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    HashedTfidf,
    ExternalFile,
}

/// Configuration for one embedding provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub provider: ProviderKind,
    pub dimension: usize,
    pub hash_seed: u64,
    /// 1 for unigrams only, 2 to add bigrams.
    pub ngram_max: usize,
    pub file_path: Option<PathBuf>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::HashedTfidf,
            dimension: 256,
            hash_seed: 0x5EED,
            ngram_max: 2,
            file_path: None,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension < 8 {
            return Err(EmbeddingError::InvalidConfig(format!(
                "dimension must be at least 8, got {}",
                self.dimension
            )));
        }
        if !(self.ngram_max == 1 || self.ngram_max == 2) {
            return Err(EmbeddingError::InvalidConfig(format!(
                "ngram_max must be 1 or 2, got {}",
                self.ngram_max
            )));
        }
        if self.provider == ProviderKind::ExternalFile && self.file_path.is_none() {
            return Err(EmbeddingError::InvalidConfig(
                "external-file provider requires file_path".to_string(),
            ));
        }
        Ok(())
    }

    /// Content hash of the configuration, recorded in persisted indices so a
    /// reload can verify it is paired with the same embedder.
    pub fn content_hash(&self) -> String {
        let canonical = format!(
            "provider={:?};dimension={};hash_seed={};ngram_max={};file={}",
            self.provider,
            self.dimension,
            self.hash_seed,
            self.ngram_max,
            self.file_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
    #[error("cannot fit hashed tf-idf on an empty corpus")]
    EmptyCorpus,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding file {path:?}, row {row}: {message}")]
    MalformedEmbeddingFile { path: String, row: usize, message: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no external embedding for response {0:?}")]
    MissingExternalEmbedding(String),
}

/// A fitted embedding provider. Immutable; embed calls may run concurrently.
#[derive(Debug, Clone)]
pub enum Embedder {
    HashedTfidf(TfidfEmbedder),
    External(ExternalEmbedder),
}

impl Embedder {
    pub fn dimension(&self) -> usize {
        match self {
            Embedder::HashedTfidf(e) => e.config.dimension,
            Embedder::External(e) => e.dimension,
        }
    }

    pub fn config_hash(&self) -> String {
        match self {
            Embedder::HashedTfidf(e) => e.config.content_hash(),
            Embedder::External(e) => e.config.content_hash(),
        }
    }

    /// Embed raw text. Only supported by the hashed TF-IDF provider; external
    /// files are keyed by response id.
    pub fn embed_text(&self, input: &str) -> Result<EmbeddingVector, EmbeddingError> {
        match self {
            Embedder::HashedTfidf(e) => Ok(e.embed(input)),
            Embedder::External(_) => Err(EmbeddingError::InvalidConfig(
                "external-file provider embeds by response_id, not raw text".to_string(),
            )),
        }
    }

    /// Embed a response (by text for TF-IDF, by id for external files).
    pub fn embed_response(&self, response: &Response) -> Result<EmbeddingVector, EmbeddingError> {
        match self {
            Embedder::HashedTfidf(e) => Ok(e.embed(&response.text)),
            Embedder::External(e) => e
                .vectors
                .get(&response.response_id)
                .cloned()
                .ok_or_else(|| EmbeddingError::MissingExternalEmbedding(response.response_id.clone())),
        }
    }
}

/// Fit an embedding provider. For hashed TF-IDF this collects document
/// frequencies over `corpus_texts`; the external provider loads its file and
/// ignores the corpus.
pub fn fit_embedder(cfg: &EmbedderConfig, corpus_texts: &[&str]) -> Result<Embedder, EmbeddingError> {
    cfg.validate()?;
    match cfg.provider {
        ProviderKind::HashedTfidf => {
            if corpus_texts.is_empty() {
                return Err(EmbeddingError::EmptyCorpus);
            }
            Ok(Embedder::HashedTfidf(TfidfEmbedder::fit(cfg.clone(), corpus_texts)))
        }
        ProviderKind::ExternalFile => {
            let path = cfg.file_path.as_ref().expect("validated");
            let vectors = load_external_embeddings(path)?;
            let dimension = vectors.values().next().map_or(cfg.dimension, EmbeddingVector::dim);
            Ok(Embedder::External(ExternalEmbedder { config: cfg.clone(), dimension, vectors }))
        }
    }
}

/// Hashed TF-IDF embedder: token n-grams hashed into `dimension` buckets with
/// a ±1 sign hash, weighted by tf · idf, L2-normalized.
#[derive(Debug, Clone)]
pub struct TfidfEmbedder {
    pub config: EmbedderConfig,
    n_docs: usize,
    doc_freq: HashMap<String, usize>,
}

const SIGN_TAG: u64 = 0x51_67_6e; // differentiates the sign hash stream

impl TfidfEmbedder {
    fn fit(config: EmbedderConfig, corpus_texts: &[&str]) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in corpus_texts {
            let mut seen: Vec<String> = ngrams(doc, config.ngram_max);
            seen.sort_unstable();
            seen.dedup();
            for gram in seen {
                *doc_freq.entry(gram).or_insert(0) += 1;
            }
        }
        Self { config, n_docs: corpus_texts.len(), doc_freq }
    }

    /// Smoothed idf; unseen terms floor at ln(1 + n) + 1 >= 1.
    pub fn idf(&self, gram: &str) -> f64 {
        let df = self.doc_freq.get(gram).copied().unwrap_or(0);
        ((1.0 + self.n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    pub fn embed(&self, input: &str) -> EmbeddingVector {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for gram in ngrams(input, self.config.ngram_max) {
            *counts.entry(gram).or_insert(0.0) += 1.0;
        }
        let mut values = vec![0.0; self.config.dimension];
        // BTreeMap iteration keeps float accumulation order stable.
        for (gram, tf) in &counts {
            let bucket = (text::fnv1a(self.config.hash_seed, gram.as_bytes())
                % self.config.dimension as u64) as usize;
            let sign = if text::fnv1a(self.config.hash_seed ^ SIGN_TAG, gram.as_bytes()) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            values[bucket] += sign * tf * self.idf(gram);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        EmbeddingVector::new(values)
    }
}

fn ngrams(input: &str, ngram_max: usize) -> Vec<String> {
    let tokens = text::tokenize(input);
    let mut grams: Vec<String> = tokens.clone();
    if ngram_max >= 2 {
        grams.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    grams
}

/// Embeddings loaded from a TSV file, keyed by response id.
#[derive(Debug, Clone)]
pub struct ExternalEmbedder {
    pub config: EmbedderConfig,
    pub dimension: usize,
    pub vectors: BTreeMap<String, EmbeddingVector>,
}

/// Cosine similarity, clamped to [-1, 1]. Zero whenever either vector is zero.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.l2_norm();
    let nb = b.l2_norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Load a `response_id → vector` map from TSV. First line must be
/// `#dim=<d>`; every row is an id followed by d tab-separated floats.
pub fn load_external_embeddings(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, EmbeddingVector>, EmbeddingError> {
    let display = path.as_ref().display().to_string();
    let file = File::open(path.as_ref())?;
    read_external_embeddings(BufReader::new(file), &display)
}

pub fn read_external_embeddings(
    reader: impl Read,
    name: &str,
) -> Result<BTreeMap<String, EmbeddingVector>, EmbeddingError> {
    let malformed = |row: usize, message: String| EmbeddingError::MalformedEmbeddingFile {
        path: name.to_string(),
        row,
        message,
    };
    let mut lines = BufReader::new(reader).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file".to_string()))?;
    let header = header?;
    let dim: usize = header
        .strip_prefix("#dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| malformed(1, format!("expected '#dim=<d>' header, got {header:?}")))?;

    let mut vectors = BTreeMap::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(malformed(row, "missing response_id".to_string()));
        }
        let mut values = Vec::with_capacity(dim);
        for field in fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| malformed(row, format!("bad float {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(malformed(row, format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        if values.len() != dim {
            return Err(malformed(row, format!("expected {dim} values, found {}", values.len())));
        }
        if vectors.insert(id.clone(), EmbeddingVector::new(values)).is_some() {
            return Err(malformed(row, format!("duplicate response_id {id:?}")));
        }
    }
    Ok(vectors)
}

/// Write embeddings in the TSV format accepted by the loader.
pub fn save_external_embeddings(
    path: impl AsRef<Path>,
    vectors: &BTreeMap<String, EmbeddingVector>,
) -> Result<(), EmbeddingError> {
    let dim = vectors.values().next().map_or(0, EmbeddingVector::dim);
    let mut file = File::create(path.as_ref())?;
    writeln!(file, "#dim={dim}")?;
    for (id, vector) in vectors {
        let mut row = id.clone();
        for v in &vector.values {
            row.push('\t');
            row.push_str(&format!("{v:?}"));
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// Five stock configurations emulating a diverse panel of base embedding
/// models for ensemble experiments.
pub fn default_panel_configs() -> Vec<EmbedderConfig> {
    [
        (256usize, 0x5EED_0001u64, 2usize),
        (256, 0x5EED_0002, 1),
        (192, 0x5EED_0003, 2),
        (320, 0x5EED_0004, 1),
        (128, 0x5EED_0005, 2),
    ]
    .into_iter()
    .map(|(dimension, hash_seed, ngram_max)| EmbedderConfig {
        provider: ProviderKind::HashedTfidf,
        dimension,
        hash_seed,
        ngram_max,
        file_path: None,
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tfidf(corpus: &[&str]) -> TfidfEmbedder {
        match fit_embedder(&EmbedderConfig::default(), corpus).unwrap() {
            Embedder::HashedTfidf(e) => e,
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_document_corpus_has_constant_idf() {
        let e = tfidf(&["fever cough"]);
        assert_eq!(e.idf("fever"), e.idf("cough"));
    }

    #[test]
    fn idf_matches_hand_evaluation_on_two_docs() {
        // N=2: token in both docs -> ln(3/3)+1 = 1; token in one doc ->
        // ln(3/2)+1 ≈ 1.405465.
        let e = tfidf(&["fever cough", "fever rash"]);
        assert!((e.idf("fever") - 1.0).abs() < 1e-12);
        assert!((e.idf("cough") - (1.5f64.ln() + 1.0)).abs() < 1e-12);
        assert!((e.idf("cough") - 1.4054651081).abs() < 1e-9);
    }

    #[test]
    fn unknown_tokens_floor_at_one() {
        let e = tfidf(&["fever cough"]);
        assert!(e.idf("zzz") >= 1.0);
        let v = e.embed("completely novel words");
        assert!((v.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn embedding_is_deterministic_and_unit_norm() {
        let e = tfidf(&["fever cough weakness", "rash and chills", "absent reflexes"]);
        let a = e.embed("fever with chills");
        let b = e.embed("fever with chills");
        assert_eq!(a, b);
        assert!((a.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unigram_embedding_is_order_invariant() {
        let cfg = EmbedderConfig { ngram_max: 1, ..Default::default() };
        let e = match fit_embedder(&cfg, &["fever cough"]).unwrap() {
            Embedder::HashedTfidf(e) => e,
            _ => unreachable!(),
        };
        assert_eq!(e.embed("fever cough"), e.embed("cough fever"));
    }

    #[test]
    fn bigrams_distinguish_order() {
        let e = tfidf(&["fever cough", "cough fever"]);
        assert_ne!(e.embed("fever cough"), e.embed("cough fever"));
    }

    #[test]
    fn cosine_hand_values() {
        let a = EmbeddingVector::new(vec![1.0, 1.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0]);
        // Hand computation: 1/sqrt(2).
        assert!((cosine(&a, &b).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let ortho = EmbeddingVector::new(vec![0.0, 1.0]);
        assert_eq!(cosine(&b, &ortho).unwrap(), 0.0);
    }

    #[test]
    fn cosine_zero_vector_is_zero() {
        let z = EmbeddingVector::new(vec![0.0, 0.0]);
        let a = EmbeddingVector::new(vec![1.0, 2.0]);
        assert_eq!(cosine(&z, &a).unwrap(), 0.0);
    }

    #[test]
    fn cosine_dimension_mismatch_errors() {
        let a = EmbeddingVector::new(vec![1.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0]);
        assert!(matches!(cosine(&a, &b), Err(EmbeddingError::DimensionMismatch { .. })));
    }

    #[test]
    fn hash_buckets_spread_tokens() {
        // 1000 distinct tokens into 256 buckets: max load stays within 10x the
        // mean load.
        let dim = 256usize;
        let mut loads = vec![0usize; dim];
        for i in 0..1000 {
            let token = format!("token{i}");
            loads[(text::fnv1a(0x5EED, token.as_bytes()) % dim as u64) as usize] += 1;
        }
        let mean = 1000.0 / dim as f64;
        let max = *loads.iter().max().unwrap() as f64;
        assert!(max <= 10.0 * mean, "max bucket load {max} exceeds 10x mean {mean}");
    }

    #[test]
    fn external_embeddings_roundtrip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embeddings.tsv");
        let mut vectors = BTreeMap::new();
        vectors.insert("r1".to_string(), EmbeddingVector::new(vec![0.25, -1.5, 3.0000001, 0.0]));
        vectors.insert("r2".to_string(), EmbeddingVector::new(vec![1e-9, 2.0, -0.333333333333, 7.5]));
        save_external_embeddings(&path, &vectors).unwrap();
        let loaded = load_external_embeddings(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        for (id, vector) in &vectors {
            for (a, b) in vector.values.iter().zip(&loaded[id].values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let tsv = "#dim=4\nr1\t1.0\t2.0\t3.0\t4.0\nr2\t1.0\t2.0\t3.0\n";
        let err = read_external_embeddings(tsv.as_bytes(), "test.tsv").unwrap_err();
        match err {
            EmbeddingError::MalformedEmbeddingFile { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let tsv = "#dim=2\nr1\t1.0\t2.0\nr1\t3.0\t4.0\n";
        assert!(read_external_embeddings(tsv.as_bytes(), "test.tsv").is_err());
    }

    #[test]
    fn non_finite_value_is_rejected() {
        let tsv = "#dim=2\nr1\t1.0\tNaN\n";
        assert!(read_external_embeddings(tsv.as_bytes(), "test.tsv").is_err());
    }

    proptest! {
        /// Symmetry and bounds for arbitrary finite vectors.
        #[test]
        fn cosine_symmetric_and_bounded(
            a in proptest::collection::vec(-100.0f64..100.0, 4),
            b in proptest::collection::vec(-100.0f64..100.0, 4),
        ) {
            let va = EmbeddingVector::new(a);
            let vb = EmbeddingVector::new(b);
            let ab = cosine(&va, &vb).unwrap();
            let ba = cosine(&vb, &va).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0..=1.0).contains(&ab));
            if va.l2_norm() > 0.0 {
                prop_assert!((cosine(&va, &va).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
