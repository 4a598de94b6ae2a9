//! Item/response data model, JSONL ingestion, seeded splits, and
//! gaming-to-correct leakage detection.
//!
//! A corpus file is JSON Lines with a `kind` discriminator per record:
//!
//! ```text
//! {"kind":"item","item_id":"i1","stem":"...","lead_in":"...","correct_answers":["..."]}
//! {"kind":"response","response_id":"r1","item_id":"i1","text":"...","gold_label":"correct","provenance":"real"}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text;

/// One short-answer question: a clinical vignette, the question itself, and
/// the acceptable correct answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub stem: String,
    pub lead_in: String,
    pub correct_answers: Vec<String>,
}

/// Binary grading outcome. `Correct` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Correct,
    Incorrect,
}

/// Where a response came from: a real examinee or one of the gaming
/// generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "real")]
    Real,
    /// Non-consecutive stem-word samples.
    #[serde(rename = "s1a")]
    GamingS1a,
    /// Consecutive stem-word windows.
    #[serde(rename = "s1b")]
    GamingS1b,
    /// Stem words restricted to a medical-term lexicon.
    #[serde(rename = "s1c")]
    GamingS1c,
    /// Extractive vignette summaries.
    #[serde(rename = "s2")]
    GamingS2,
    /// Mixed correct-plus-incorrect responses.
    #[serde(rename = "s3")]
    GamingS3,
}

impl Provenance {
    pub fn is_gaming(self) -> bool {
        self != Provenance::Real
    }

    /// Reporting key. The three stem-sampling variants pool into one
    /// strategy, mirroring the three-way strategy breakdown used throughout.
    pub fn strategy_key(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::GamingS1a | Provenance::GamingS1b | Provenance::GamingS1c => "s1",
            Provenance::GamingS2 => "s2",
            Provenance::GamingS3 => "s3",
        }
    }

    fn wire_name(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::GamingS1a => "s1a",
            Provenance::GamingS1b => "s1b",
            Provenance::GamingS1c => "s1c",
            Provenance::GamingS2 => "s2",
            Provenance::GamingS3 => "s3",
        }
    }
}

/// A candidate answer with its gold label and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub response_id: String,
    pub item_id: String,
    pub text: String,
    pub gold_label: GoldLabel,
    pub provenance: Provenance,
}

/// Strata used by [`split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratifyBy {
    Provenance,
    Item,
}

/// Seeded, stratified train/test split plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_fraction: f64,
    pub stratify_by: StratifyBy,
}

impl SplitPlan {
    pub fn new(seed: u64, train_fraction: f64, stratify_by: StratifyBy) -> Result<Self, CorpusError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(CorpusError::InvalidSplitFraction(train_fraction));
        }
        Ok(Self { seed, train_fraction, stratify_by })
    }
}

/// Output of [`split`]: a disjoint partition plus any small-stratum warnings.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Response>,
    pub test: Vec<Response>,
    pub warnings: Vec<String>,
}

/// A gaming response whose text exactly matches a correct reference after
/// trimming and case-folding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakPair {
    pub gaming_id: String,
    pub matched_id: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate item_id {0:?}")]
    DuplicateItemId(String),
    #[error("duplicate response_id {0:?}")]
    DuplicateResponseId(String),
    #[error("response {response_id:?} references unknown item {item_id:?}")]
    DanglingItemRef { response_id: String, item_id: String },
    #[error("invalid item {item_id:?}: {reason}")]
    InvalidItem { item_id: String, reason: String },
    #[error("invalid response {response_id:?}: {reason}")]
    InvalidResponse { response_id: String, reason: String },
    #[error("gaming response {0:?} is labeled correct; artificial responses must be incorrect")]
    GamingLabeledCorrect(String),
    #[error("train_fraction {0} outside the open interval (0,1)")]
    InvalidSplitFraction(f64),
    #[error("cannot split an empty response list")]
    EmptySplitInput,
}

/// An in-memory corpus. Immutable after load; safe for concurrent reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub items: Vec<Item>,
    pub responses: Vec<Response>,
}

impl Corpus {
    pub fn new(items: Vec<Item>, responses: Vec<Response>) -> Result<Self, CorpusError> {
        let corpus = Self { items, responses };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Check every data-model invariant: unique ids, resolvable references,
    /// non-empty text fields, and the gold-label rule for gaming provenance.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut item_ids = HashSet::new();
        for item in &self.items {
            validate_item(item)?;
            if !item_ids.insert(item.item_id.as_str()) {
                return Err(CorpusError::DuplicateItemId(item.item_id.clone()));
            }
        }
        let mut response_ids = HashSet::new();
        for response in &self.responses {
            validate_response(response)?;
            if !response_ids.insert(response.response_id.as_str()) {
                return Err(CorpusError::DuplicateResponseId(response.response_id.clone()));
            }
            if !item_ids.contains(response.item_id.as_str()) {
                return Err(CorpusError::DanglingItemRef {
                    response_id: response.response_id.clone(),
                    item_id: response.item_id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn item(&self, item_id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    /// item_id -> item lookup for hot paths.
    pub fn item_map(&self) -> HashMap<&str, &Item> {
        self.items.iter().map(|i| (i.item_id.as_str(), i)).collect()
    }

    pub fn real_responses(&self) -> Vec<Response> {
        self.responses.iter().filter(|r| r.provenance == Provenance::Real).cloned().collect()
    }
}

fn validate_item(item: &Item) -> Result<(), CorpusError> {
    let fail = |reason: &str| CorpusError::InvalidItem {
        item_id: item.item_id.clone(),
        reason: reason.to_string(),
    };
    if item.item_id.trim().is_empty() {
        return Err(fail("empty item_id"));
    }
    if item.stem.trim().is_empty() {
        return Err(fail("empty stem"));
    }
    if item.correct_answers.is_empty() {
        return Err(fail("no correct answers"));
    }
    if item.correct_answers.iter().any(|a| a.trim().is_empty()) {
        return Err(fail("blank correct answer"));
    }
    Ok(())
}

fn validate_response(response: &Response) -> Result<(), CorpusError> {
    if response.response_id.trim().is_empty() {
        return Err(CorpusError::InvalidResponse {
            response_id: response.response_id.clone(),
            reason: "empty response_id".to_string(),
        });
    }
    if response.text.trim().is_empty() {
        return Err(CorpusError::InvalidResponse {
            response_id: response.response_id.clone(),
            reason: "empty text".to_string(),
        });
    }
    if response.provenance.is_gaming() && response.gold_label == GoldLabel::Correct {
        return Err(CorpusError::GamingLabeledCorrect(response.response_id.clone()));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum Record {
    #[serde(rename = "item")]
    Item {
        item_id: String,
        stem: String,
        lead_in: String,
        correct_answers: Vec<String>,
    },
    #[serde(rename = "response")]
    Response {
        response_id: String,
        item_id: String,
        text: String,
        gold_label: GoldLabel,
        provenance: Provenance,
    },
}

/// Load and validate a JSONL corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let file = File::open(path.as_ref())?;
    read_corpus(BufReader::new(file))
}

/// Load a corpus from any reader; errors carry 1-based line numbers.
pub fn read_corpus(reader: impl Read) -> Result<Corpus, CorpusError> {
    let mut items = Vec::new();
    let mut responses = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        match record {
            Record::Item { item_id, stem, lead_in, correct_answers } => {
                items.push(Item { item_id, stem, lead_in, correct_answers });
            }
            Record::Response { response_id, item_id, text, gold_label, provenance } => {
                responses.push(Response { response_id, item_id, text, gold_label, provenance });
            }
        }
    }
    Corpus::new(items, responses)
}

/// Write a corpus as JSONL: items first, then responses.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut file = File::create(path.as_ref())?;
    write_corpus(corpus, &mut file)
}

pub fn write_corpus(corpus: &Corpus, writer: &mut impl Write) -> Result<(), CorpusError> {
    for item in &corpus.items {
        let record = Record::Item {
            item_id: item.item_id.clone(),
            stem: item.stem.clone(),
            lead_in: item.lead_in.clone(),
            correct_answers: item.correct_answers.clone(),
        };
        writeln!(writer, "{}", serde_json::to_string(&record).expect("serializable record"))?;
    }
    for response in &corpus.responses {
        writeln!(writer, "{}", serde_json::to_string(&response_record(response)).expect("serializable record"))?;
    }
    Ok(())
}

/// Serialize responses alone (gaming pools are stored as response-only files).
pub fn write_responses(responses: &[Response], writer: &mut impl Write) -> Result<(), CorpusError> {
    for response in responses {
        writeln!(writer, "{}", serde_json::to_string(&response_record(response)).expect("serializable record"))?;
    }
    Ok(())
}

/// Load a response-only JSONL file against a known corpus (for item refs).
pub fn load_responses(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<Response>, CorpusError> {
    let file = File::open(path.as_ref())?;
    let item_ids: HashSet<&str> = corpus.items.iter().map(|i| i.item_id.as_str()).collect();
    let mut responses = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        match record {
            Record::Item { item_id, .. } => {
                return Err(CorpusError::MalformedLine {
                    line: idx + 1,
                    message: format!("unexpected item record {item_id:?} in a response file"),
                })
            }
            Record::Response { response_id, item_id, text, gold_label, provenance } => {
                let response = Response { response_id, item_id, text, gold_label, provenance };
                validate_response(&response)?;
                if !item_ids.contains(response.item_id.as_str()) {
                    return Err(CorpusError::DanglingItemRef {
                        response_id: response.response_id.clone(),
                        item_id: response.item_id.clone(),
                    });
                }
                responses.push(response);
            }
        }
    }
    Ok(responses)
}

fn response_record(response: &Response) -> Record {
    Record::Response {
        response_id: response.response_id.clone(),
        item_id: response.item_id.clone(),
        text: response.text.clone(),
        gold_label: response.gold_label,
        provenance: response.provenance,
    }
}

/// Seeded stratified split. Within each stratum exactly
/// `round(train_fraction * n)` responses go to train. A stratum with fewer
/// than two responses cannot appear on both sides; it goes wholly to train
/// with a warning. Deterministic for a fixed plan regardless of input order.
pub fn split(responses: &[Response], plan: &SplitPlan) -> Result<Split, CorpusError> {
    if responses.is_empty() {
        return Err(CorpusError::EmptySplitInput);
    }
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
        return Err(CorpusError::InvalidSplitFraction(plan.train_fraction));
    }

    let mut strata: BTreeMap<String, Vec<&Response>> = BTreeMap::new();
    for response in responses {
        let key = match plan.stratify_by {
            StratifyBy::Provenance => response.provenance.wire_name().to_string(),
            StratifyBy::Item => response.item_id.clone(),
        };
        strata.entry(key).or_default().push(response);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for (key, mut members) in strata {
        members.sort_by(|a, b| a.response_id.cmp(&b.response_id));
        if members.len() < 2 {
            warnings.push(format!(
                "stratum {key:?} has {} response(s); assigning all to train",
                members.len()
            ));
            train.extend(members.into_iter().cloned());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(text::derive_seed(plan.seed, &key));
        members.shuffle(&mut rng);
        let n_train = (plan.train_fraction * members.len() as f64).round() as usize;
        for (i, member) in members.into_iter().enumerate() {
            if i < n_train {
                train.push(member.clone());
            } else {
                test.push(member.clone());
            }
        }
    }
    Ok(Split { train, test, warnings })
}

/// Report every (gaming, correct-reference) pair whose texts are equal after
/// trimming whitespace and case-folding. Pairs are reported, never removed.
pub fn leak_check(gaming: &[Response], reference_correct: &[Response]) -> Vec<LeakPair> {
    let mut by_text: HashMap<String, Vec<&str>> = HashMap::new();
    for reference in reference_correct {
        by_text.entry(text::fold(&reference.text)).or_default().push(&reference.response_id);
    }
    let mut pairs = Vec::new();
    for g in gaming {
        if let Some(matches) = by_text.get(&text::fold(&g.text)) {
            let mut matched: Vec<&str> = matches.clone();
            matched.sort_unstable();
            for m in matched {
                pairs.push(LeakPair { gaming_id: g.response_id.clone(), matched_id: m.to_string() });
            }
        }
    }
    pairs
}
