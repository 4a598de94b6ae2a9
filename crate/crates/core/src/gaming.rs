//! Generators for the three families of adversarial "gaming" responses, plus
//! the operational subsample.
//!
//! Strategy 1 samples words from the item stem (non-consecutive, consecutive,
//! and medical-lexicon variants). Strategy 2 answers with a summary of the
//! vignette. Strategy 3 mixes a correct answer with a plausible incorrect one.
//! Every generated response is labeled incorrect. Generators are pure
//! functions of (item, config, seed), so callers may parallelize across items.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{GoldLabel, Item, Provenance, Response};
use crate::text;

const BUILTIN_STOP_WORDS: &str = include_str!("../assets/stopwords.txt");
const BUILTIN_MEDICAL_TERMS: &str = include_str!("../assets/medical_terms.txt");

/// Knobs shared by all generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Word-count bounds for sampled responses; k is drawn uniformly from
    /// [k_min, min(k_max, available)].
    pub k_min: usize,
    pub k_max: usize,
    pub summary_sentence_count: usize,
    pub mixed_separator: String,
    /// How many incorrect answers a mixed response carries (default 1).
    pub mixed_incorrect_parts: usize,
    pub subsample_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k_min: 2,
            k_max: 12,
            summary_sentence_count: 2,
            mixed_separator: "; ".to_string(),
            mixed_incorrect_parts: 1,
            subsample_rate: 0.05,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GamingError> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(GamingError::InvalidConfig(format!(
                "word-count bounds must satisfy 1 <= k_min <= k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.summary_sentence_count == 0 {
            return Err(GamingError::InvalidConfig("summary_sentence_count must be positive".into()));
        }
        if self.mixed_incorrect_parts == 0 {
            return Err(GamingError::InvalidConfig("mixed_incorrect_parts must be positive".into()));
        }
        if !(self.subsample_rate > 0.0 && self.subsample_rate <= 1.0) {
            return Err(GamingError::InvalidConfig(format!(
                "subsample_rate must be in (0,1], got {}",
                self.subsample_rate
            )));
        }
        Ok(())
    }
}

/// Stop-word and medical-term lexicons. Stored lowercase; lookups are
/// case-insensitive by construction.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub stop_words: HashSet<String>,
    pub medical_terms: HashSet<String>,
}

impl Lexicons {
    /// The lexicons bundled with the crate.
    pub fn builtin() -> Self {
        Self {
            stop_words: parse_lexicon(BUILTIN_STOP_WORDS),
            medical_terms: parse_lexicon(BUILTIN_MEDICAL_TERMS),
        }
    }

    /// Load both lexicons from newline-delimited files ("#" comments allowed).
    pub fn from_files(
        stop_words: impl AsRef<Path>,
        medical_terms: impl AsRef<Path>,
    ) -> Result<Self, GamingError> {
        Ok(Self {
            stop_words: load_lexicon_file(stop_words)?,
            medical_terms: load_lexicon_file(medical_terms)?,
        })
    }

    pub fn is_stop(&self, token: &str) -> bool {
        self.stop_words.contains(&token.to_lowercase())
    }
}

fn parse_lexicon(content: &str) -> HashSet<String> {
    content
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Load a single lexicon file.
pub fn load_lexicon_file(path: impl AsRef<Path>) -> Result<HashSet<String>, GamingError> {
    let content = fs::read_to_string(path.as_ref()).map_err(|e| GamingError::LexiconFile {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    Ok(parse_lexicon(&content))
}

/// Generator output: the responses plus any warnings (short stems, empty
/// pools) that produced fewer responses than requested.
#[derive(Debug, Clone, Default)]
pub struct Generated {
    pub responses: Vec<Response>,
    pub warnings: Vec<String>,
}

/// Externally produced summary (e.g. from an LLM), ingested from JSONL.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExternalSummary {
    pub item_id: String,
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum GamingError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("cannot read lexicon file {path:?}: {source}")]
    LexiconFile { path: String, source: std::io::Error },
    #[error("item {0:?} has an empty stem")]
    EmptyStem(String),
    #[error("malformed summary record on line {line}: {message}")]
    MalformedSummary { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn gen_rng(cfg: &GeneratorConfig, item_id: &str, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(text::derive_seed(cfg.seed, &format!("{tag}:{item_id}")))
}

fn gaming_response(item_id: &str, provenance: Provenance, tag: &str, index: usize, text: String) -> Response {
    Response {
        response_id: format!("{item_id}:{tag}:{index:04}"),
        item_id: item_id.to_string(),
        text,
        gold_label: GoldLabel::Incorrect,
        provenance,
    }
}

/// Distinct tokens in first-occurrence order.
fn dedup_preserving_order(tokens: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    tokens.into_iter().filter(|t| seen.insert(t.clone())).collect()
}

fn draw_k(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, available: usize) -> usize {
    let hi = cfg.k_max.min(available);
    rng.random_range(cfg.k_min..=hi)
}

/// Sample `k` distinct positions out of `pool_len`, returned ascending.
fn sample_positions(rng: &mut ChaCha8Rng, pool_len: usize, k: usize) -> Vec<usize> {
    let mut picks: Vec<usize> = rand::seq::index::sample(rng, pool_len, k).into_vec();
    picks.sort_unstable();
    picks
}

/// Strategy 1a: k distinct non-stop-word stem tokens, emitted in stem order.
pub fn gen_s1_nonconsecutive(
    item: &Item,
    cfg: &GeneratorConfig,
    lex: &Lexicons,
    n: usize,
) -> Generated {
    let pool = dedup_preserving_order(
        text::tokenize_keeping(&item.stem, &lex.medical_terms)
            .into_iter()
            .filter(|t| !lex.stop_words.contains(t))
            .collect(),
    );
    sample_from_pool(item, cfg, n, pool, "s1a", Provenance::GamingS1a)
}

/// Strategy 1c: like 1a but restricted to stem tokens that also appear in the
/// medical-term lexicon.
pub fn gen_s1_medical(item: &Item, cfg: &GeneratorConfig, lex: &Lexicons, n: usize) -> Generated {
    let pool = dedup_preserving_order(
        text::tokenize_keeping(&item.stem, &lex.medical_terms)
            .into_iter()
            .filter(|t| lex.medical_terms.contains(t))
            .collect(),
    );
    if pool.is_empty() {
        return Generated {
            responses: Vec::new(),
            warnings: vec![format!(
                "item {:?}: stem shares no tokens with the medical-term lexicon; no s1c responses",
                item.item_id
            )],
        };
    }
    sample_from_pool(item, cfg, n, pool, "s1c", Provenance::GamingS1c)
}

fn sample_from_pool(
    item: &Item,
    cfg: &GeneratorConfig,
    n: usize,
    pool: Vec<String>,
    tag: &str,
    provenance: Provenance,
) -> Generated {
    if pool.len() < cfg.k_min {
        return Generated {
            responses: Vec::new(),
            warnings: vec![format!(
                "item {:?}: only {} usable stem token(s), need at least {}; no {tag} responses",
                item.item_id,
                pool.len(),
                cfg.k_min
            )],
        };
    }
    let mut rng = gen_rng(cfg, &item.item_id, tag);
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        let k = draw_k(&mut rng, cfg, pool.len());
        let picks = sample_positions(&mut rng, pool.len(), k);
        let words: Vec<&str> = picks.iter().map(|&p| pool[p].as_str()).collect();
        responses.push(gaming_response(&item.item_id, provenance, tag, i, words.join(" ")));
    }
    Generated { responses, warnings: Vec::new() }
}

/// Strategy 1b: a contiguous window of k tokens from the raw stem token
/// sequence (stop words retained inside the window).
pub fn gen_s1_consecutive(item: &Item, cfg: &GeneratorConfig, n: usize) -> Generated {
    let tokens = text::tokenize(&item.stem);
    if tokens.len() < cfg.k_min {
        return Generated {
            responses: Vec::new(),
            warnings: vec![format!(
                "item {:?}: stem has {} token(s), need at least {}; no s1b responses",
                item.item_id,
                tokens.len(),
                cfg.k_min
            )],
        };
    }
    let mut rng = gen_rng(cfg, &item.item_id, "s1b");
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        let k = draw_k(&mut rng, cfg, tokens.len());
        let start = rng.random_range(0..=tokens.len() - k);
        let window = tokens[start..start + k].join(" ");
        responses.push(gaming_response(&item.item_id, Provenance::GamingS1b, "s1b", i, window));
    }
    Generated { responses, warnings: Vec::new() }
}

/// Strategy 2: a deterministic extractive summary of the stem. Sentences are
/// scored by the sum of whole-stem term frequencies of their non-stop tokens,
/// divided by sentence token count; the top `summary_sentence_count`
/// sentences are emitted in original order.
pub fn gen_s2_summary(item: &Item, cfg: &GeneratorConfig, lex: &Lexicons) -> Result<Response, GamingError> {
    if item.stem.trim().is_empty() {
        return Err(GamingError::EmptyStem(item.item_id.clone()));
    }
    let sents = text::sentences(&item.stem);
    if sents.is_empty() {
        return Err(GamingError::EmptyStem(item.item_id.clone()));
    }

    let stem_tokens = text::tokenize(&item.stem);
    let mut stem_tf: std::collections::HashMap<&str, f64> = std::collections::HashMap::new();
    for token in &stem_tokens {
        *stem_tf.entry(token.as_str()).or_insert(0.0) += 1.0;
    }

    let mut scored: Vec<(usize, f64)> = sents
        .iter()
        .enumerate()
        .map(|(idx, sentence)| {
            let tokens = text::tokenize(sentence);
            if tokens.is_empty() {
                return (idx, 0.0);
            }
            let sum: f64 = tokens
                .iter()
                .filter(|t| !lex.stop_words.contains(*t))
                .map(|t| stem_tf.get(t.as_str()).copied().unwrap_or(0.0))
                .sum();
            (idx, sum / tokens.len() as f64)
        })
        .collect();
    // Highest score first; earlier sentence wins ties.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut selected: Vec<usize> =
        scored.iter().take(cfg.summary_sentence_count).map(|&(idx, _)| idx).collect();
    selected.sort_unstable();
    let summary = selected.iter().map(|&i| sents[i].as_str()).collect::<Vec<_>>().join(" ");

    Ok(gaming_response(
        &item.item_id,
        Provenance::GamingS2,
        "s2",
        cfg.summary_sentence_count,
        summary,
    ))
}

/// Ingest externally produced summaries (JSONL `{"item_id":..., "text":...}`).
pub fn load_external_summaries(path: impl AsRef<Path>) -> Result<Vec<ExternalSummary>, GamingError> {
    let file = fs::File::open(path.as_ref())?;
    let mut summaries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let summary: ExternalSummary =
            serde_json::from_str(&line).map_err(|e| GamingError::MalformedSummary {
                line: idx + 1,
                message: e.to_string(),
            })?;
        summaries.push(summary);
    }
    Ok(summaries)
}

/// Turn external summaries into strategy-2 responses.
pub fn external_summaries_to_responses(summaries: &[ExternalSummary]) -> Vec<Response> {
    summaries
        .iter()
        .enumerate()
        .map(|(i, s)| gaming_response(&s.item_id, Provenance::GamingS2, "s2ext", i, s.text.clone()))
        .collect()
}

/// Strategy 3: one correct answer and sampled incorrect answers joined by the
/// configured separator, part order shuffled per seed.
pub fn gen_s3_mixed(
    item: &Item,
    incorrect_pool: &[Response],
    cfg: &GeneratorConfig,
    n: usize,
) -> Generated {
    if incorrect_pool.is_empty() {
        return Generated {
            responses: Vec::new(),
            warnings: vec![format!(
                "item {:?}: no incorrect responses available to mix; no s3 responses",
                item.item_id
            )],
        };
    }
    let mut rng = gen_rng(cfg, &item.item_id, "s3");
    let n_incorrect = cfg.mixed_incorrect_parts.min(incorrect_pool.len());
    let mut responses = Vec::with_capacity(n);
    for i in 0..n {
        let correct = &item.correct_answers[rng.random_range(0..item.correct_answers.len())];
        let picks = rand::seq::index::sample(&mut rng, incorrect_pool.len(), n_incorrect);
        let mut parts: Vec<&str> = vec![correct.as_str()];
        parts.extend(picks.iter().map(|p| incorrect_pool[p].text.as_str()));
        parts.shuffle(&mut rng);
        responses.push(gaming_response(
            &item.item_id,
            Provenance::GamingS3,
            "s3",
            i,
            parts.join(&cfg.mixed_separator),
        ));
    }
    Generated { responses, warnings: Vec::new() }
}

/// Uniform subsample without replacement of exactly `round(rate * n)`
/// responses, deterministic per seed, input order preserved.
///
/// # Panics
/// Panics when `rate` is outside `(0, 1]`; validate configs first.
pub fn subsample(responses: &[Response], rate: f64, seed: u64) -> Vec<Response> {
    assert!(rate > 0.0 && rate <= 1.0, "subsample rate must be in (0,1], got {rate}");
    let take = (rate * responses.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, responses.len(), take).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|p| responses[p].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn test_item(stem: &str) -> Item {
        Item {
            item_id: "i1".to_string(),
            stem: stem.to_string(),
            lead_in: "What is the most likely diagnosis?".to_string(),
            correct_answers: vec!["bronchiectasis".to_string()],
        }
    }

    fn lex(stops: &[&str], medical: &[&str]) -> Lexicons {
        Lexicons {
            stop_words: stops.iter().map(|s| s.to_string()).collect(),
            medical_terms: medical.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn s1a_fixed_k_preserves_stem_order() {
        let item = test_item("fever and cough for three days");
        let lexicons = lex(&["and", "for"], &[]);
        let cfg = GeneratorConfig { seed: 5, k_min: 2, k_max: 2, ..Default::default() };
        let out = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 20);
        assert_eq!(out.responses.len(), 20);
        let order = ["fever", "cough", "three", "days"];
        for r in &out.responses {
            let words: Vec<&str> = r.text.split(' ').collect();
            assert_eq!(words.len(), 2);
            let positions: Vec<usize> =
                words.iter().map(|w| order.iter().position(|o| o == w).unwrap()).collect();
            assert!(positions[0] < positions[1], "stem order violated in {:?}", r.text);
            assert_eq!(r.gold_label, GoldLabel::Incorrect);
            assert_eq!(r.provenance, Provenance::GamingS1a);
        }
    }

    #[test]
    fn s1a_clamps_k_to_available_tokens() {
        let item = test_item("fever cough days");
        let lexicons = lex(&[], &[]);
        let cfg = GeneratorConfig { seed: 1, k_min: 2, k_max: 50, ..Default::default() };
        let out = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 10);
        assert!(out.responses.iter().all(|r| r.text.split(' ').count() <= 3));
    }

    #[test]
    fn s1a_short_stem_warns_and_returns_empty() {
        let item = test_item("fever");
        let lexicons = lex(&[], &[]);
        let cfg = GeneratorConfig { seed: 1, k_min: 2, ..Default::default() };
        let out = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 10);
        assert!(out.responses.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn s1a_membership_oracle_over_twenty_token_stem() {
        let item = test_item(
            "a b patient presents with fever cough weakness fatigue nausea headache \
             dizziness rash edema pallor tremor numbness tingling chills sweats vertigo",
        );
        let lexicons = lex(&["a", "with"], &[]);
        let cfg = GeneratorConfig { seed: 7, ..Default::default() };
        let vocab: BTreeSet<String> = text::tokenize(&item.stem).into_iter().collect();
        let out = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 200);
        assert_eq!(out.responses.len(), 200);
        for r in &out.responses {
            for word in r.text.split(' ') {
                assert!(vocab.contains(word), "{word:?} not in stem vocabulary");
                assert!(!lexicons.stop_words.contains(word), "{word:?} is a stop word");
            }
        }
    }

    #[test]
    fn s1b_full_stem_window() {
        let item = test_item("fever and cough for days");
        let cfg = GeneratorConfig { seed: 3, k_min: 5, k_max: 5, ..Default::default() };
        let out = gen_s1_consecutive(&item, &cfg, 4);
        for r in &out.responses {
            assert_eq!(r.text, "fever and cough for days");
        }
    }

    #[test]
    fn s1b_windows_are_contiguous() {
        let item = test_item("a b c");
        let cfg = GeneratorConfig { seed: 9, k_min: 2, k_max: 2, ..Default::default() };
        let out = gen_s1_consecutive(&item, &cfg, 30);
        for r in &out.responses {
            assert!(r.text == "a b" || r.text == "b c", "non-contiguous window {:?}", r.text);
        }
    }

    #[test]
    fn s1b_windows_lie_in_enumerated_window_set() {
        let item = test_item("t1 t2 t3 t4 t5 t6 t7 t8 t9 t10");
        let cfg = GeneratorConfig { seed: 11, k_min: 3, k_max: 3, ..Default::default() };
        let tokens = text::tokenize(&item.stem);
        let valid: BTreeSet<String> = (0..=tokens.len() - 3).map(|s| tokens[s..s + 3].join(" ")).collect();
        assert_eq!(valid.len(), 8);
        let out = gen_s1_consecutive(&item, &cfg, 100);
        for r in &out.responses {
            assert!(valid.contains(&r.text), "{:?} not one of the 8 valid windows", r.text);
        }
    }

    #[test]
    fn s1c_restricted_to_lexicon_intersection() {
        let item = test_item("fever cough taxi");
        let lexicons = lex(&[], &["fever", "cough"]);
        let cfg = GeneratorConfig { seed: 2, k_min: 1, k_max: 2, ..Default::default() };
        let out = gen_s1_medical(&item, &cfg, &lexicons, 50);
        for r in &out.responses {
            for word in r.text.split(' ') {
                assert!(word == "fever" || word == "cough");
            }
        }
    }

    #[test]
    fn s1c_disjoint_lexicon_warns() {
        let item = test_item("fever cough taxi");
        let lexicons = lex(&[], &["syncope"]);
        let cfg = GeneratorConfig::default();
        let out = gen_s1_medical(&item, &cfg, &lexicons, 5);
        assert!(out.responses.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn s1c_membership_oracle_on_clinical_stem() {
        let item = test_item(
            "Progressive weakness of the legs with absent reflexes. \
             Pulse oximetry shows an oxygen saturation of 99 percent. \
             The sensation is mildly decreased over both feet.",
        );
        let lexicons = lex(&["the", "of", "with", "is", "an"], &["weakness", "reflexes", "oximetry", "sensation"]);
        let cfg = GeneratorConfig { seed: 21, k_min: 1, k_max: 4, ..Default::default() };
        let out = gen_s1_medical(&item, &cfg, &lexicons, 80);
        assert!(!out.responses.is_empty());
        for r in &out.responses {
            for word in r.text.split(' ') {
                assert!(lexicons.medical_terms.contains(word), "{word:?} outside lexicon hits");
            }
        }
    }

    #[test]
    fn s2_single_sentence_stem_is_identity() {
        let item = test_item("Progressive weakness of the legs.");
        let cfg = GeneratorConfig { summary_sentence_count: 2, ..Default::default() };
        let summary = gen_s2_summary(&item, &cfg, &Lexicons::builtin()).unwrap();
        assert_eq!(summary.text, "Progressive weakness of the legs.");
        assert_eq!(summary.provenance, Provenance::GamingS2);
    }

    #[test]
    fn s2_skips_stop_word_only_sentence() {
        let item = test_item("And of the with. Weakness weakness cough.");
        let lexicons = lex(&["and", "of", "the", "with"], &[]);
        let cfg = GeneratorConfig { summary_sentence_count: 1, ..Default::default() };
        let summary = gen_s2_summary(&item, &cfg, &lexicons).unwrap();
        assert_eq!(summary.text, "Weakness weakness cough.");
    }

    #[test]
    fn s2_hand_scored_three_sentence_stem() {
        // Whole-stem term frequencies: fever=4, cough=2, rash=1.
        //   "Fever fever fever." -> (4+4+4)/3 = 4.0
        //   "Fever cough."       -> (4+2)/2  = 3.0
        //   "Cough rash."        -> (2+1)/2  = 1.5
        // Top two sentences are the first two, emitted in original order.
        let item = test_item("Fever fever fever. Fever cough. Cough rash.");
        let lexicons = lex(&[], &[]);
        let cfg = GeneratorConfig { summary_sentence_count: 2, ..Default::default() };
        let summary = gen_s2_summary(&item, &cfg, &lexicons).unwrap();
        assert_eq!(summary.text, "Fever fever fever. Fever cough.");
    }

    #[test]
    fn s3_contains_one_correct_and_one_incorrect() {
        let item = test_item("irrelevant stem");
        let pool = vec![Response {
            response_id: "r9".into(),
            item_id: "i1".into(),
            text: "chronic obstructive pulmonary disease".into(),
            gold_label: GoldLabel::Incorrect,
            provenance: Provenance::Real,
        }];
        let cfg = GeneratorConfig { seed: 13, ..Default::default() };
        let out = gen_s3_mixed(&item, &pool, &cfg, 10);
        for r in &out.responses {
            assert!(
                r.text == "chronic obstructive pulmonary disease; bronchiectasis"
                    || r.text == "bronchiectasis; chronic obstructive pulmonary disease",
                "unexpected mix {:?}",
                r.text
            );
        }
        // Both orders appear over enough draws.
        let orders: BTreeSet<&str> = out.responses.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(orders.len(), 2);
    }

    #[test]
    fn s3_substring_oracle() {
        let mut item = test_item("irrelevant stem");
        item.correct_answers = vec!["answer one".into(), "answer two".into()];
        let pool: Vec<Response> = (0..5)
            .map(|i| Response {
                response_id: format!("p{i}"),
                item_id: "i1".into(),
                text: format!("wrong answer number {i}"),
                gold_label: GoldLabel::Incorrect,
                provenance: Provenance::Real,
            })
            .collect();
        let cfg = GeneratorConfig { seed: 17, ..Default::default() };
        let out = gen_s3_mixed(&item, &pool, &cfg, 100);
        assert_eq!(out.responses.len(), 100);
        for r in &out.responses {
            assert!(
                item.correct_answers.iter().any(|a| r.text.contains(a.as_str())),
                "no full correct answer inside {:?}",
                r.text
            );
            assert_eq!(r.gold_label, GoldLabel::Incorrect);
        }
    }

    #[test]
    fn s3_empty_pool_warns() {
        let item = test_item("stem");
        let out = gen_s3_mixed(&item, &[], &GeneratorConfig::default(), 5);
        assert!(out.responses.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn subsample_exact_count_and_identity() {
        let responses: Vec<Response> = (0..100)
            .map(|i| Response {
                response_id: format!("r{i}"),
                item_id: "i1".into(),
                text: format!("text {i}"),
                gold_label: GoldLabel::Incorrect,
                provenance: Provenance::GamingS1a,
            })
            .collect();
        assert_eq!(subsample(&responses, 0.05, 1).len(), 5);
        assert_eq!(subsample(&responses, 1.0, 1), responses);
    }

    #[test]
    fn subsample_mirrors_operational_strategy_counts() {
        // 5% of the raw strategy pools: 293_140 -> 14_657, 11_460 -> 573,
        // 11_680 -> 584.
        for (raw, expected) in [(293_140usize, 14_657usize), (11_460, 573), (11_680, 584)] {
            assert_eq!((0.05f64 * raw as f64).round() as usize, expected);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let item = test_item("fever and cough with weakness for three long days of malaise");
        let lexicons = Lexicons::builtin();
        let cfg = GeneratorConfig { seed: 99, ..Default::default() };
        let a = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 25);
        let b = gen_s1_nonconsecutive(&item, &cfg, &lexicons, 25);
        assert_eq!(a.responses, b.responses);
        let a = gen_s1_consecutive(&item, &cfg, 25);
        let b = gen_s1_consecutive(&item, &cfg, 25);
        assert_eq!(a.responses, b.responses);
    }

    #[test]
    fn external_summaries_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summaries.jsonl");
        std::fs::write(&path, "{\"item_id\":\"i1\",\"text\":\"a short summary\"}\n").unwrap();
        let summaries = load_external_summaries(&path).unwrap();
        assert_eq!(summaries, vec![ExternalSummary { item_id: "i1".into(), text: "a short summary".into() }]);
        let responses = external_summaries_to_responses(&summaries);
        assert_eq!(responses[0].provenance, Provenance::GamingS2);
        assert_eq!(responses[0].gold_label, GoldLabel::Incorrect);
    }

    proptest! {
        /// Subsample size always equals round(rate * n).
        #[test]
        fn subsample_size_is_rounded_rate(n in 1usize..200, rate in 0.01f64..1.0, seed in any::<u64>()) {
            let responses: Vec<Response> = (0..n)
                .map(|i| Response {
                    response_id: format!("r{i}"),
                    item_id: "i1".into(),
                    text: "t".into(),
                    gold_label: GoldLabel::Incorrect,
                    provenance: Provenance::GamingS2,
                })
                .collect();
            let out = subsample(&responses, rate, seed);
            prop_assert_eq!(out.len(), (rate * n as f64).round() as usize);
        }

        /// S1b windows are always substrings of the whitespace-normalized stem.
        #[test]
        fn s1b_windows_are_substrings(seed in any::<u64>(), words in proptest::collection::vec("[a-z]{1,8}", 2..30)) {
            let stem = words.join(" ");
            let item = test_item(&stem);
            let cfg = GeneratorConfig { seed, k_min: 1, k_max: 6, ..Default::default() };
            let normalized = text::tokenize(&stem).join(" ");
            let out = gen_s1_consecutive(&item, &cfg, 8);
            for r in &out.responses {
                prop_assert!(normalized.contains(&r.text));
            }
        }
    }
}
