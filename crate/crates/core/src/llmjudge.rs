//! Scores responses with an external LLM endpoint under three prompting
//! strategies, with a content-addressed record/replay cache so every test and
//! rerun is deterministic and offline-safe.
//!
//! The prompt instructs the model to answer with a first line
//! `SCORE: correct` or `SCORE: incorrect` followed by `RATIONALE: ...`;
//! parsing is total: any output yields a verdict, unparseable ones
//! conservatively score incorrect and carry a parse-failure flag.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{GoldLabel, Item, Response};

/// The three prompting strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptStrategy {
    /// Question + response.
    #[serde(rename = "p1")]
    P1QuestionResponse,
    /// Question + correct-answer examples + response.
    #[serde(rename = "p2")]
    P2QuestionExamplesResponse,
    /// Correct-answer examples only + response.
    #[serde(rename = "p3")]
    P3ExamplesOnlyResponse,
}

impl PromptStrategy {
    fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            PromptStrategy::P1QuestionResponse => &["{stem}", "{lead_in}", "{response}"],
            PromptStrategy::P2QuestionExamplesResponse => {
                &["{stem}", "{lead_in}", "{correct_examples}", "{response}"]
            }
            PromptStrategy::P3ExamplesOnlyResponse => &["{correct_examples}", "{response}"],
        }
    }

    fn forbidden_placeholders(self) -> &'static [&'static str] {
        match self {
            PromptStrategy::P1QuestionResponse => &["{correct_examples}"],
            PromptStrategy::P2QuestionExamplesResponse => &[],
            PromptStrategy::P3ExamplesOnlyResponse => &["{stem}", "{lead_in}"],
        }
    }
}

const OUTPUT_CONTRACT: &str = "Answer on the first line with exactly \"SCORE: correct\" or \"SCORE: incorrect\".\nOn the next line write \"RATIONALE:\" followed by a brief explanation.";

const P1_TEMPLATE: &str = "You are grading a short-answer exam question.\n\nClinical scenario:\n{stem}\n\nQuestion: {lead_in}\n\nExaminee response:\n{response}\n\nScore the response as correct or incorrect.\n";

const P2_TEMPLATE: &str = "You are grading a short-answer exam question.\n\nClinical scenario:\n{stem}\n\nQuestion: {lead_in}\n\nExamples of correct answers:\n{correct_examples}\n\nExaminee response:\n{response}\n\nScore the response as correct or incorrect.\n";

const P3_TEMPLATE: &str = "You are grading a short-answer exam question. You only know examples of correct answers.\n\nExamples of correct answers:\n{correct_examples}\n\nExaminee response:\n{response}\n\nScore the response as correct or incorrect.\n";

/// A prompt template for one strategy. Placeholders: `{stem}`, `{lead_in}`,
/// `{correct_examples}`, `{response}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub strategy: PromptStrategy,
    pub template: String,
}

impl PromptTemplate {
    /// The bundled template for a strategy.
    pub fn builtin(strategy: PromptStrategy) -> Self {
        let body = match strategy {
            PromptStrategy::P1QuestionResponse => P1_TEMPLATE,
            PromptStrategy::P2QuestionExamplesResponse => P2_TEMPLATE,
            PromptStrategy::P3ExamplesOnlyResponse => P3_TEMPLATE,
        };
        Self { strategy, template: format!("{body}\n{OUTPUT_CONTRACT}\n") }
    }

    /// Validate a custom template: every placeholder the strategy requires,
    /// none it forbids, and the structured-output contract marker.
    pub fn new(strategy: PromptStrategy, template: String) -> Result<Self, JudgeError> {
        for required in strategy.required_placeholders() {
            if !template.contains(required) {
                return Err(JudgeError::InvalidTemplate(format!(
                    "{strategy:?} template must contain {required}"
                )));
            }
        }
        for forbidden in strategy.forbidden_placeholders() {
            if template.contains(forbidden) {
                return Err(JudgeError::InvalidTemplate(format!(
                    "{strategy:?} template must not contain {forbidden}"
                )));
            }
        }
        if !template.contains("SCORE:") {
            return Err(JudgeError::InvalidTemplate(
                "template must instruct the model to answer with a SCORE: line".to_string(),
            ));
        }
        Ok(Self { strategy, template })
    }
}

/// Substitute item and response fields into the template.
pub fn render_prompt(template: &PromptTemplate, item: &Item, response: &Response) -> Result<String, JudgeError> {
    let mut rendered = template.template.clone();
    for required in template.strategy.required_placeholders() {
        let value = match *required {
            "{stem}" => item.stem.clone(),
            "{lead_in}" => item.lead_in.clone(),
            "{correct_examples}" => {
                if item.correct_answers.is_empty() {
                    return Err(JudgeError::MissingPlaceholderData("correct_examples".to_string()));
                }
                item.correct_answers.iter().map(|a| format!("- {a}")).collect::<Vec<_>>().join("\n")
            }
            "{response}" => response.text.clone(),
            other => return Err(JudgeError::MissingPlaceholderData(other.to_string())),
        };
        if value.trim().is_empty() {
            return Err(JudgeError::MissingPlaceholderData(required.to_string()));
        }
        rendered = rendered.replace(required, &value);
    }
    Ok(rendered)
}

/// HTTP endpoint settings; the API key is read from the named environment
/// variable, never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub api_key_env: String,
    pub max_in_flight: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4".to_string(),
            temperature: 0.0,
            max_retries: 2,
            timeout_secs: 60,
            api_key_env: "GRADESHIELD_API_KEY".to_string(),
            max_in_flight: 4,
        }
    }
}

/// One stored exchange.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CacheEntry {
    pub model: String,
    pub prompt: String,
    pub raw_output: String,
}

/// Content-addressed store of raw LLM outputs: one JSON file per key under
/// the cache directory. Writes are serialized through a single lock.
#[derive(Debug)]
pub struct ReplayCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ReplayCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, JudgeError> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf(), write_lock: Mutex::new(()) })
    }

    /// Stable cache key: SHA-256 over the model name and prompt.
    pub fn key(model: &str, prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model.as_bytes());
        hasher.update([0u8]);
        hasher.update(prompt.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, JudgeError> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        let content = fs::read_to_string(&path)?;
        let entry = serde_json::from_str(&content).map_err(|e| JudgeError::CacheCorrupt {
            key: key.to_string(),
            message: e.to_string(),
        })?;
        Ok(Some(entry))
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> Result<(), JudgeError> {
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let json = serde_json::to_string_pretty(entry).expect("serializable entry");
        fs::write(self.path_for(key), json)?;
        Ok(())
    }
}

/// A parsed judge verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmVerdict {
    pub response_id: String,
    pub label: GoldLabel,
    pub rationale: String,
    pub raw_output: String,
    pub cached: bool,
    /// Set when no valid SCORE line was found; the label defaults to
    /// incorrect in that case.
    pub parse_failed: bool,
}

/// One prompt awaiting a verdict.
#[derive(Debug, Clone)]
pub struct ScoreRequest {
    pub response_id: String,
    pub prompt: String,
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("no data available for placeholder {0}")]
    MissingPlaceholderData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache entry {key} is corrupt: {message}")]
    CacheCorrupt { key: String, message: String },
    #[error("{missing} prompt(s) not in cache and no endpoint available (offline)")]
    ColdCacheOffline { missing: usize },
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("transport failure after retries: {0}")]
    Transport(String),
    #[error("endpoint returned unusable payload: {0}")]
    MalformedEndpointResponse(String),
    #[error("rationale tagging rules are empty")]
    EmptyRules,
}

/// Parse a raw model output into a verdict. Total: never fails, never panics.
pub fn parse_verdict(response_id: &str, raw_output: &str, cached: bool) -> LlmVerdict {
    let mut label = None;
    for line in raw_output.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_lowercase();
        if let Some(value) = lower.strip_prefix("score:") {
            let value = value.trim();
            if value.starts_with("incorrect") {
                label = Some(GoldLabel::Incorrect);
            } else if value.starts_with("correct") {
                label = Some(GoldLabel::Correct);
            }
            break;
        }
    }
    let rationale = raw_output
        .to_lowercase()
        .find("rationale:")
        .map(|pos| raw_output[pos + "rationale:".len()..].trim().to_string())
        .unwrap_or_default();
    LlmVerdict {
        response_id: response_id.to_string(),
        label: label.unwrap_or(GoldLabel::Incorrect),
        rationale,
        raw_output: raw_output.to_string(),
        cached,
        parse_failed: label.is_none(),
    }
}

/// Score a batch of prompts. Cache hits replay stored outputs; misses go to
/// the endpoint (bounded retries, bounded in-flight requests) unless
/// `offline` is set, in which case any miss is an error. Verdicts come back
/// in input order.
pub fn score_batch(
    requests: &[ScoreRequest],
    endpoint: &EndpointConfig,
    offline: bool,
    cache: &ReplayCache,
) -> Result<Vec<LlmVerdict>, JudgeError> {
    let mut raw_outputs: Vec<Option<(String, bool)>> = vec![None; requests.len()];
    let mut misses: Vec<usize> = Vec::new();
    for (i, request) in requests.iter().enumerate() {
        let key = ReplayCache::key(&endpoint.model, &request.prompt);
        match cache.get(&key)? {
            Some(entry) => raw_outputs[i] = Some((entry.raw_output, true)),
            None => misses.push(i),
        }
    }

    if !misses.is_empty() {
        if offline {
            return Err(JudgeError::ColdCacheOffline { missing: misses.len() });
        }
        let api_key = std::env::var(&endpoint.api_key_env)
            .map_err(|_| JudgeError::MissingApiKey(endpoint.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| JudgeError::Transport(e.to_string()))?;

        let cursor = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<String, JudgeError>>>> =
            Mutex::new((0..misses.len()).map(|_| None).collect());
        let workers = endpoint.max_in_flight.clamp(1, misses.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let slot = cursor.fetch_add(1, Ordering::SeqCst);
                    if slot >= misses.len() {
                        break;
                    }
                    let request = &requests[misses[slot]];
                    let outcome = call_endpoint(&client, endpoint, &api_key, &request.prompt)
                        .and_then(|raw| {
                            let key = ReplayCache::key(&endpoint.model, &request.prompt);
                            cache.put(
                                &key,
                                &CacheEntry {
                                    model: endpoint.model.clone(),
                                    prompt: request.prompt.clone(),
                                    raw_output: raw.clone(),
                                },
                            )?;
                            Ok(raw)
                        });
                    results.lock().expect("results lock poisoned")[slot] = Some(outcome);
                });
            }
        });

        let results = results.into_inner().expect("results lock poisoned");
        for (slot, outcome) in results.into_iter().enumerate() {
            let raw = outcome.expect("worker filled every slot")?;
            raw_outputs[misses[slot]] = Some((raw, false));
        }
    }

    Ok(requests
        .iter()
        .zip(raw_outputs)
        .map(|(request, stored)| {
            let (raw, cached) = stored.expect("every request resolved");
            parse_verdict(&request.response_id, &raw, cached)
        })
        .collect())
}

fn call_endpoint(
    client: &reqwest::blocking::Client,
    endpoint: &EndpointConfig,
    api_key: &str,
    prompt: &str,
) -> Result<String, JudgeError> {
    let body = serde_json::json!({
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
    });
    let mut last_error = String::new();
    for attempt in 0..=endpoint.max_retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(100 << attempt.min(6)));
        }
        match client.post(&endpoint.base_url).bearer_auth(api_key).json(&body).send() {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    let payload: serde_json::Value = response
                        .json()
                        .map_err(|e| JudgeError::MalformedEndpointResponse(e.to_string()))?;
                    return payload["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| {
                            JudgeError::MalformedEndpointResponse(
                                "missing choices[0].message.content".to_string(),
                            )
                        });
                }
                last_error = format!("http status {status}");
                // Retry throttling and server errors; give up on other 4xx.
                if !(status.as_u16() == 429 || status.is_server_error()) {
                    break;
                }
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(JudgeError::Transport(last_error))
}

/// Recurring explanation patterns in judge rationales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RationaleTag {
    /// The response matches the expected/intended correct pattern.
    PatternMatch,
    /// Specific keywords triggered the score.
    KeywordTrigger,
    /// Irrelevant material tolerated because it does not negate the answer.
    IrrelevantTolerated,
    /// Surface errors (misspellings, phrasing) penalized.
    SurfacePenalty,
    /// Broad category accepted in place of the specific diagnosis.
    OverGeneralization,
    Other,
}

/// One keyword rule: any phrase hit assigns the tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagRule {
    pub tag: RationaleTag,
    pub phrases: Vec<String>,
}

/// The default rule table distilled from observed rationale phrasing.
pub fn default_tag_rules() -> Vec<TagRule> {
    let rule = |tag, phrases: &[&str]| TagRule {
        tag,
        phrases: phrases.iter().map(|p| p.to_string()).collect(),
    };
    vec![
        rule(
            RationaleTag::PatternMatch,
            &["matches the expected", "aligns with the intended", "expected correct response", "intended correct pattern"],
        ),
        rule(RationaleTag::KeywordTrigger, &["keyword", "key descriptor", "specific phrase"]),
        rule(RationaleTag::IrrelevantTolerated, &["irrelevant", "does not negate", "do not negate"]),
        rule(RationaleTag::SurfacePenalty, &["misspell", "spelling", "typo"]),
        rule(
            RationaleTag::OverGeneralization,
            &["general disease category", "broad category", "vague term", "encompasses"],
        ),
    ]
}

/// Tag each verdict's rationale by case-insensitive phrase matching.
/// Rationales matching nothing get `Other`, so every verdict has at least one
/// tag.
pub fn tag_rationales(
    verdicts: &[LlmVerdict],
    rules: &[TagRule],
) -> Result<BTreeMap<String, BTreeSet<RationaleTag>>, JudgeError> {
    if rules.is_empty() {
        return Err(JudgeError::EmptyRules);
    }
    let mut tagged = BTreeMap::new();
    for verdict in verdicts {
        let rationale = verdict.rationale.to_lowercase();
        let mut tags = BTreeSet::new();
        for rule in rules {
            if rule.phrases.iter().any(|p| rationale.contains(&p.to_lowercase())) {
                tags.insert(rule.tag);
            }
        }
        if tags.is_empty() {
            tags.insert(RationaleTag::Other);
        }
        tagged.insert(verdict.response_id.clone(), tags);
    }
    Ok(tagged)
}

/// Tally tag frequencies across a verdict set.
pub fn tag_histogram(tags: &BTreeMap<String, BTreeSet<RationaleTag>>) -> BTreeMap<String, usize> {
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for set in tags.values() {
        for tag in set {
            *histogram.entry(format!("{tag:?}")).or_insert(0) += 1;
        }
    }
    histogram
}

/// HashMap-free convenience for tests and the CLI: index verdicts by id.
pub fn verdicts_by_id(verdicts: &[LlmVerdict]) -> HashMap<&str, &LlmVerdict> {
    verdicts.iter().map(|v| (v.response_id.as_str(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use proptest::prelude::*;

    fn item() -> Item {
        Item {
            item_id: "i1".to_string(),
            stem: "A previously healthy 26-year-old man has tingling and progressive weakness. Deep tendon reflexes are absent throughout.".to_string(),
            lead_in: "What is the most likely diagnosis?".to_string(),
            correct_answers: vec!["Guillain-Barré syndrome".to_string(), "acute immune-mediated polyneuropathy".to_string()],
        }
    }

    fn response(text: &str) -> Response {
        Response {
            response_id: "r1".to_string(),
            item_id: "i1".to_string(),
            text: text.to_string(),
            gold_label: GoldLabel::Correct,
            provenance: Provenance::Real,
        }
    }

    #[test]
    fn p1_embeds_stem_and_lead_in() {
        let template = PromptTemplate::builtin(PromptStrategy::P1QuestionResponse);
        let rendered = render_prompt(&template, &item(), &response("guillain barre")).unwrap();
        assert!(rendered.contains("progressive weakness"));
        assert!(rendered.contains("What is the most likely diagnosis?"));
        assert!(rendered.contains("guillain barre"));
        assert!(!rendered.contains("{stem}"));
        assert!(rendered.contains("SCORE:"));
    }

    #[test]
    fn p1_omits_correct_examples() {
        let template = PromptTemplate::builtin(PromptStrategy::P1QuestionResponse);
        let rendered = render_prompt(&template, &item(), &response("whatever")).unwrap();
        assert!(!rendered.contains("Guillain-Barré syndrome"));
    }

    #[test]
    fn p3_contains_no_stem_text() {
        let template = PromptTemplate::builtin(PromptStrategy::P3ExamplesOnlyResponse);
        let rendered = render_prompt(&template, &item(), &response("an answer")).unwrap();
        assert!(!rendered.contains("progressive weakness"));
        assert!(!rendered.contains("most likely diagnosis"));
        assert!(rendered.contains("Guillain-Barré syndrome"));
    }

    #[test]
    fn rendering_is_injective_in_response() {
        let template = PromptTemplate::builtin(PromptStrategy::P2QuestionExamplesResponse);
        let a = render_prompt(&template, &item(), &response("first response")).unwrap();
        let b = render_prompt(&template, &item(), &response("second response")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn template_validation_enforces_placeholder_rules() {
        let err = PromptTemplate::new(
            PromptStrategy::P1QuestionResponse,
            "SCORE: {stem} {response}".to_string(),
        );
        assert!(err.is_err(), "missing {{lead_in}}");
        let err = PromptTemplate::new(
            PromptStrategy::P3ExamplesOnlyResponse,
            "SCORE: {stem} {correct_examples} {response}".to_string(),
        );
        assert!(err.is_err(), "p3 must not reference the stem");
        let ok = PromptTemplate::new(
            PromptStrategy::P1QuestionResponse,
            "{stem} {lead_in} {response} SCORE:".to_string(),
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn parse_happy_path() {
        let verdict = parse_verdict("r1", "SCORE: Correct\nRATIONALE: matches expected answer", true);
        assert_eq!(verdict.label, GoldLabel::Correct);
        assert_eq!(verdict.rationale, "matches expected answer");
        assert!(!verdict.parse_failed);
        assert!(verdict.cached);
    }

    #[test]
    fn parse_incorrect_is_not_mistaken_for_correct() {
        let verdict = parse_verdict("r1", "SCORE: incorrect\nRATIONALE: wrong disease", false);
        assert_eq!(verdict.label, GoldLabel::Incorrect);
        assert!(!verdict.parse_failed);
    }

    #[test]
    fn parse_garbage_defaults_incorrect_with_flag() {
        for raw in ["", "complete nonsense", "SCORE: maybe?", "score correct", "RATIONALE: only"] {
            let verdict = parse_verdict("r1", raw, false);
            assert_eq!(verdict.label, GoldLabel::Incorrect, "raw {raw:?}");
            assert!(verdict.parse_failed, "raw {raw:?}");
        }
    }

    #[test]
    fn parse_tolerates_case_and_padding() {
        let verdict = parse_verdict("r1", "  score:   CORRECT  \nrationale:  fine  ", false);
        assert_eq!(verdict.label, GoldLabel::Correct);
        assert_eq!(verdict.rationale, "fine");
    }

    #[test]
    fn cache_key_is_stable_and_collision_free_at_scale() {
        assert_eq!(ReplayCache::key("m", "p"), ReplayCache::key("m", "p"));
        assert_ne!(ReplayCache::key("m", "p"), ReplayCache::key("m2", "p"));
        let mut keys = std::collections::HashSet::new();
        for i in 0..10_000 {
            assert!(keys.insert(ReplayCache::key("gpt-4", &format!("prompt number {i}"))));
        }
    }

    #[test]
    fn fully_cached_batch_replays_without_network() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::open(dir.path()).unwrap();
        let endpoint = EndpointConfig { base_url: "http://127.0.0.1:1/unreachable".to_string(), ..Default::default() };
        let requests: Vec<ScoreRequest> = (0..5)
            .map(|i| ScoreRequest { response_id: format!("r{i}"), prompt: format!("prompt {i}") })
            .collect();
        for request in &requests {
            let key = ReplayCache::key(&endpoint.model, &request.prompt);
            cache
                .put(
                    &key,
                    &CacheEntry {
                        model: endpoint.model.clone(),
                        prompt: request.prompt.clone(),
                        raw_output: format!("SCORE: incorrect\nRATIONALE: canned {}", request.response_id),
                    },
                )
                .unwrap();
        }
        let verdicts = score_batch(&requests, &endpoint, true, &cache).unwrap();
        assert_eq!(verdicts.len(), 5);
        assert!(verdicts.iter().all(|v| v.cached && v.label == GoldLabel::Incorrect));
        // Replay determinism: a second run is identical.
        let again = score_batch(&requests, &endpoint, true, &cache).unwrap();
        assert_eq!(verdicts, again);
    }

    #[test]
    fn cold_cache_offline_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::open(dir.path()).unwrap();
        let endpoint = EndpointConfig::default();
        let requests = vec![ScoreRequest { response_id: "r1".to_string(), prompt: "p".to_string() }];
        match score_batch(&requests, &endpoint, true, &cache) {
            Err(JudgeError::ColdCacheOffline { missing }) => assert_eq!(missing, 1),
            other => panic!("unexpected outcome: {other:?}"),
        }
    }

    #[test]
    fn fixture_batch_reproduces_judge_row_shape() {
        // 100 gaming verdicts with exactly one false positive plus 100 real
        // verdicts; the gaming row must read accuracy 0.99 / TNR 0.99 /
        // FPR 0.01.
        let mut gold = Vec::new();
        let mut labeled = Vec::new();
        for i in 0..100 {
            gold.push(Response {
                response_id: format!("g{i}"),
                item_id: "i1".to_string(),
                text: "mixed answer".to_string(),
                gold_label: GoldLabel::Incorrect,
                provenance: Provenance::GamingS3,
            });
            labeled.push((
                format!("g{i}"),
                if i == 0 { GoldLabel::Correct } else { GoldLabel::Incorrect },
            ));
        }
        for i in 0..100 {
            let gold_label = if i < 60 { GoldLabel::Correct } else { GoldLabel::Incorrect };
            gold.push(Response {
                response_id: format!("r{i}"),
                item_id: "i1".to_string(),
                text: "real answer".to_string(),
                gold_label,
                provenance: Provenance::Real,
            });
            labeled.push((format!("r{i}"), gold_label));
        }
        let report = crate::metrics::confusion_from_labels(&labeled, &gold).unwrap();
        let s3 = report.group("s3").unwrap();
        assert_eq!(s3.accuracy, Some(0.99));
        assert_eq!(s3.tnr, Some(0.99));
        assert_eq!(s3.fpr, Some(0.01));
    }

    #[test]
    fn rationale_tagging_matches_observed_patterns() {
        let rules = default_tag_rules();
        let verdicts = vec![
            parse_verdict("a", "SCORE: correct\nRATIONALE: matches the expected correct response", false),
            parse_verdict("b", "SCORE: incorrect\nRATIONALE: response contains minor misspellings", false),
            parse_verdict("c", "SCORE: correct\nRATIONALE:", false),
        ];
        let tags = tag_rationales(&verdicts, &rules).unwrap();
        assert!(tags["a"].contains(&RationaleTag::PatternMatch));
        assert!(tags["b"].contains(&RationaleTag::SurfacePenalty));
        assert_eq!(tags["c"], [RationaleTag::Other].into_iter().collect());
        assert!(tags.values().all(|set| !set.is_empty()));
    }

    #[test]
    fn empty_rules_rejected() {
        assert!(matches!(tag_rationales(&[], &[]), Err(JudgeError::EmptyRules)));
    }

    proptest! {
        /// Parsing is total on arbitrary input.
        #[test]
        fn parse_never_panics(raw in ".*") {
            let verdict = parse_verdict("r", &raw, false);
            prop_assert!(verdict.label == GoldLabel::Correct || verdict.label == GoldLabel::Incorrect);
        }
    }
}
