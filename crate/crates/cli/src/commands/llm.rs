//! `llm`: score responses with an external LLM judge through the replay
//! cache, then compute the usual metrics and rationale tags.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use gradeshield::corpus::{load_corpus, load_responses, Response};
use gradeshield::llmjudge::{
    default_tag_rules, render_prompt, score_batch, tag_histogram, tag_rationales, EndpointConfig,
    PromptStrategy, PromptTemplate, ReplayCache, ScoreRequest,
};
use gradeshield::metrics::confusion_from_labels;

use crate::config::{pick, FileConfig};
use crate::manifest::{hash_inputs, write_json, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    P1,
    P2,
    P3,
}

impl From<StrategyArg> for PromptStrategy {
    fn from(value: StrategyArg) -> Self {
        match value {
            StrategyArg::P1 => PromptStrategy::P1QuestionResponse,
            StrategyArg::P2 => PromptStrategy::P2QuestionExamplesResponse,
            StrategyArg::P3 => PromptStrategy::P3ExamplesOnlyResponse,
        }
    }
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Responses to score (JSONL response records).
    #[arg(long)]
    pub responses: PathBuf,
    /// Replay cache directory (one JSON file per request key).
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional TOML/JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prompting strategy (question+response performs best overall).
    #[arg(long, value_enum, default_value_t = StrategyArg::P1)]
    pub strategy: StrategyArg,
    /// Never touch the network; every prompt must be cached.
    #[arg(long)]
    pub offline: bool,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Score only the first N responses.
    #[arg(long)]
    pub limit: Option<usize>,
}

pub fn run(args: &LlmArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_ref())?;
    let defaults = EndpointConfig::default();
    let endpoint = EndpointConfig {
        base_url: pick(args.endpoint.clone(), file.llm.endpoint.clone(), defaults.base_url),
        model: pick(args.model.clone(), file.llm.model.clone(), defaults.model),
        temperature: pick(args.temperature, file.llm.temperature, defaults.temperature),
        max_retries: pick(None, file.llm.max_retries, defaults.max_retries),
        timeout_secs: pick(None, file.llm.timeout_secs, defaults.timeout_secs),
        api_key_env: pick(None, file.llm.api_key_env.clone(), defaults.api_key_env),
        max_in_flight: pick(None, file.llm.max_in_flight, defaults.max_in_flight),
    };

    let corpus = load_corpus(&args.corpus)?;
    let item_map = corpus.item_map();
    let mut responses: Vec<Response> = load_responses(&args.responses, &corpus)?;
    if let Some(limit) = args.limit {
        responses.truncate(limit);
    }
    if responses.is_empty() {
        bail!("no responses to score in {}", args.responses.display());
    }

    let template = PromptTemplate::builtin(args.strategy.into());
    let mut requests = Vec::with_capacity(responses.len());
    for response in &responses {
        let item = item_map
            .get(response.item_id.as_str())
            .context("response references an item missing from the corpus")?;
        requests.push(ScoreRequest {
            response_id: response.response_id.clone(),
            prompt: render_prompt(&template, item, response)?,
        });
    }

    let cache = ReplayCache::open(&args.cache)?;
    let verdicts = score_batch(&requests, &endpoint, args.offline, &cache)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let mut verdict_lines = String::new();
    for verdict in &verdicts {
        verdict_lines.push_str(&serde_json::to_string(verdict)?);
        verdict_lines.push('\n');
    }
    std::fs::write(args.out.join("verdicts.jsonl"), verdict_lines)?;

    let labeled: Vec<(String, gradeshield::GoldLabel)> =
        verdicts.iter().map(|v| (v.response_id.clone(), v.label)).collect();
    let report = confusion_from_labels(&labeled, &responses)?;
    write_json(&args.out.join("metrics.json"), &report)?;

    let tags = tag_rationales(&verdicts, &default_tag_rules())?;
    let histogram = tag_histogram(&tags);
    write_json(
        &args.out.join("tags.json"),
        &serde_json::json!({"histogram": histogram, "by_response": tags}),
    )?;

    let cached = verdicts.iter().filter(|v| v.cached).count();
    let failed = verdicts.iter().filter(|v| v.parse_failed).count();
    println!(
        "scored {} responses ({} cached, {} parse failures) with model {:?}",
        verdicts.len(),
        cached,
        failed,
        endpoint.model,
    );
    for (group, metrics) in &report.groups {
        println!(
            "  {group}: accuracy {:?} fpr {:?} tnr {:?}",
            metrics.accuracy.map(|v| (v * 1e4).round() / 1e4),
            metrics.fpr.map(|v| (v * 1e4).round() / 1e4),
            metrics.tnr.map(|v| (v * 1e4).round() / 1e4),
        );
    }

    let config = serde_json::json!({
        "corpus": args.corpus,
        "responses": args.responses,
        "cache": args.cache,
        "strategy": format!("{:?}", args.strategy),
        "offline": args.offline,
        "endpoint": endpoint,
        "limit": args.limit,
    });
    let inputs = vec![args.corpus.clone(), args.responses.clone()];
    Manifest::new("llm", 0, config, hash_inputs(&inputs)?, vec![
        "verdicts.jsonl".to_string(),
        "metrics.json".to_string(),
        "tags.json".to_string(),
    ])
    .write(&args.out)?;
    Ok(())
}
