//! `generate`: run the gaming generators over a corpus, apply the operational
//! subsample, report leakage, and write one JSONL pool per strategy.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use gradeshield::corpus::{leak_check, load_corpus, write_responses, GoldLabel, Provenance, Response};
use gradeshield::gaming::{
    gen_s1_consecutive, gen_s1_medical, gen_s1_nonconsecutive, gen_s2_summary, gen_s3_mixed,
    subsample, GeneratorConfig, Lexicons,
};
use gradeshield::text;

use crate::config::{pick, FileConfig};
use crate::manifest::{hash_inputs, write_json, Manifest};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Corpus JSONL file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory for the strategy pools.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional TOML/JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop-word lexicon (newline-delimited; bundled list when omitted).
    #[arg(long)]
    pub stop_words: Option<PathBuf>,
    /// Medical-term lexicon (newline-delimited; bundled list when omitted).
    #[arg(long)]
    pub medical_terms: Option<PathBuf>,
    /// Per-strategy uniform subsample rate in (0, 1].
    #[arg(long)]
    pub subsample_rate: Option<f64>,
    #[arg(long)]
    pub per_item_s1a: Option<usize>,
    #[arg(long)]
    pub per_item_s1b: Option<usize>,
    #[arg(long)]
    pub per_item_s1c: Option<usize>,
    #[arg(long)]
    pub per_item_s3: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub mixed_separator: Option<String>,
    #[arg(long)]
    pub mixed_incorrect_parts: Option<usize>,
    /// Drop gaming responses whose text exactly matches a correct response
    /// (they are only reported otherwise).
    #[arg(long)]
    pub drop_leaks: bool,
    /// Externally produced summaries (JSONL {"item_id","text"}) used as the
    /// strategy-2 pool instead of the built-in extractive summarizer.
    #[arg(long)]
    pub external_summaries: Option<PathBuf>,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let file = FileConfig::load_opt(args.config.as_ref())?;
    let corpus_path = args
        .corpus
        .clone()
        .or(file.corpus.clone())
        .context("--corpus is required (flag or config file)")?;
    let out_dir = args
        .out
        .clone()
        .or(file.out.clone())
        .context("--out is required (flag or config file)")?;
    let seed = pick(args.seed, file.seed, 42);
    let rate = pick(args.subsample_rate, file.generate.subsample_rate, 0.05);

    let corpus = load_corpus(&corpus_path)?;
    let lexicons = load_lexicons(args, &file)?;
    let defaults = GeneratorConfig::default();
    let cfg = GeneratorConfig {
        seed,
        k_min: pick(args.k_min, file.generate.k_min, defaults.k_min),
        k_max: pick(args.k_max, file.generate.k_max, defaults.k_max),
        mixed_separator: pick(
            args.mixed_separator.clone(),
            file.generate.mixed_separator.clone(),
            defaults.mixed_separator.clone(),
        ),
        mixed_incorrect_parts: pick(
            args.mixed_incorrect_parts,
            file.generate.mixed_incorrect_parts,
            defaults.mixed_incorrect_parts,
        ),
        subsample_rate: rate,
        ..defaults
    };
    cfg.validate()?;

    let per_s1a = pick(args.per_item_s1a, file.generate.per_item_s1a, 100);
    let per_s1b = pick(args.per_item_s1b, file.generate.per_item_s1b, 100);
    let per_s1c = pick(args.per_item_s1c, file.generate.per_item_s1c, 60);
    let per_s3 = pick(args.per_item_s3, file.generate.per_item_s3, 60);
    let summary_counts = file.generate.summary_counts.clone().unwrap_or_else(|| vec![1, 2, 3]);

    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    let mut s3 = Vec::new();
    let mut warnings = Vec::new();
    for item in &corpus.items {
        let mut out = gen_s1_nonconsecutive(item, &cfg, &lexicons, per_s1a);
        s1.append(&mut out.responses);
        warnings.append(&mut out.warnings);
        let mut out = gen_s1_consecutive(item, &cfg, per_s1b);
        s1.append(&mut out.responses);
        warnings.append(&mut out.warnings);
        let mut out = gen_s1_medical(item, &cfg, &lexicons, per_s1c);
        s1.append(&mut out.responses);
        warnings.append(&mut out.warnings);
        if args.external_summaries.is_none() {
            for &count in &summary_counts {
                let summary_cfg = GeneratorConfig { summary_sentence_count: count, ..cfg.clone() };
                match gen_s2_summary(item, &summary_cfg, &lexicons) {
                    Ok(summary) => s2.push(summary),
                    Err(e) => warnings.push(e.to_string()),
                }
            }
        }
        let incorrect_pool: Vec<Response> = corpus
            .responses
            .iter()
            .filter(|r| {
                r.item_id == item.item_id
                    && r.provenance == Provenance::Real
                    && r.gold_label == GoldLabel::Incorrect
            })
            .cloned()
            .collect();
        let mut out = gen_s3_mixed(item, &incorrect_pool, &cfg, per_s3);
        s3.append(&mut out.responses);
        warnings.append(&mut out.warnings);
    }
    if let Some(path) = &args.external_summaries {
        let summaries = gradeshield::gaming::load_external_summaries(path)?;
        let known: std::collections::HashSet<&str> =
            corpus.items.iter().map(|i| i.item_id.as_str()).collect();
        for summary in &summaries {
            if !known.contains(summary.item_id.as_str()) {
                anyhow::bail!("external summary references unknown item {:?}", summary.item_id);
            }
        }
        s2 = gradeshield::gaming::external_summaries_to_responses(&summaries);
    }
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let raw_counts: BTreeMap<&str, usize> =
        [("s1", s1.len()), ("s2", s2.len()), ("s3", s3.len())].into();
    let mut pools: BTreeMap<&str, Vec<Response>> = BTreeMap::new();
    pools.insert("s1", subsample(&s1, rate, text::derive_seed(seed, "subsample:s1")));
    pools.insert("s2", subsample(&s2, rate, text::derive_seed(seed, "subsample:s2")));
    pools.insert("s3", subsample(&s3, rate, text::derive_seed(seed, "subsample:s3")));

    // Leakage: gaming texts that exactly match a correct real response.
    let correct: Vec<Response> = corpus
        .responses
        .iter()
        .filter(|r| r.gold_label == GoldLabel::Correct)
        .cloned()
        .collect();
    let mut leak_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut all_leaks = Vec::new();
    for (name, pool) in pools.iter_mut() {
        let leaks = leak_check(pool, &correct);
        leak_counts.insert(name, leaks.len());
        if args.drop_leaks && !leaks.is_empty() {
            let leaked: std::collections::HashSet<&str> =
                leaks.iter().map(|l| l.gaming_id.as_str()).collect();
            pool.retain(|r| !leaked.contains(r.response_id.as_str()));
        }
        all_leaks.extend(leaks);
    }

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let mut sampled_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut outputs = Vec::new();
    for (name, pool) in &pools {
        let path = out_dir.join(format!("{name}.jsonl"));
        let mut file = fs::File::create(&path)?;
        write_responses(pool, &mut file)?;
        sampled_counts.insert(name.to_string(), pool.len());
        outputs.push(format!("{name}.jsonl"));
    }
    write_json(&out_dir.join("leaks.json"), &all_leaks)?;
    outputs.push("leaks.json".to_string());

    let mut input_paths = vec![corpus_path.clone()];
    if let Some(p) = &args.stop_words {
        input_paths.push(p.clone());
    }
    if let Some(p) = &args.medical_terms {
        input_paths.push(p.clone());
    }
    if let Some(p) = &args.external_summaries {
        input_paths.push(p.clone());
    }
    let config = serde_json::json!({
        "corpus": corpus_path,
        "generator": cfg,
        "per_item": {"s1a": per_s1a, "s1b": per_s1b, "s1c": per_s1c, "s3": per_s3},
        "summary_counts": summary_counts,
        "raw_counts": raw_counts,
        "sampled_counts": sampled_counts,
        "leak_counts": leak_counts,
        "drop_leaks": args.drop_leaks,
        "warnings": warnings,
    });
    Manifest::new("generate", seed, config, hash_inputs(&input_paths)?, outputs).write(&out_dir)?;

    println!(
        "wrote strategy pools to {}: s1={} s2={} s3={} (rate {rate}), {} leaked pair(s)",
        out_dir.display(),
        sampled_counts["s1"],
        sampled_counts["s2"],
        sampled_counts["s3"],
        all_leaks.len(),
    );
    Ok(())
}

fn load_lexicons(args: &GenerateArgs, file: &FileConfig) -> Result<Lexicons> {
    let stop = args.stop_words.clone().or(file.generate.stop_words.clone());
    let medical = args.medical_terms.clone().or(file.generate.medical_terms.clone());
    let builtin = Lexicons::builtin();
    Ok(Lexicons {
        stop_words: match stop {
            Some(path) => gradeshield::gaming::load_lexicon_file(&path)?,
            None => builtin.stop_words,
        },
        medical_terms: match medical {
            Some(path) => gradeshield::gaming::load_lexicon_file(&path)?,
            None => builtin.medical_terms,
        },
    })
}
