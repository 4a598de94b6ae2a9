//! `synth`: write the bundled synthetic reference corpus and its standard
//! gaming pools to disk.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use gradeshield::corpus::{save_corpus, write_responses};
use gradeshield::experiments::synth::{reference_corpus, reference_gaming, GamingRecipe, SynthConfig};

use crate::manifest::{hash_inputs, Manifest};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub items: usize,
    #[arg(long, default_value_t = 60)]
    pub responses_per_item: usize,
    /// Skip the gaming pools; write only the corpus.
    #[arg(long)]
    pub corpus_only: bool,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;

    let synth_cfg = SynthConfig {
        seed: args.seed,
        n_items: args.items,
        responses_per_item: args.responses_per_item,
    };
    let corpus = reference_corpus(&synth_cfg);
    let corpus_path = args.out.join("corpus.jsonl");
    save_corpus(&corpus, &corpus_path)?;
    let mut outputs = vec!["corpus.jsonl".to_string()];

    if !args.corpus_only {
        let recipe = GamingRecipe { seed: args.seed, ..Default::default() };
        let (gaming, warnings) = reference_gaming(&corpus, &recipe);
        for warning in &warnings {
            eprintln!("warning: {warning}");
        }
        let gaming_path = args.out.join("gaming.jsonl");
        let mut file = fs::File::create(&gaming_path)?;
        write_responses(&gaming, &mut file)?;
        outputs.push("gaming.jsonl".to_string());
        println!(
            "wrote {} items, {} real responses, {} gaming responses to {}",
            corpus.items.len(),
            corpus.responses.len(),
            gaming.len(),
            args.out.display()
        );
    } else {
        println!(
            "wrote {} items, {} real responses to {}",
            corpus.items.len(),
            corpus.responses.len(),
            args.out.display()
        );
    }

    let config = serde_json::json!({
        "synth": synth_cfg,
        "corpus_only": args.corpus_only,
    });
    Manifest::new("synth", args.seed, config, hash_inputs(&[])?, outputs).write(&args.out)?;
    Ok(())
}
