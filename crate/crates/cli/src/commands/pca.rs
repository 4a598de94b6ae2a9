//! `pca`: per-item 2-component projections of response embeddings, written as
//! CSV plus a JSON sidecar with variance ratios and the overlap index, and a
//! small plotting script stub.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use gradeshield::corpus::{load_corpus, load_responses, Response};
use gradeshield::diagnostics::{
    overlap_index, pca_fit, projection_to_csv, PcaInput, ProjectionSidecar,
};
use gradeshield::embedding::{fit_embedder, EmbedderConfig};

use crate::manifest::{hash_inputs, write_json, Manifest};

const PLOT_STUB: &str = r#"#!/usr/bin/env python3
"""Plot the per-item PCA CSVs in this directory.

Usage: python3 plot_pca.py [item_id ...]
"""
import csv
import glob
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required: pip install matplotlib")

COLORS = {"real": "tab:blue", "s1": "tab:orange", "s2": "tab:green", "s3": "tab:red"}
MARKERS = {"correct": "o", "incorrect": "x"}

wanted = set(sys.argv[1:])
for path in sorted(glob.glob("*.csv")):
    item = path[:-4]
    if wanted and item not in wanted:
        continue
    xs, ys, cs, ms = [], [], [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
            cs.append(COLORS.get(row["provenance"], "tab:gray"))
            ms.append(MARKERS.get(row["gold_label"], "."))
    fig, ax = plt.subplots()
    for x, y, c, m in zip(xs, ys, cs, ms):
        ax.scatter(x, y, c=c, marker=m, s=14, alpha=0.7)
    ax.set_title(item)
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    fig.savefig(item + ".png", dpi=150)
    print("wrote", item + ".png")
"#;

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Gaming response pools to include (repeatable).
    #[arg(long = "gaming")]
    pub gaming: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to specific items (repeatable; all items when omitted).
    #[arg(long = "item")]
    pub items: Vec<String>,
    #[arg(long, default_value_t = 256)]
    pub dimension: usize,
    #[arg(long, default_value_t = 0x5EED_0001)]
    pub hash_seed: u64,
    /// Use precomputed embeddings from a TSV file (response_id keyed) instead
    /// of the built-in hashed TF-IDF embedder.
    #[arg(long)]
    pub external_embeddings: Option<PathBuf>,
}

pub fn run(args: &PcaArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let mut responses: Vec<Response> = corpus.responses.clone();
    for path in &args.gaming {
        responses.extend(load_responses(path, &corpus)?);
    }

    let known: Vec<&str> = corpus.items.iter().map(|i| i.item_id.as_str()).collect();
    for wanted in &args.items {
        if !known.contains(&wanted.as_str()) {
            bail!("unknown item {wanted:?}; corpus has {known:?}");
        }
    }

    let cfg = match &args.external_embeddings {
        Some(path) => EmbedderConfig {
            provider: gradeshield::embedding::ProviderKind::ExternalFile,
            dimension: args.dimension,
            hash_seed: args.hash_seed,
            file_path: Some(path.clone()),
            ..Default::default()
        },
        None => EmbedderConfig {
            dimension: args.dimension,
            hash_seed: args.hash_seed,
            ..Default::default()
        },
    };
    let texts: Vec<&str> = responses.iter().map(|r| r.text.as_str()).collect();
    let embedder = fit_embedder(&cfg, &texts)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let mut outputs = Vec::new();
    for item in &corpus.items {
        if !args.items.is_empty() && !args.items.contains(&item.item_id) {
            continue;
        }
        let inputs: Vec<PcaInput> = responses
            .iter()
            .filter(|r| r.item_id == item.item_id)
            .map(|r| {
                Ok(PcaInput {
                    response_id: r.response_id.clone(),
                    vector: embedder.embed_response(r)?,
                    gold_label: r.gold_label,
                    provenance: r.provenance,
                })
            })
            .collect::<Result<_>>()?;
        let projection = pca_fit(&inputs)
            .with_context(|| format!("pca failed for item {}", item.item_id))?;
        let overlap = overlap_index(&projection).ok();

        let csv_rel = format!("{}.csv", item.item_id);
        fs::write(args.out.join(&csv_rel), projection_to_csv(&projection))?;
        outputs.push(csv_rel);

        let mut point_counts = std::collections::BTreeMap::new();
        for point in &projection.projected {
            *point_counts.entry(point.provenance.strategy_key().to_string()).or_insert(0usize) += 1;
        }
        let sidecar = ProjectionSidecar {
            item_id: item.item_id.clone(),
            explained_variance_ratio: projection.explained_variance_ratio,
            overlap_index: overlap,
            point_counts,
        };
        let sidecar_rel = format!("{}.json", item.item_id);
        write_json(&args.out.join(&sidecar_rel), &sidecar)?;
        outputs.push(sidecar_rel);
        println!(
            "item {}: {} points, variance ratios [{:.4}, {:.4}], overlap {:?}",
            item.item_id,
            projection.projected.len(),
            projection.explained_variance_ratio[0],
            projection.explained_variance_ratio[1],
            overlap,
        );
    }

    fs::write(args.out.join("plot_pca.py"), PLOT_STUB)?;
    outputs.push("plot_pca.py".to_string());

    let mut inputs = vec![args.corpus.clone()];
    inputs.extend(args.gaming.iter().cloned());
    if let Some(p) = &args.external_embeddings {
        inputs.push(p.clone());
    }
    let config = serde_json::json!({
        "corpus": args.corpus,
        "gaming": args.gaming,
        "items": args.items,
        "embedder": cfg,
    });
    Manifest::new("pca", args.hash_seed, config, hash_inputs(&inputs)?, outputs).write(&args.out)?;
    Ok(())
}
