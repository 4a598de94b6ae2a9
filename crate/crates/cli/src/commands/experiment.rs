//! `experiment`: run one evaluation protocol and write report.json plus CSV
//! tables into a run directory. `--from-manifest` reruns a recorded
//! configuration and reproduces its outputs byte-for-byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use gradeshield::corpus::{load_corpus, load_responses, Response};
use gradeshield::experiments::{
    run_advt1, run_advt2, run_baseline, run_ensemble, Condition, ExperimentSpec,
};
use gradeshield::metrics::{fpr_table_csv, report_to_csv, MetricsReport};
use serde::{Deserialize, Serialize};

use crate::config::{pick, FileConfig};
use crate::manifest::{hash_inputs, write_json, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Baseline,
    Advt1,
    Advt2,
    Ensemble,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Which protocol to run.
    #[arg(long, value_enum)]
    pub which: Option<Which>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Gaming response pools (repeatable).
    #[arg(long = "gaming")]
    pub gaming: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional TOML/JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub real_train_fraction: Option<f64>,
    #[arg(long)]
    pub gaming_train_fraction: Option<f64>,
    /// Training condition for the ensemble protocol.
    #[arg(long, value_enum)]
    pub condition: Option<EnsembleCondition>,
    /// Rerun a recorded manifest instead of resolving flags.
    #[arg(long, conflicts_with_all = ["which", "corpus", "config", "seed"])]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleCondition {
    Baseline,
    Advt1,
    Advt2,
}

impl From<EnsembleCondition> for Condition {
    fn from(value: EnsembleCondition) -> Self {
        match value {
            EnsembleCondition::Baseline => Condition::Baseline,
            EnsembleCondition::Advt1 => Condition::Advt1,
            EnsembleCondition::Advt2 => Condition::Advt2,
        }
    }
}

/// The resolved, rerunnable configuration stored in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedExperiment {
    pub which: Which,
    pub condition: EnsembleCondition,
    pub corpus: PathBuf,
    pub gaming: Vec<PathBuf>,
    pub spec: ExperimentSpec,
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    if let Some(manifest_path) = &args.from_manifest {
        let manifest = Manifest::load(manifest_path)?;
        if manifest.command != "experiment" {
            bail!("manifest {} records a {:?} run, not an experiment", manifest_path.display(), manifest.command);
        }
        manifest.verify_inputs()?;
        let resolved: ResolvedExperiment = serde_json::from_value(manifest.config.clone())
            .context("manifest config does not describe an experiment run")?;
        let out = args
            .out
            .clone()
            .or_else(|| manifest_path.parent().map(Path::to_path_buf))
            .context("--out required when the manifest path has no parent directory")?;
        return execute(&resolved, &out);
    }

    let file = FileConfig::load_opt(args.config.as_ref())?;
    let which = args.which.context("--which is required (baseline|advt1|advt2|ensemble)")?;
    let corpus = args
        .corpus
        .clone()
        .or(file.corpus.clone())
        .context("--corpus is required (flag or config file)")?;
    let mut gaming = args.gaming.clone();
    if gaming.is_empty() {
        gaming = file.gaming.clone().unwrap_or_default();
    }
    if gaming.is_empty() && which != Which::Baseline {
        bail!("--gaming pools are required for {which:?}");
    }
    let out = args
        .out
        .clone()
        .or(file.out.clone())
        .context("--out is required (flag or config file)")?;

    let defaults = ExperimentSpec::default();
    let spec = ExperimentSpec {
        name: format!("{which:?}").to_lowercase(),
        seed: pick(args.seed, file.seed, defaults.seed),
        real_train_fraction: pick(
            args.real_train_fraction,
            file.experiment.real_train_fraction,
            defaults.real_train_fraction,
        ),
        gaming_train_fraction: pick(
            args.gaming_train_fraction,
            file.experiment.gaming_train_fraction,
            defaults.gaming_train_fraction,
        ),
        validation_fraction: pick(None, file.experiment.validation_fraction, defaults.validation_fraction),
        tau_default: pick(None, file.experiment.tau_default, defaults.tau_default),
        lambda_grid: file.experiment.lambda_grid.clone().unwrap_or(defaults.lambda_grid),
        ..defaults
    };
    let resolved = ResolvedExperiment {
        which,
        condition: args.condition.unwrap_or(EnsembleCondition::Advt1),
        corpus,
        gaming,
        spec,
    };
    execute(&resolved, &out)
}

fn execute(resolved: &ResolvedExperiment, out: &Path) -> Result<()> {
    let corpus = load_corpus(&resolved.corpus)?;
    let mut gaming: Vec<Response> = Vec::new();
    for path in &resolved.gaming {
        gaming.extend(load_responses(path, &corpus)?);
    }

    fs::create_dir_all(out.join("tables"))
        .with_context(|| format!("cannot create run directory {}", out.display()))?;

    let mut outputs = vec!["report.json".to_string()];
    match resolved.which {
        Which::Baseline => {
            let run = run_baseline(&resolved.spec, &corpus, &gaming)?;
            write_json(&out.join("report.json"), &run)?;
            outputs.extend(write_tables(out, &[("baseline", &run.report)])?);
            println!("baseline: tau {:.3}, real F1 {:?}", run.tau, run.report.f1("real"));
            print_fprs(&run.report);
        }
        Which::Advt1 => {
            let run = run_advt1(&resolved.spec, &corpus, &gaming)?;
            write_json(&out.join("report.json"), &run)?;
            outputs.extend(write_tables(out, &[("advt1", &run.report)])?);
            println!("advt1: tau {:.3}, real F1 {:?}", run.tau, run.report.f1("real"));
            print_fprs(&run.report);
        }
        Which::Advt2 => {
            let run = run_advt2(&resolved.spec, &corpus, &gaming)?;
            write_json(&out.join("report.json"), &run)?;
            let named: Vec<(String, &MetricsReport)> = run
                .folds
                .iter()
                .map(|f| (format!("advt2_holdout_{}", f.held_out.key()), &f.report))
                .collect();
            let borrowed: Vec<(&str, &MetricsReport)> =
                named.iter().map(|(n, r)| (n.as_str(), *r)).collect();
            outputs.extend(write_tables(out, &borrowed)?);
            for fold in &run.folds {
                println!(
                    "advt2 fold held-out {}: tau {:.3}, held-out FPR {:?}, real F1 {:?}",
                    fold.held_out.key(),
                    fold.tau,
                    fold.report.fpr(fold.held_out.key()),
                    fold.report.f1("real"),
                );
            }
        }
        Which::Ensemble => {
            let run = run_ensemble(&resolved.spec, &corpus, &gaming, resolved.condition.into())?;
            write_json(&out.join("report.json"), &run)?;
            let mut named: Vec<(String, &MetricsReport)> = Vec::new();
            for fold in &run.folds {
                let suffix = fold
                    .held_out
                    .map(|s| format!("_holdout_{}", s.key()))
                    .unwrap_or_default();
                named.push((format!("vote{suffix}"), &fold.vote));
                named.push((format!("ridge{suffix}"), &fold.ridge));
            }
            let borrowed: Vec<(&str, &MetricsReport)> =
                named.iter().map(|(n, r)| (n.as_str(), *r)).collect();
            outputs.extend(write_tables(out, &borrowed)?);
            for fold in &run.folds {
                println!(
                    "ensemble {:?}{}: vote real F1 {:?}, ridge real F1 {:?}, lambda {}",
                    run.condition,
                    fold.held_out.map(|s| format!(" (held-out {})", s.key())).unwrap_or_default(),
                    fold.vote.f1("real"),
                    fold.ridge.f1("real"),
                    fold.lambda,
                );
                println!("  vote:");
                print_fprs(&fold.vote);
                println!("  ridge:");
                print_fprs(&fold.ridge);
            }
        }
    }

    let mut inputs = vec![resolved.corpus.clone()];
    inputs.extend(resolved.gaming.iter().cloned());
    Manifest::new(
        "experiment",
        resolved.spec.seed,
        serde_json::to_value(resolved)?,
        hash_inputs(&inputs)?,
        outputs,
    )
    .write(out)?;
    println!("run directory: {}", out.display());
    Ok(())
}

fn write_tables(out: &Path, reports: &[(&str, &MetricsReport)]) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for (name, report) in reports {
        let rel = format!("tables/metrics_{name}.csv");
        fs::write(out.join(&rel), report_to_csv(report))?;
        written.push(rel);
    }
    let rel = "tables/fpr_by_strategy.csv".to_string();
    fs::write(out.join(&rel), fpr_table_csv(reports))?;
    written.push(rel);
    Ok(written)
}

fn print_fprs(report: &MetricsReport) {
    for strategy in ["s1", "s2", "s3"] {
        if let Some(fpr) = report.fpr(strategy) {
            println!("    {strategy} FPR {fpr:.4}");
        }
    }
}
