//! `report`: compare two experiment reports (before/after) and emit the
//! per-strategy FPR delta table.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use gradeshield::metrics::{compare_reports, fpr_table_csv, MetricsReport};

use crate::manifest::{hash_inputs, write_json, Manifest};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Baseline report.json (raw metrics or a protocol run containing one).
    #[arg(long)]
    pub before: PathBuf,
    /// Hardened report.json to compare against.
    #[arg(long)]
    pub after: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Accept either a bare metrics report or a protocol run wrapping one.
fn load_report(path: &Path) -> Result<MetricsReport> {
    let content = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read report {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&content)
        .with_context(|| format!("malformed JSON in {}", path.display()))?;
    let report_value = value.get("report").cloned().unwrap_or(value);
    serde_json::from_value(report_value)
        .with_context(|| format!("{} does not contain a metrics report", path.display()))
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let before = load_report(&args.before)?;
    let after = load_report(&args.after)?;
    let delta = compare_reports(&before, &after)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_json(&args.out.join("delta.json"), &delta)?;
    std::fs::write(
        args.out.join("fpr_comparison.csv"),
        fpr_table_csv(&[("before", &before), ("after", &after)]),
    )?;

    for (group, d) in &delta.groups {
        println!(
            "{group}: fpr {:?} -> {:?} (absolute {:?}, relative reduction {:?}){}",
            d.before,
            d.after,
            d.absolute.map(|v| (v * 1e4).round() / 1e4),
            d.relative_reduction.map(|v| (v * 1e4).round() / 1e4),
            if d.increased { "  [WORSE]" } else { "" },
        );
    }
    if !delta.regressions().is_empty() {
        eprintln!("warning: FPR increased for groups {:?}", delta.regressions());
    }

    let inputs = vec![args.before.clone(), args.after.clone()];
    let config = serde_json::json!({"before": args.before, "after": args.after});
    Manifest::new("report", 0, config, hash_inputs(&inputs)?, vec![
        "delta.json".to_string(),
        "fpr_comparison.csv".to_string(),
    ])
    .write(&args.out)?;
    Ok(())
}
