//! Confusion-matrix accounting split by provenance group, and
//! before/after comparison of false positive rates.
//!
//! `Correct` is the positive class everywhere: a "false positive" is a
//! gold-incorrect response the grader scored correct. Rates with a zero
//! denominator are reported as absent, never as zero.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{GoldLabel, Response};
use crate::grader::Prediction;

/// Raw confusion counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn add(&mut self, predicted: GoldLabel, gold: GoldLabel) {
        match (predicted, gold) {
            (GoldLabel::Correct, GoldLabel::Correct) => self.tp += 1,
            (GoldLabel::Correct, GoldLabel::Incorrect) => self.fp += 1,
            (GoldLabel::Incorrect, GoldLabel::Correct) => self.fn_ += 1,
            (GoldLabel::Incorrect, GoldLabel::Incorrect) => self.tn += 1,
        }
    }

    fn merge(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Counts plus the derived measures. Absent (`None`) means the denominator
/// was zero; in a group with no actual positives, precision/recall/F1 are all
/// absent while FPR/TNR stay well-defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub counts: Counts,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
}

impl GroupMetrics {
    pub fn from_counts(counts: Counts) -> Self {
        let total = counts.total();
        let actual_positives = counts.tp + counts.fn_;
        let actual_negatives = counts.fp + counts.tn;
        let accuracy =
            (total > 0).then(|| (counts.tp + counts.tn) as f64 / total as f64);
        let (precision, recall, f1) = if actual_positives == 0 {
            (None, None, None)
        } else {
            let precision = (counts.tp + counts.fp > 0)
                .then(|| counts.tp as f64 / (counts.tp + counts.fp) as f64);
            let recall = Some(counts.tp as f64 / actual_positives as f64);
            // 2TP / (2TP + FP + FN); denominator > 0 because tp + fn > 0.
            let f1 = Some(2.0 * counts.tp as f64 / (2 * counts.tp + counts.fp + counts.fn_) as f64);
            (precision, recall, f1)
        };
        let fpr = (actual_negatives > 0).then(|| counts.fp as f64 / actual_negatives as f64);
        let tnr = (actual_negatives > 0).then(|| counts.tn as f64 / actual_negatives as f64);
        Self { counts, accuracy, precision, recall, f1, fpr, tnr }
    }
}

/// Per-provenance-group measures plus the overall tallies. Group keys are
/// "real", "s1", "s2", "s3" (the three stem variants pool into s1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub groups: BTreeMap<String, GroupMetrics>,
    pub overall: GroupMetrics,
}

impl MetricsReport {
    pub fn group(&self, key: &str) -> Option<&GroupMetrics> {
        self.groups.get(key)
    }

    pub fn fpr(&self, key: &str) -> Option<f64> {
        self.groups.get(key).and_then(|g| g.fpr)
    }

    pub fn f1(&self, key: &str) -> Option<f64> {
        self.groups.get(key).and_then(|g| g.f1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction {0:?} has no matching gold response")]
    MissingGold(String),
    #[error("gold response {0:?} has no prediction")]
    MissingPrediction(String),
    #[error("duplicate prediction for response {0:?}")]
    DuplicatePrediction(String),
    #[error("duplicate gold response {0:?}")]
    DuplicateGold(String),
    #[error("reports have different group keys: {left:?} vs {right:?}")]
    GroupKeyMismatch { left: Vec<String>, right: Vec<String> },
}

/// Tally predictions against gold responses, one-to-one by response id.
pub fn confusion(preds: &[Prediction], gold: &[Response]) -> Result<MetricsReport, MetricsError> {
    let labeled: Vec<(String, GoldLabel)> =
        preds.iter().map(|p| (p.response_id.clone(), p.predicted_label)).collect();
    confusion_from_labels(&labeled, gold)
}

/// Same as [`confusion`] but over bare (response_id, predicted_label) pairs,
/// so verdicts from non-similarity scorers can share the report schema.
pub fn confusion_from_labels(
    labeled: &[(String, GoldLabel)],
    gold: &[Response],
) -> Result<MetricsReport, MetricsError> {
    let mut gold_by_id: HashMap<&str, &Response> = HashMap::with_capacity(gold.len());
    for response in gold {
        if gold_by_id.insert(response.response_id.as_str(), response).is_some() {
            return Err(MetricsError::DuplicateGold(response.response_id.clone()));
        }
    }

    let mut seen: std::collections::HashSet<&str> =
        std::collections::HashSet::with_capacity(labeled.len());
    let mut groups: BTreeMap<String, Counts> = BTreeMap::new();
    let mut overall = Counts::default();
    for (response_id, predicted) in labeled {
        if !seen.insert(response_id.as_str()) {
            return Err(MetricsError::DuplicatePrediction(response_id.clone()));
        }
        let response = gold_by_id
            .get(response_id.as_str())
            .ok_or_else(|| MetricsError::MissingGold(response_id.clone()))?;
        let key = response.provenance.strategy_key().to_string();
        groups.entry(key).or_default().add(*predicted, response.gold_label);
        overall.add(*predicted, response.gold_label);
    }
    if labeled.len() != gold.len() {
        let unpredicted = gold
            .iter()
            .find(|r| !seen.contains(r.response_id.as_str()))
            .map(|r| r.response_id.clone())
            .unwrap_or_default();
        return Err(MetricsError::MissingPrediction(unpredicted));
    }

    Ok(MetricsReport {
        groups: groups.into_iter().map(|(k, c)| (k, GroupMetrics::from_counts(c))).collect(),
        overall: GroupMetrics::from_counts(overall),
    })
}

/// Merge partial reports (counts are commutative, so fold order is free).
pub fn merge_reports(parts: &[MetricsReport]) -> MetricsReport {
    let mut groups: BTreeMap<String, Counts> = BTreeMap::new();
    let mut overall = Counts::default();
    for part in parts {
        for (key, metrics) in &part.groups {
            groups.entry(key.clone()).or_default().merge(&metrics.counts);
        }
        overall.merge(&part.overall.counts);
    }
    MetricsReport {
        groups: groups.into_iter().map(|(k, c)| (k, GroupMetrics::from_counts(c))).collect(),
        overall: GroupMetrics::from_counts(overall),
    }
}

/// FPR movement for one group between two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprDelta {
    pub before: Option<f64>,
    pub after: Option<f64>,
    /// after - before.
    pub absolute: Option<f64>,
    /// (before - after) / before, the relative reduction.
    pub relative_reduction: Option<f64>,
    pub increased: bool,
}

/// Per-group FPR deltas between two comparable reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub groups: BTreeMap<String, FprDelta>,
}

impl DeltaReport {
    /// Groups whose FPR went up.
    pub fn regressions(&self) -> Vec<&str> {
        self.groups.iter().filter(|(_, d)| d.increased).map(|(k, _)| k.as_str()).collect()
    }
}

/// Compare FPR per group between a before and an after report. The reports
/// must cover the same groups.
pub fn compare_reports(before: &MetricsReport, after: &MetricsReport) -> Result<DeltaReport, MetricsError> {
    let left: Vec<String> = before.groups.keys().cloned().collect();
    let right: Vec<String> = after.groups.keys().cloned().collect();
    if left != right {
        return Err(MetricsError::GroupKeyMismatch { left, right });
    }
    let mut groups = BTreeMap::new();
    for (key, b) in &before.groups {
        let a = &after.groups[key];
        let (absolute, relative_reduction, increased) = match (b.fpr, a.fpr) {
            (Some(bf), Some(af)) => (
                Some(af - bf),
                (bf > 0.0).then(|| (bf - af) / bf),
                af > bf,
            ),
            _ => (None, None, false),
        };
        groups.insert(
            key.clone(),
            FprDelta { before: b.fpr, after: a.fpr, absolute, relative_reduction, increased },
        );
    }
    Ok(DeltaReport { groups })
}

/// Render a report as CSV: one row per group plus the overall row.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from("group,tp,fp,tn,fn,accuracy,precision,recall,f1,fpr,tnr\n");
    let mut push_row = |name: &str, m: &GroupMetrics| {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            m.counts.tp,
            m.counts.fp,
            m.counts.tn,
            m.counts.fn_,
            fmt_opt(m.accuracy),
            fmt_opt(m.precision),
            fmt_opt(m.recall),
            fmt_opt(m.f1),
            fmt_opt(m.fpr),
            fmt_opt(m.tnr),
        ));
    };
    for (name, metrics) in &report.groups {
        push_row(name, metrics);
    }
    push_row("overall", &report.overall);
    out
}

/// FPR-by-strategy table: rows are gaming strategies, one column per named
/// condition.
pub fn fpr_table_csv(conditions: &[(&str, &MetricsReport)]) -> String {
    let mut out = String::from("strategy");
    for (name, _) in conditions {
        out.push_str(&format!(",fpr_{name}"));
    }
    out.push('\n');
    for strategy in ["s1", "s2", "s3"] {
        if !conditions.iter().any(|(_, r)| r.groups.contains_key(strategy)) {
            continue;
        }
        out.push_str(strategy);
        for (_, report) in conditions {
            out.push(',');
            out.push_str(&fmt_opt(report.fpr(strategy)));
        }
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}
