//! Combines base graders by majority vote and by a ridge-regression stacker
//! over per-grader (label, max-similarity) features.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::GoldLabel;
use crate::grader::Prediction;

/// An ordered panel of base classifiers and a tie rule for even splits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VotePanel {
    pub classifier_ids: Vec<String>,
    /// Applied only on exact ties; defaults to the conservative choice.
    pub tie_break: GoldLabel,
}

impl VotePanel {
    pub fn new(classifier_ids: Vec<String>) -> Result<Self, EnsembleError> {
        Self::with_tie_break(classifier_ids, GoldLabel::Incorrect)
    }

    pub fn with_tie_break(classifier_ids: Vec<String>, tie_break: GoldLabel) -> Result<Self, EnsembleError> {
        if classifier_ids.is_empty() {
            return Err(EnsembleError::EmptyPanel);
        }
        let mut seen = std::collections::HashSet::new();
        for id in &classifier_ids {
            if !seen.insert(id.as_str()) {
                return Err(EnsembleError::DuplicateClassifier(id.clone()));
            }
        }
        Ok(Self { classifier_ids, tie_break })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("vote panel has no classifiers")]
    EmptyPanel,
    #[error("duplicate classifier id {0:?} in panel")]
    DuplicateClassifier(String),
    #[error("missing prediction from classifier {0:?}")]
    MissingPrediction(String),
    #[error("multiple predictions from classifier {0:?}")]
    DuplicatePrediction(String),
    #[error("ridge: {0}")]
    InvalidRidgeInput(String),
    #[error("ridge system is singular (lambda = 0 on rank-deficient features)")]
    SingularSystem,
    #[error("feature row has {actual} values, model expects {expected}")]
    FeatureLengthMismatch { expected: usize, actual: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    MalformedModel(String),
}

/// Majority vote over one response's predictions: the label with strictly
/// more votes wins, exact ties resolve to the panel's tie rule.
pub fn majority_vote(panel: &VotePanel, preds: &[Prediction]) -> Result<GoldLabel, EnsembleError> {
    let mut by_classifier: HashMap<&str, &Prediction> = HashMap::new();
    for pred in preds {
        if by_classifier.insert(pred.classifier_id.as_str(), pred).is_some() {
            return Err(EnsembleError::DuplicatePrediction(pred.classifier_id.clone()));
        }
    }
    let mut correct = 0usize;
    let mut incorrect = 0usize;
    for id in &panel.classifier_ids {
        let pred = by_classifier
            .get(id.as_str())
            .ok_or_else(|| EnsembleError::MissingPrediction(id.clone()))?;
        match pred.predicted_label {
            GoldLabel::Correct => correct += 1,
            GoldLabel::Incorrect => incorrect += 1,
        }
    }
    Ok(match correct.cmp(&incorrect) {
        std::cmp::Ordering::Greater => GoldLabel::Correct,
        std::cmp::Ordering::Less => GoldLabel::Incorrect,
        std::cmp::Ordering::Equal => panel.tie_break,
    })
}

/// Feature layout: per base classifier, a 0/1 label and the max similarity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub classifier_ids: Vec<String>,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        2 * self.classifier_ids.len()
    }

    /// Build a feature row from one response's predictions, ordered by the
    /// layout's classifier list.
    pub fn feature_row(&self, preds: &[Prediction]) -> Result<Vec<f64>, EnsembleError> {
        let mut by_classifier: HashMap<&str, &Prediction> = HashMap::new();
        for pred in preds {
            if by_classifier.insert(pred.classifier_id.as_str(), pred).is_some() {
                return Err(EnsembleError::DuplicatePrediction(pred.classifier_id.clone()));
            }
        }
        let mut row = Vec::with_capacity(self.width());
        for id in &self.classifier_ids {
            let pred = by_classifier
                .get(id.as_str())
                .ok_or_else(|| EnsembleError::MissingPrediction(id.clone()))?;
            row.push(match pred.predicted_label {
                GoldLabel::Correct => 1.0,
                GoldLabel::Incorrect => 0.0,
            });
            row.push(pred.max_similarity);
        }
        Ok(row)
    }
}

/// How the design matrix is conditioned before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScaling {
    /// Columns standardized to zero mean / unit variance (constant columns
    /// become all-zero); intercept fit unpenalized as mean(y).
    Standardized,
    /// Features used as-is, no intercept. For hand-checkable algebra.
    Raw,
}

#[derive(Debug, Clone)]
pub struct RidgeOptions {
    pub lambda: f64,
    pub scaling: FeatureScaling,
    pub decision_threshold: f64,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self { lambda: 1.0, scaling: FeatureScaling::Standardized, decision_threshold: 0.5 }
    }
}

/// A fitted ridge stacker. Immutable; predictions may run concurrently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub decision_threshold: f64,
    pub scaling: FeatureScaling,
    /// Per-column means/stds captured at fit time (empty in raw mode).
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub feature_layout: Option<FeatureLayout>,
}

impl RidgeModel {
    fn transform(&self, row: &[f64]) -> Vec<f64> {
        match self.scaling {
            FeatureScaling::Raw => row.to_vec(),
            FeatureScaling::Standardized => row
                .iter()
                .zip(self.feature_means.iter().zip(&self.feature_stds))
                .map(|(x, (mean, std))| if *std > 0.0 { (x - mean) / std } else { 0.0 })
                .collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EnsembleError> {
        let mut file = File::create(path.as_ref())?;
        let json = serde_json::to_string_pretty(self).expect("serializable model");
        file.write_all(json.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnsembleError> {
        let file = File::open(path.as_ref())?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| EnsembleError::MalformedModel(e.to_string()))
    }
}

/// Closed-form ridge fit: solves (X̂ᵀX̂ + λI)w = X̂ᵀŷ on the conditioned
/// design matrix via Cholesky. Deterministic.
#[allow(clippy::needless_range_loop)]
pub fn fit_ridge(features: &[Vec<f64>], labels: &[f64], opts: &RidgeOptions) -> Result<RidgeModel, EnsembleError> {
    let n = features.len();
    if n == 0 {
        return Err(EnsembleError::InvalidRidgeInput("no training rows".to_string()));
    }
    if labels.len() != n {
        return Err(EnsembleError::InvalidRidgeInput(format!(
            "{n} feature rows but {} labels",
            labels.len()
        )));
    }
    let p = features[0].len();
    if p == 0 {
        return Err(EnsembleError::InvalidRidgeInput("feature rows are empty".to_string()));
    }
    for row in features {
        if row.len() != p {
            return Err(EnsembleError::InvalidRidgeInput("ragged feature rows".to_string()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(EnsembleError::InvalidRidgeInput("non-finite feature value".to_string()));
        }
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(EnsembleError::InvalidRidgeInput("non-finite label".to_string()));
    }
    if !(opts.lambda.is_finite() && opts.lambda >= 0.0) {
        return Err(EnsembleError::InvalidRidgeInput(format!("lambda must be >= 0, got {}", opts.lambda)));
    }

    let (design, means, stds, bias, targets) = match opts.scaling {
        FeatureScaling::Raw => (features.to_vec(), Vec::new(), Vec::new(), 0.0, labels.to_vec()),
        FeatureScaling::Standardized => {
            let mut means = vec![0.0; p];
            for row in features {
                for (m, v) in means.iter_mut().zip(row) {
                    *m += v;
                }
            }
            for m in &mut means {
                *m /= n as f64;
            }
            let mut vars = vec![0.0; p];
            for row in features {
                for ((var, mean), v) in vars.iter_mut().zip(&means).zip(row) {
                    *var += (v - mean) * (v - mean);
                }
            }
            let stds: Vec<f64> = vars.iter().map(|v| (v / n as f64).sqrt()).collect();
            let design: Vec<Vec<f64>> = features
                .iter()
                .map(|row| {
                    row.iter()
                        .zip(means.iter().zip(&stds))
                        .map(|(x, (mean, std))| if *std > 0.0 { (x - mean) / std } else { 0.0 })
                        .collect()
                })
                .collect();
            let y_mean = labels.iter().sum::<f64>() / n as f64;
            let targets: Vec<f64> = labels.iter().map(|y| y - y_mean).collect();
            (design, means, stds, y_mean, targets)
        }
    };

    // Normal equations: A = XᵀX + λI, b = Xᵀy.
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (row, &t) in design.iter().zip(&targets) {
        for i in 0..p {
            b[i] += row[i] * t;
            for j in i..p {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
        a[i][i] += opts.lambda;
    }

    let weights = cholesky_solve(&a, &b).ok_or(EnsembleError::SingularSystem)?;
    Ok(RidgeModel {
        weights,
        bias,
        lambda: opts.lambda,
        decision_threshold: opts.decision_threshold,
        scaling: opts.scaling,
        feature_means: means,
        feature_stds: stds,
        feature_layout: None,
    })
}

/// Score one feature row: w·x̂ + bias, labeled correct iff the score reaches
/// the decision threshold.
pub fn predict_ridge(model: &RidgeModel, row: &[f64]) -> Result<(f64, GoldLabel), EnsembleError> {
    if row.len() != model.weights.len() {
        return Err(EnsembleError::FeatureLengthMismatch {
            expected: model.weights.len(),
            actual: row.len(),
        });
    }
    let transformed = model.transform(row);
    let score: f64 = model.weights.iter().zip(&transformed).map(|(w, x)| w * x).sum::<f64>() + model.bias;
    let label = if score >= model.decision_threshold { GoldLabel::Correct } else { GoldLabel::Incorrect };
    Ok((score, label))
}

/// Solve A x = b for symmetric positive-definite A via Cholesky.
#[allow(clippy::needless_range_loop)]
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 1e-12 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // forward substitution L z = b
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * z[k];
        }
        z[i] = sum / l[i][i];
    }
    // back substitution Lᵀ x = z
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

/// Fit one model per lambda on the training rows and keep the one with the
/// best validation F1 at the decision threshold; ties prefer the larger
/// (more regularized) lambda.
pub fn select_lambda(
    train_features: &[Vec<f64>],
    train_labels: &[f64],
    val_features: &[Vec<f64>],
    val_labels: &[f64],
    lambda_grid: &[f64],
    base: &RidgeOptions,
) -> Result<RidgeModel, EnsembleError> {
    if lambda_grid.is_empty() {
        return Err(EnsembleError::InvalidRidgeInput("empty lambda grid".to_string()));
    }
    let mut best: Option<(f64, f64, RidgeModel)> = None; // (f1, lambda, model)
    for &lambda in lambda_grid {
        let opts = RidgeOptions { lambda, ..base.clone() };
        let model = fit_ridge(train_features, train_labels, &opts)?;
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (row, &gold) in val_features.iter().zip(val_labels) {
            let (_, label) = predict_ridge(&model, row)?;
            let predicted_positive = label == GoldLabel::Correct;
            let actual_positive = gold >= 0.5;
            match (predicted_positive, actual_positive) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
        best = match best {
            None => Some((f1, lambda, model)),
            Some((best_f1, best_lambda, best_model)) => {
                if f1 > best_f1 || (f1 == best_f1 && lambda > best_lambda) {
                    Some((f1, lambda, model))
                } else {
                    Some((best_f1, best_lambda, best_model))
                }
            }
        };
    }
    Ok(best.expect("grid checked non-empty").2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(classifier: &str, label: GoldLabel, sim: f64) -> Prediction {
        Prediction {
            response_id: "r".to_string(),
            predicted_label: label,
            max_similarity: sim,
            matched_reference_id: None,
            classifier_id: classifier.to_string(),
            no_references: false,
        }
    }

    fn panel(k: usize) -> VotePanel {
        VotePanel::new((0..k).map(|i| format!("g{i}")).collect()).unwrap()
    }

    /// Independent truth-table oracle for majority voting.
    fn vote_oracle(labels: &[GoldLabel], tie_break: GoldLabel) -> GoldLabel {
        let correct = labels.iter().filter(|l| **l == GoldLabel::Correct).count();
        let incorrect = labels.len() - correct;
        if correct > incorrect {
            GoldLabel::Correct
        } else if incorrect > correct {
            GoldLabel::Incorrect
        } else {
            tie_break
        }
    }

    #[test]
    fn strict_majority_wins() {
        let p = panel(5);
        let preds: Vec<Prediction> = [
            GoldLabel::Correct,
            GoldLabel::Correct,
            GoldLabel::Correct,
            GoldLabel::Incorrect,
            GoldLabel::Incorrect,
        ]
        .iter()
        .enumerate()
        .map(|(i, l)| pred(&format!("g{i}"), *l, 0.5))
        .collect();
        assert_eq!(majority_vote(&p, &preds).unwrap(), GoldLabel::Correct);
    }

    #[test]
    fn unanimous_incorrect() {
        let p = panel(5);
        let preds: Vec<Prediction> =
            (0..5).map(|i| pred(&format!("g{i}"), GoldLabel::Incorrect, 0.1)).collect();
        assert_eq!(majority_vote(&p, &preds).unwrap(), GoldLabel::Incorrect);
    }

    #[test]
    fn all_32_patterns_match_truth_table_oracle() {
        let p = panel(5);
        for pattern in 0u32..32 {
            let labels: Vec<GoldLabel> = (0..5)
                .map(|bit| if pattern & (1 << bit) != 0 { GoldLabel::Correct } else { GoldLabel::Incorrect })
                .collect();
            let preds: Vec<Prediction> =
                labels.iter().enumerate().map(|(i, l)| pred(&format!("g{i}"), *l, 0.0)).collect();
            assert_eq!(
                majority_vote(&p, &preds).unwrap(),
                vote_oracle(&labels, GoldLabel::Incorrect),
                "pattern {pattern:05b}"
            );
        }
    }

    #[test]
    fn even_panel_tie_uses_tie_break() {
        for tie_break in [GoldLabel::Incorrect, GoldLabel::Correct] {
            let p = VotePanel::with_tie_break(vec!["a".into(), "b".into()], tie_break).unwrap();
            let preds = vec![pred("a", GoldLabel::Correct, 0.9), pred("b", GoldLabel::Incorrect, 0.9)];
            assert_eq!(majority_vote(&p, &preds).unwrap(), tie_break);
        }
    }

    #[test]
    fn missing_classifier_is_an_error() {
        let p = panel(3);
        let preds = vec![pred("g0", GoldLabel::Correct, 0.5), pred("g1", GoldLabel::Correct, 0.5)];
        assert!(matches!(majority_vote(&p, &preds), Err(EnsembleError::MissingPrediction(_))));
    }

    #[test]
    fn raw_interpolation_is_exact() {
        // lambda = 0, X = [[1],[2]], y = [1,2] -> w = 1 exactly.
        let opts = RidgeOptions { lambda: 0.0, scaling: FeatureScaling::Raw, ..Default::default() };
        let model = fit_ridge(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &opts).unwrap();
        assert!((model.weights[0] - 1.0).abs() < 1e-12);
        assert_eq!(model.bias, 0.0);
    }

    #[test]
    fn raw_lambda_one_matches_hand_solution() {
        // (XᵀX + λ)w = Xᵀy -> (5 + 1)w = 5 -> w = 5/6.
        let opts = RidgeOptions { lambda: 1.0, scaling: FeatureScaling::Raw, ..Default::default() };
        let model = fit_ridge(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &opts).unwrap();
        assert!((model.weights[0] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn huge_lambda_shrinks_to_mean_prediction() {
        let features = vec![vec![1.0, 0.2], vec![2.0, -0.3], vec![3.0, 0.9], vec![4.0, 0.1]];
        let labels = vec![0.0, 1.0, 1.0, 0.0];
        let opts = RidgeOptions { lambda: 1e12, ..Default::default() };
        let model = fit_ridge(&features, &labels, &opts).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-6));
        let (score, _) = predict_ridge(&model, &[2.5, 0.0]).unwrap();
        assert!((score - 0.5).abs() < 1e-6, "prediction should collapse to mean(y)");
    }

    #[test]
    fn zero_weights_bias_at_threshold_is_correct() {
        let model = RidgeModel {
            weights: vec![0.0, 0.0],
            bias: 0.5,
            lambda: 1.0,
            decision_threshold: 0.5,
            scaling: FeatureScaling::Raw,
            feature_means: vec![],
            feature_stds: vec![],
            feature_layout: None,
        };
        let (score, label) = predict_ridge(&model, &[123.0, -42.0]).unwrap();
        assert_eq!(score, 0.5);
        assert_eq!(label, GoldLabel::Correct, "threshold comparison is inclusive");
        let below = RidgeModel { bias: 0.499, ..model };
        assert_eq!(predict_ridge(&below, &[0.0, 0.0]).unwrap().1, GoldLabel::Incorrect);
    }

    #[test]
    fn constant_columns_are_zeroed_not_nan() {
        let features = vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0]];
        let labels = vec![0.0, 0.5, 1.0];
        let model = fit_ridge(&features, &labels, &RidgeOptions::default()).unwrap();
        assert!(model.weights.iter().all(|w| w.is_finite()));
        let (score, _) = predict_ridge(&model, &[2.0, 7.0]).unwrap();
        assert!(score.is_finite());
    }

    #[test]
    fn separable_panel_reaches_zero_training_errors() {
        // 20 synthetic rows from a linearly separable rule, verified against a
        // brute-force grid search over weight space as an independent
        // separability oracle.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let jitter = (i as f64 - 4.5) / 45.0; // within ±0.1
            features.push(vec![1.0 + jitter, 0.9 - jitter]);
            labels.push(1.0);
            features.push(vec![jitter, 0.1 + jitter]);
            labels.push(0.0);
        }

        // Oracle: some (w1, w2, c) on a coarse grid separates the data.
        let mut oracle_separable = false;
        'outer: for w1 in -10..=10 {
            for w2 in -10..=10 {
                for c in -20..=20 {
                    let (w1, w2, c) = (w1 as f64 / 2.0, w2 as f64 / 2.0, c as f64 / 4.0);
                    if features.iter().zip(&labels).all(|(row, &y)| {
                        let s = w1 * row[0] + w2 * row[1];
                        (s >= c) == (y >= 0.5)
                    }) {
                        oracle_separable = true;
                        break 'outer;
                    }
                }
            }
        }
        assert!(oracle_separable, "construction must be separable");

        let opts = RidgeOptions { lambda: 0.01, ..Default::default() };
        let model = fit_ridge(&features, &labels, &opts).unwrap();
        let errors = features
            .iter()
            .zip(&labels)
            .filter(|(row, &y)| {
                let (_, label) = predict_ridge(&model, row).unwrap();
                (label == GoldLabel::Correct) != (y >= 0.5)
            })
            .count();
        assert_eq!(errors, 0);
    }

    /// Independent oracle: solve the same normal equations with explicit
    /// Gaussian elimination and partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn gaussian_oracle(features: &[Vec<f64>], targets: &[f64], lambda: f64) -> Vec<f64> {
        let n = features.len();
        let p = features[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                let mut sum = 0.0;
                for r in 0..n {
                    sum += features[r][i] * features[r][j];
                }
                a[i][j] = sum + if i == j { lambda } else { 0.0 };
            }
            let mut rhs = 0.0;
            for r in 0..n {
                rhs += features[r][i] * targets[r];
            }
            a[i][p] = rhs;
        }
        for col in 0..p {
            let pivot = (col..p).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()).unwrap();
            a.swap(col, pivot);
            for row in col + 1..p {
                let factor = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        let mut x = vec![0.0; p];
        for row in (0..p).rev() {
            let mut sum = a[row][p];
            for k in row + 1..p {
                sum -= a[row][k] * x[k];
            }
            x[row] = sum / a[row][row];
        }
        x
    }

    #[test]
    fn ridge_matches_gaussian_elimination_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = rng.random_range(3..=50);
            let p = rng.random_range(1..=10);
            let features: Vec<Vec<f64>> =
                (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let lambda = rng.random_range(0.01..10.0);
            let opts = RidgeOptions { lambda, scaling: FeatureScaling::Raw, ..Default::default() };
            let model = fit_ridge(&features, &labels, &opts).unwrap();
            let oracle = gaussian_oracle(&features, &labels, lambda);
            for (w, o) in model.weights.iter().zip(&oracle) {
                assert!((w - o).abs() < 1e-8, "weight {w} vs oracle {o}");
            }
        }
    }

    #[test]
    fn model_roundtrips_through_json() {
        let opts = RidgeOptions { lambda: 0.5, ..Default::default() };
        let model = fit_ridge(&[vec![1.0, 2.0], vec![2.0, 1.0], vec![0.5, 0.1]], &[1.0, 0.0, 1.0], &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = RidgeModel::load(&path).unwrap();
        assert_eq!(model.weights, loaded.weights);
        assert_eq!(model.bias, loaded.bias);
    }

    fn rss(model: &RidgeModel, features: &[Vec<f64>], labels: &[f64]) -> f64 {
        features
            .iter()
            .zip(labels)
            .map(|(row, &y)| {
                let (score, _) = predict_ridge(model, row).unwrap();
                (score - y) * (score - y)
            })
            .sum()
    }

    proptest! {
        /// Training residual sum of squares never decreases as lambda grows.
        #[test]
        fn rss_is_monotone_in_lambda(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(5..=30);
            let p = rng.random_range(1..=4);
            let features: Vec<Vec<f64>> =
                (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let labels: Vec<f64> = (0..n).map(|_| if rng.random_range(0.0..1.0) > 0.5 { 1.0 } else { 0.0 }).collect();
            let mut prev = -1.0f64;
            for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
                let opts = RidgeOptions { lambda, ..Default::default() };
                let model = fit_ridge(&features, &labels, &opts).unwrap();
                let cur = rss(&model, &features, &labels);
                prop_assert!(cur >= prev - 1e-9, "rss {cur} dropped below {prev} at lambda {lambda}");
                prev = cur;
            }
        }

        /// Vote outcome is invariant to panel ordering.
        #[test]
        fn vote_is_permutation_invariant(pattern in 0u32..32, rot in 0usize..5) {
            let labels: Vec<GoldLabel> = (0..5)
                .map(|bit| if pattern & (1 << bit) != 0 { GoldLabel::Correct } else { GoldLabel::Incorrect })
                .collect();
            let preds: Vec<Prediction> =
                labels.iter().enumerate().map(|(i, l)| pred(&format!("g{i}"), *l, 0.0)).collect();
            let mut ids: Vec<String> = (0..5).map(|i| format!("g{i}")).collect();
            ids.rotate_left(rot);
            let rotated = VotePanel::new(ids).unwrap();
            let base = panel(5);
            prop_assert_eq!(majority_vote(&base, &preds).unwrap(), majority_vote(&rotated, &preds).unwrap());
        }

        /// With an odd panel the tie rule is never consulted.
        #[test]
        fn odd_panel_ignores_tie_break(pattern in 0u32..32) {
            let labels: Vec<GoldLabel> = (0..5)
                .map(|bit| if pattern & (1 << bit) != 0 { GoldLabel::Correct } else { GoldLabel::Incorrect })
                .collect();
            let preds: Vec<Prediction> =
                labels.iter().enumerate().map(|(i, l)| pred(&format!("g{i}"), *l, 0.0)).collect();
            let ids: Vec<String> = (0..5).map(|i| format!("g{i}")).collect();
            let a = VotePanel::with_tie_break(ids.clone(), GoldLabel::Incorrect).unwrap();
            let b = VotePanel::with_tie_break(ids, GoldLabel::Correct).unwrap();
            prop_assert_eq!(majority_vote(&a, &preds).unwrap(), majority_vote(&b, &preds).unwrap());
        }
    }
}
