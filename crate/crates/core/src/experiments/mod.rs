//! Orchestrates the three evaluation protocols over single graders and
//! ensembles: baseline vulnerability, adversarial training on all strategies,
//! and leave-one-strategy-out adversarial training.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{split, Corpus, CorpusError, GoldLabel, Provenance, Response, SplitPlan, StratifyBy};
use crate::embedding::{default_panel_configs, fit_embedder, EmbedderConfig, EmbeddingError};
use crate::ensemble::{
    fit_ridge, majority_vote, predict_ridge, select_lambda, EnsembleError, FeatureLayout,
    FeatureScaling, RidgeOptions, VotePanel,
};
use crate::grader::{
    build_index, calibrate_threshold, predict, predict_excluding, GraderError, Prediction,
    ReferenceIndex,
};
use crate::metrics::{confusion, confusion_from_labels, MetricsError, MetricsReport};
use crate::text;

/// Pooled gaming strategy used for training/test composition and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "s1")]
    S1,
    #[serde(rename = "s2")]
    S2,
    #[serde(rename = "s3")]
    S3,
}

impl Strategy {
    pub fn all() -> BTreeSet<Strategy> {
        [Strategy::S1, Strategy::S2, Strategy::S3].into_iter().collect()
    }

    pub fn of(provenance: Provenance) -> Option<Strategy> {
        match provenance {
            Provenance::Real => None,
            Provenance::GamingS1a | Provenance::GamingS1b | Provenance::GamingS1c => Some(Strategy::S1),
            Provenance::GamingS2 => Some(Strategy::S2),
            Provenance::GamingS3 => Some(Strategy::S3),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
            Strategy::S3 => "s3",
        }
    }
}

/// Full configuration of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub real_train_fraction: f64,
    pub gaming_train_fraction: f64,
    /// Slice of the training data carved out for threshold calibration.
    pub validation_fraction: f64,
    pub strategies_in_train: BTreeSet<Strategy>,
    pub strategies_in_test: BTreeSet<Strategy>,
    pub tau_default: f64,
    pub tau_grid: Vec<f64>,
    /// Base embedders; single-grader protocols use the first, ensembles all.
    pub embedders: Vec<EmbedderConfig>,
    pub tie_break: GoldLabel,
    pub lambda_grid: Vec<f64>,
    pub decision_threshold: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".to_string(),
            seed: 42,
            real_train_fraction: 0.7,
            gaming_train_fraction: 0.7,
            validation_fraction: 0.1,
            strategies_in_train: Strategy::all(),
            strategies_in_test: Strategy::all(),
            tau_default: 0.5,
            tau_grid: (0..=50).map(|i| i as f64 * 0.02).collect(),
            embedders: default_panel_configs(),
            tie_break: GoldLabel::Incorrect,
            lambda_grid: vec![0.01, 0.1, 1.0, 10.0],
            decision_threshold: 0.5,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        if !frac_ok(self.real_train_fraction) || !frac_ok(self.gaming_train_fraction) || !frac_ok(self.validation_fraction) {
            return Err(ExperimentError::InvalidSpec("fractions must lie in (0,1)".to_string()));
        }
        if self.strategies_in_test.is_empty() {
            return Err(ExperimentError::InvalidSpec("strategies_in_test is empty".to_string()));
        }
        if self.embedders.is_empty() {
            return Err(ExperimentError::InvalidSpec("no embedder configured".to_string()));
        }
        if self.tau_grid.is_empty() || self.lambda_grid.is_empty() {
            return Err(ExperimentError::InvalidSpec("empty calibration grid".to_string()));
        }
        for cfg in &self.embedders {
            cfg.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("{0} pool is empty")]
    EmptyPool(&'static str),
    #[error("response {0:?} appears in both train and test")]
    TrainTestOverlap(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Grader(#[from] GraderError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A single-grader protocol result.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolRun {
    pub condition: String,
    pub tau: f64,
    pub report: MetricsReport,
}

/// One leave-one-strategy-out fold.
#[derive(Debug, Clone, Serialize)]
pub struct FoldRun {
    pub held_out: Strategy,
    pub tau: f64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Advt2Run {
    pub folds: Vec<FoldRun>,
}

impl Advt2Run {
    /// Held-out FPR per strategy, assembled across folds.
    pub fn fpr_by_held_out(&self) -> BTreeMap<Strategy, Option<f64>> {
        self.folds.iter().map(|f| (f.held_out, f.report.fpr(f.held_out.key()))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    Advt1,
    Advt2,
}

/// Ensemble results for one training condition; Advt2 yields one entry per
/// held-out strategy, the other conditions a single entry.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleRun {
    pub condition: Condition,
    pub folds: Vec<EnsembleFoldRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleFoldRun {
    pub held_out: Option<Strategy>,
    pub taus: BTreeMap<String, f64>,
    pub lambda: f64,
    pub vote: MetricsReport,
    pub ridge: MetricsReport,
}

/// Seeded train/test material shared by every protocol under one spec.
#[derive(Debug, Clone)]
pub struct DataSplits {
    pub real_train: Vec<Response>,
    pub real_test: Vec<Response>,
    pub gaming_train: BTreeMap<Strategy, Vec<Response>>,
    pub gaming_test: BTreeMap<Strategy, Vec<Response>>,
    pub gaming_full: BTreeMap<Strategy, Vec<Response>>,
    pub warnings: Vec<String>,
}

/// Split the real pool (stratified by item, for per-item reference coverage)
/// and each gaming strategy pool (stratified by provenance).
pub fn prepare_splits(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    gaming: &[Response],
) -> Result<DataSplits, ExperimentError> {
    spec.validate()?;
    let real = corpus.real_responses();
    if real.is_empty() {
        return Err(ExperimentError::EmptyPool("real response"));
    }
    let real_plan = SplitPlan::new(
        text::derive_seed(spec.seed, "real-split"),
        spec.real_train_fraction,
        StratifyBy::Item,
    )?;
    let real_split = split(&real, &real_plan)?;

    let mut gaming_train: BTreeMap<Strategy, Vec<Response>> = BTreeMap::new();
    let mut gaming_test: BTreeMap<Strategy, Vec<Response>> = BTreeMap::new();
    let mut gaming_full: BTreeMap<Strategy, Vec<Response>> = BTreeMap::new();
    let mut warnings = real_split.warnings.clone();
    if !gaming.is_empty() {
        for response in gaming {
            let Some(strategy) = Strategy::of(response.provenance) else {
                return Err(ExperimentError::InvalidSpec(format!(
                    "response {:?} in the gaming pool has real provenance",
                    response.response_id
                )));
            };
            gaming_full.entry(strategy).or_default().push(response.clone());
        }
        let gaming_plan = SplitPlan::new(
            text::derive_seed(spec.seed, "gaming-split"),
            spec.gaming_train_fraction,
            StratifyBy::Provenance,
        )?;
        let gaming_split = split(gaming, &gaming_plan)?;
        warnings.extend(gaming_split.warnings);
        for response in gaming_split.train {
            let strategy = Strategy::of(response.provenance).expect("validated above");
            gaming_train.entry(strategy).or_default().push(response);
        }
        for response in gaming_split.test {
            let strategy = Strategy::of(response.provenance).expect("validated above");
            gaming_test.entry(strategy).or_default().push(response);
        }
    }

    Ok(DataSplits {
        real_train: real_split.train,
        real_test: real_split.test,
        gaming_train,
        gaming_test,
        gaming_full,
        warnings,
    })
}

/// One protocol's training material and evaluation set.
struct TrainTestCase {
    held_out: Option<Strategy>,
    gaming_train: Vec<Response>,
    test: Vec<Response>,
}

fn concat(strategies: &BTreeSet<Strategy>, pools: &BTreeMap<Strategy, Vec<Response>>) -> Vec<Response> {
    strategies
        .iter()
        .filter_map(|s| pools.get(s))
        .flat_map(|v| v.iter().cloned())
        .collect()
}

fn cases_for(
    spec: &ExperimentSpec,
    splits: &DataSplits,
    condition: Condition,
) -> Result<Vec<TrainTestCase>, ExperimentError> {
    let mut cases = Vec::new();
    match condition {
        Condition::Baseline => {
            let mut test = splits.real_test.clone();
            test.extend(concat(&spec.strategies_in_test, &splits.gaming_full));
            cases.push(TrainTestCase { held_out: None, gaming_train: Vec::new(), test });
        }
        Condition::Advt1 => {
            for strategy in &spec.strategies_in_train {
                if !splits.gaming_full.contains_key(strategy) {
                    return Err(ExperimentError::EmptyPool("gaming strategy"));
                }
            }
            let gaming_train = concat(&spec.strategies_in_train, &splits.gaming_train);
            let mut test = splits.real_test.clone();
            test.extend(concat(&spec.strategies_in_test, &splits.gaming_test));
            cases.push(TrainTestCase { held_out: None, gaming_train, test });
        }
        Condition::Advt2 => {
            let available: Vec<Strategy> = splits.gaming_full.keys().copied().collect();
            if available.len() < 2 {
                return Err(ExperimentError::InvalidSpec(
                    "leave-one-out needs at least two gaming strategies".to_string(),
                ));
            }
            for held_out in available.iter().copied() {
                let train_strategies: BTreeSet<Strategy> =
                    available.iter().copied().filter(|s| *s != held_out).collect();
                let gaming_train = concat(&train_strategies, &splits.gaming_full);
                let mut test = splits.real_test.clone();
                test.extend(splits.gaming_full[&held_out].iter().cloned());
                cases.push(TrainTestCase { held_out: Some(held_out), gaming_train, test });
            }
        }
    }
    Ok(cases)
}

/// A trained single grader: calibrated index plus the embedder behind it.
struct TrainedGrader {
    index: ReferenceIndex,
    tau: f64,
}

/// Train one grader: fit the embedder on the real training texts (identical
/// across conditions, so deltas are attributable to the reference set and
/// threshold), carve a validation slice, calibrate the threshold against the
/// remaining references, then index the full training set at that threshold.
fn train_grader(
    spec: &ExperimentSpec,
    real_train: &[Response],
    gaming_train: &[Response],
    embedder_cfg: &EmbedderConfig,
    classifier_id: &str,
) -> Result<TrainedGrader, ExperimentError> {
    let mut combined: Vec<Response> = Vec::with_capacity(real_train.len() + gaming_train.len());
    combined.extend(real_train.iter().cloned());
    combined.extend(gaming_train.iter().cloned());
    if combined.is_empty() {
        return Err(ExperimentError::EmptyPool("training"));
    }

    let texts: Vec<&str> = real_train.iter().map(|r| r.text.as_str()).collect();
    if texts.is_empty() {
        return Err(ExperimentError::EmptyPool("real training"));
    }
    let embedder = Arc::new(fit_embedder(embedder_cfg, &texts)?);

    let carve_plan = SplitPlan::new(
        text::derive_seed(spec.seed, "validation-carve"),
        1.0 - spec.validation_fraction,
        StratifyBy::Provenance,
    )?;
    let carved = split(&combined, &carve_plan)?;
    let (core, validation) = (carved.train, carved.test);

    let tau = if validation.is_empty() || core.iter().all(|r| r.provenance.is_gaming()) {
        spec.tau_default
    } else {
        let core_real: Vec<Response> =
            core.iter().filter(|r| !r.provenance.is_gaming()).cloned().collect();
        let core_gaming: Vec<Response> =
            core.iter().filter(|r| r.provenance.is_gaming()).cloned().collect();
        let calibration_index =
            build_index(&core_real, embedder.clone(), spec.tau_default, classifier_id)?
                .augment(&core_gaming)?;
        calibrate_threshold(&calibration_index, &validation, &spec.tau_grid)?
    };

    let index = build_index(real_train, embedder, tau, classifier_id)?.augment(gaming_train)?;
    Ok(TrainedGrader { index, tau })
}

fn assert_no_leakage(
    real_train: &[Response],
    gaming_train: &[Response],
    test: &[Response],
) -> Result<(), ExperimentError> {
    let train_ids: HashSet<&str> = real_train
        .iter()
        .chain(gaming_train.iter())
        .map(|r| r.response_id.as_str())
        .collect();
    for response in test {
        if train_ids.contains(response.response_id.as_str()) {
            return Err(ExperimentError::TrainTestOverlap(response.response_id.clone()));
        }
    }
    Ok(())
}

fn run_single_case(
    spec: &ExperimentSpec,
    splits: &DataSplits,
    case: &TrainTestCase,
) -> Result<(f64, MetricsReport), ExperimentError> {
    assert_no_leakage(&splits.real_train, &case.gaming_train, &case.test)?;
    let trained = train_grader(spec, &splits.real_train, &case.gaming_train, &spec.embedders[0], "grader00")?;
    let predictions: Vec<Prediction> = case
        .test
        .iter()
        .map(|r| predict(&trained.index, r))
        .collect::<Result<_, _>>()?;
    let report = confusion(&predictions, &case.test)?;
    Ok((trained.tau, report))
}

/// Baseline vulnerability: train on real responses only, evaluate on the held
/// -out real slice plus every gaming response.
pub fn run_baseline(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    gaming: &[Response],
) -> Result<ProtocolRun, ExperimentError> {
    let splits = prepare_splits(spec, corpus, gaming)?;
    let case = cases_for(spec, &splits, Condition::Baseline)?.remove(0);
    let (tau, report) = run_single_case(spec, &splits, &case)?;
    Ok(ProtocolRun { condition: "baseline".to_string(), tau, report })
}

/// Adversarial training #1: fold the gaming training portions into the
/// reference set, recalibrate, evaluate on the held-out 30% of both real and
/// gaming data.
pub fn run_advt1(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    gaming: &[Response],
) -> Result<ProtocolRun, ExperimentError> {
    let splits = prepare_splits(spec, corpus, gaming)?;
    let case = cases_for(spec, &splits, Condition::Advt1)?.remove(0);
    let (tau, report) = run_single_case(spec, &splits, &case)?;
    Ok(ProtocolRun { condition: "advt1".to_string(), tau, report })
}

/// Adversarial training #2: for each strategy, train on the other two and
/// evaluate on the held-out one (plus the shared real test slice).
pub fn run_advt2(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    gaming: &[Response],
) -> Result<Advt2Run, ExperimentError> {
    let splits = prepare_splits(spec, corpus, gaming)?;
    let mut folds = Vec::new();
    for case in cases_for(spec, &splits, Condition::Advt2)? {
        let (tau, report) = run_single_case(spec, &splits, &case)?;
        folds.push(FoldRun { held_out: case.held_out.expect("advt2 cases carry a held-out strategy"), tau, report });
    }
    Ok(Advt2Run { folds })
}

/// Run the grader panel under one condition and combine verdicts by majority
/// vote and by a ridge stacker trained on leave-self-out training features.
pub fn run_ensemble(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    gaming: &[Response],
    condition: Condition,
) -> Result<EnsembleRun, ExperimentError> {
    if spec.embedders.len() < 2 {
        return Err(ExperimentError::InvalidSpec(
            "ensemble needs at least two base graders".to_string(),
        ));
    }
    let splits = prepare_splits(spec, corpus, gaming)?;
    let mut folds = Vec::new();
    for case in cases_for(spec, &splits, condition)? {
        folds.push(run_ensemble_case(spec, &splits, &case)?);
    }
    Ok(EnsembleRun { condition, folds })
}

fn run_ensemble_case(
    spec: &ExperimentSpec,
    splits: &DataSplits,
    case: &TrainTestCase,
) -> Result<EnsembleFoldRun, ExperimentError> {
    assert_no_leakage(&splits.real_train, &case.gaming_train, &case.test)?;

    let classifier_ids: Vec<String> = (0..spec.embedders.len()).map(|i| format!("grader{i:02}")).collect();
    let mut graders = Vec::with_capacity(spec.embedders.len());
    let mut taus = BTreeMap::new();
    for (cfg, id) in spec.embedders.iter().zip(&classifier_ids) {
        let trained = train_grader(spec, &splits.real_train, &case.gaming_train, cfg, id)?;
        taus.insert(id.clone(), trained.tau);
        graders.push(trained);
    }

    let layout = FeatureLayout { classifier_ids: classifier_ids.clone() };
    let panel = VotePanel::with_tie_break(classifier_ids.clone(), spec.tie_break)?;

    // Stacker training features over the combined training set,
    // leave-self-out so self-matches cannot feed gold labels back in.
    let mut train_pool: Vec<&Response> = splits.real_train.iter().collect();
    train_pool.extend(case.gaming_train.iter());
    let mut features = Vec::with_capacity(train_pool.len());
    let mut labels = Vec::with_capacity(train_pool.len());
    for response in &train_pool {
        let preds: Vec<Prediction> = graders
            .iter()
            .map(|g| predict_excluding(&g.index, response, Some(&response.response_id)))
            .collect::<Result<_, _>>()?;
        features.push(layout.feature_row(&preds)?);
        labels.push(if response.gold_label == GoldLabel::Correct { 1.0 } else { 0.0 });
    }

    // Lambda selection on a provenance-stratified carve of the feature rows.
    let carve_plan = SplitPlan::new(
        text::derive_seed(spec.seed, "stacker-validation"),
        1.0 - spec.validation_fraction,
        StratifyBy::Provenance,
    )?;
    let owned_pool: Vec<Response> = train_pool.iter().map(|r| (*r).clone()).collect();
    let carved = split(&owned_pool, &carve_plan)?;
    let val_ids: HashSet<&str> = carved.test.iter().map(|r| r.response_id.as_str()).collect();
    let (mut fit_x, mut fit_y, mut val_x, mut val_y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (response, (row, label)) in train_pool.iter().zip(features.iter().zip(&labels)) {
        if val_ids.contains(response.response_id.as_str()) {
            val_x.push(row.clone());
            val_y.push(*label);
        } else {
            fit_x.push(row.clone());
            fit_y.push(*label);
        }
    }
    let base_opts = RidgeOptions {
        lambda: 1.0,
        scaling: FeatureScaling::Standardized,
        decision_threshold: spec.decision_threshold,
    };
    let lambda = if fit_x.is_empty() || val_x.is_empty() {
        base_opts.lambda
    } else {
        select_lambda(&fit_x, &fit_y, &val_x, &val_y, &spec.lambda_grid, &base_opts)?.lambda
    };
    let mut model = fit_ridge(&features, &labels, &RidgeOptions { lambda, ..base_opts })?;
    model.feature_layout = Some(layout.clone());

    // Evaluate the panel on the test set.
    let mut vote_labels = Vec::with_capacity(case.test.len());
    let mut ridge_labels = Vec::with_capacity(case.test.len());
    for response in &case.test {
        let preds: Vec<Prediction> = graders
            .iter()
            .map(|g| predict(&g.index, response))
            .collect::<Result<_, _>>()?;
        vote_labels.push((response.response_id.clone(), majority_vote(&panel, &preds)?));
        let row = layout.feature_row(&preds)?;
        let (_, label) = predict_ridge(&model, &row)?;
        ridge_labels.push((response.response_id.clone(), label));
    }

    Ok(EnsembleFoldRun {
        held_out: case.held_out,
        taus,
        lambda,
        vote: confusion_from_labels(&vote_labels, &case.test)?,
        ridge: confusion_from_labels(&ridge_labels, &case.test)?,
    })
}
