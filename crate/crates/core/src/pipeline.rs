//! Training bundle shared by the CLI and the service: a random forest plus
//! both baselines fitted on one labeled dataset, their cross-validated
//! performance table and a stratified holdout check.

use serde::{Deserialize, Serialize};

use crate::fuse::{self, ConfusionMatrix, CrowdLane, CvParams, FuseError, PerformanceTable};
use crate::learn::{ForestParams, LabeledDataset, LearnError, Learner, LogisticParams, ModelSpec, Predictor, TrainedModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Fuse(#[from] FuseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub seed: u64,
    pub n_trees: usize,
    pub folds: usize,
    /// Share of rows held out for the post-training check (stratified).
    pub holdout_fraction: f64,
    pub threshold: f64,
}

impl TrainingParams {
    pub fn new(seed: u64) -> Self {
        Self { seed, n_trees: 1000, folds: 10, holdout_fraction: 0.2, threshold: 0.5 }
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        vec![
            ModelSpec::RandomForest(ForestParams { n_trees: self.n_trees, ..ForestParams::new(self.seed) }),
            ModelSpec::Logistic(LogisticParams::default()),
            ModelSpec::NaiveBayes,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutScore {
    pub name: String,
    pub mcc: f64,
    pub degenerate: bool,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub dataset_hash: String,
    pub params: TrainingParams,
    pub specs: Vec<ModelSpec>,
    /// Fitted on every row.
    pub models: Vec<(String, TrainedModel)>,
    pub performance: PerformanceTable,
    pub holdout_rows: Vec<usize>,
    pub holdout: Vec<HoldoutScore>,
}

impl TrainingOutcome {
    pub fn model(&self, name: &str) -> Option<&TrainedModel> {
        self.models.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Stratified holdout: one fold of a `round(1 / fraction)`-fold split.
pub fn holdout_split(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), FuseError> {
    let k = ((1.0 / fraction).round() as usize).max(2);
    let folds = fuse::kfold_split(labels, k, seed)?;
    let test = folds[0].clone();
    let train = (0..labels.len()).filter(|i| test.binary_search(i).is_err()).collect();
    Ok((train, test))
}

pub fn train_models(
    ds: &LabeledDataset,
    crowd: &[CrowdLane],
    params: &TrainingParams,
) -> Result<TrainingOutcome, TrainError> {
    if !ds.has_both_classes() {
        return Err(LearnError::SingleClass.into());
    }
    let specs = params.specs();
    let learners: Vec<&dyn Learner> = specs.iter().map(|s| s as &dyn Learner).collect();
    let cv = CvParams { k: params.folds.min(ds.len()), seed: params.seed, threshold: params.threshold };
    let performance = fuse::evaluate_cv(&learners, ds, crowd, &cv)?;

    let (train_idx, test_idx) = holdout_split(&ds.labels, params.holdout_fraction, params.seed)?;
    let train = ds.subset(&train_idx);
    let mut holdout = Vec::new();
    for spec in &specs {
        let m = spec.fit(&train)?;
        let y: Vec<u8> = test_idx.iter().map(|&i| ds.labels[i]).collect();
        let p: Vec<u8> =
            test_idx.iter().map(|&i| u8::from(m.proba_unchecked(&ds.rows[i]) >= params.threshold)).collect();
        let confusion = ConfusionMatrix::from_predictions(&y, &p);
        let score = fuse::mcc(&confusion);
        holdout.push(HoldoutScore { name: spec.name().into(), mcc: score.value, degenerate: score.degenerate, confusion });
    }

    let models = specs.iter().map(|s| Ok((s.name().to_string(), s.fit(ds)?))).collect::<Result<Vec<_>, LearnError>>()?;
    Ok(TrainingOutcome {
        dataset_hash: ds.content_hash(),
        params: *params,
        specs,
        models,
        performance,
        holdout_rows: test_idx,
        holdout,
    })
}
