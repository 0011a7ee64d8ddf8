//! Hybrid prediction: machine and crowd probabilities combined under
//! performance-weighted schemes, evaluated by MCC under stratified k-fold
//! cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::learn::{LabeledDataset, LearnError, Learner, Predictor};
use crate::seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuseError {
    #[error("cannot split {n} rows into {k} folds")]
    TooFewRows { n: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("crowd lane `{lane}` has no score for row {row}")]
    MissingCrowdScore { lane: String, row: usize },
    #[error("lane `{lane}` has {got} scores for {expected} rows")]
    LaneLength { lane: String, expected: usize, got: usize },
    #[error("predictor `{0}` appears more than once")]
    DuplicatePredictor(String),
    #[error("scheme {0} admits no predictors")]
    EmptyScheme(Scheme),
    #[error("no probability for weighted predictor `{0}`")]
    MissingProbability(String),
    #[error("probability {value} for `{name}` is outside [0, 1]")]
    BadProbability { name: String, value: f64 },
    #[error("comparison needs at least 2 predictors, got {0}")]
    TooFewPredictors(usize),
    #[error("training `{predictor}` on fold {fold}: {source}")]
    Train { predictor: String, fold: usize, source: LearnError },
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(labels: &[u8], predicted: &[u8]) -> Self {
        let mut c = Self::default();
        for (&y, &p) in labels.iter().zip(predicted) {
            match (y, p) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (0, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mcc {
    pub value: f64,
    /// A marginal was empty; `value` is 0 by convention.
    pub degenerate: bool,
}

/// Matthews correlation coefficient; 0 with a flag when the denominator vanishes.
pub fn mcc(c: &ConfusionMatrix) -> Mcc {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return Mcc { value: 0.0, degenerate: true };
    }
    let v = (tp * tn - fp * fn_) / den.sqrt();
    Mcc { value: v.clamp(-1.0, 1.0), degenerate: false }
}

/// Stratified folds: each class is shuffled under `seed`, positives then
/// negatives are dealt round-robin. Fold index lists are sorted.
pub fn kfold_split(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, FuseError> {
    if k < 2 {
        return Err(FuseError::BadFoldCount(k));
    }
    let n = labels.len();
    if n < k {
        return Err(FuseError::TooFewRows { n, k });
    }
    let mut rng = seed::rng(seed);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] != 1).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (j, i) in pos.into_iter().chain(neg).enumerate() {
        folds[j % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Machine,
    Crowd,
}

/// Precomputed probabilities per dataset row (crowd judgments, not retrained per fold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdLane {
    pub name: String,
    pub probs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl CvParams {
    pub fn new(seed: u64) -> Self {
        Self { k: 10, seed, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorPerformance {
    pub name: String,
    pub kind: PredictorKind,
    pub fold_mcc: Vec<f64>,
    pub degenerate_folds: Vec<bool>,
    pub mean: f64,
    pub sd: f64,
    /// Out-of-fold probability per dataset row.
    pub oof: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePerformance {
    pub scheme: Scheme,
    pub fold_mcc: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
    pub folds: Vec<Vec<usize>>,
    pub predictors: Vec<PredictorPerformance>,
    /// Schemes scored per fold with weights learned on the remaining folds.
    pub schemes: Vec<SchemePerformance>,
}

impl PerformanceTable {
    pub fn predictor(&self, name: &str) -> Option<&PredictorPerformance> {
        self.predictors.iter().find(|p| p.name == name)
    }

    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemePerformance> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }

    pub fn summaries(&self) -> Vec<(String, PredictorKind, f64)> {
        self.predictors.iter().map(|p| (p.name.clone(), p.kind, p.mean)).collect()
    }
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fold_mcc(labels: &[u8], probs: &[f64], fold: &[usize], threshold: f64) -> Mcc {
    let y: Vec<u8> = fold.iter().map(|&i| labels[i]).collect();
    let p: Vec<u8> = fold.iter().map(|&i| u8::from(probs[i] >= threshold)).collect();
    mcc(&ConfusionMatrix::from_predictions(&y, &p))
}

fn performance(
    name: &str,
    kind: PredictorKind,
    labels: &[u8],
    oof: Vec<f64>,
    folds: &[Vec<usize>],
    threshold: f64,
) -> PredictorPerformance {
    let scores: Vec<Mcc> = folds.iter().map(|f| fold_mcc(labels, &oof, f, threshold)).collect();
    let fold_mcc: Vec<f64> = scores.iter().map(|m| m.value).collect();
    let (mean, sd) = mean_sd(&fold_mcc);
    PredictorPerformance {
        name: name.into(),
        kind,
        degenerate_folds: scores.iter().map(|m| m.degenerate).collect(),
        fold_mcc,
        mean,
        sd,
        oof,
    }
}

/// Machine learners are trained on each training split and scored on the
/// held-out fold; crowd lanes are scored on each fold as given.
pub fn evaluate_cv(
    learners: &[&dyn Learner],
    ds: &LabeledDataset,
    crowd: &[CrowdLane],
    params: &CvParams,
) -> Result<PerformanceTable, FuseError> {
    let n = ds.len();
    let mut names = std::collections::BTreeSet::new();
    for name in learners.iter().map(|l| l.name()).chain(crowd.iter().map(|c| c.name.as_str())) {
        if !names.insert(name.to_string()) {
            return Err(FuseError::DuplicatePredictor(name.into()));
        }
    }
    let mut crowd_probs = Vec::with_capacity(crowd.len());
    for lane in crowd {
        if lane.probs.len() != n {
            return Err(FuseError::LaneLength { lane: lane.name.clone(), expected: n, got: lane.probs.len() });
        }
        let mut probs = Vec::with_capacity(n);
        for (row, p) in lane.probs.iter().enumerate() {
            let p = p.ok_or_else(|| FuseError::MissingCrowdScore { lane: lane.name.clone(), row })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(FuseError::BadProbability { name: lane.name.clone(), value: p });
            }
            probs.push(p);
        }
        crowd_probs.push(probs);
    }
    let folds = kfold_split(&ds.labels, params.k, params.seed)?;

    let mut predictors = Vec::new();
    for learner in learners {
        let per_fold: Vec<Result<Vec<(usize, f64)>, FuseError>> = folds
            .par_iter()
            .enumerate()
            .map(|(fi, test)| {
                let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
                let model = learner.fit(&ds.subset(&train)).map_err(|source| FuseError::Train {
                    predictor: learner.name().into(),
                    fold: fi,
                    source,
                })?;
                Ok(test.iter().map(|&i| (i, model.proba_unchecked(&ds.rows[i]))).collect())
            })
            .collect();
        let mut oof = vec![0.0; n];
        for fold in per_fold {
            for (i, p) in fold? {
                oof[i] = p;
            }
        }
        predictors.push(performance(learner.name(), PredictorKind::Machine, &ds.labels, oof, &folds, params.threshold));
    }
    for (lane, probs) in crowd.iter().zip(crowd_probs) {
        predictors.push(performance(&lane.name, PredictorKind::Crowd, &ds.labels, probs, &folds, params.threshold));
    }

    let mut table = PerformanceTable {
        k: params.k,
        seed: params.seed,
        threshold: params.threshold,
        folds,
        predictors,
        schemes: Vec::new(),
    };
    table.schemes = score_schemes(&table, &ds.labels);
    Ok(table)
}

/// Each fold is combined with weights computed from the other folds' MCC.
fn score_schemes(table: &PerformanceTable, labels: &[u8]) -> Vec<SchemePerformance> {
    let k = table.folds.len();
    Scheme::ALL
        .iter()
        .filter_map(|&scheme| {
            let mut fold_scores = Vec::with_capacity(k);
            for (fi, fold) in table.folds.iter().enumerate() {
                let summaries: Vec<(String, PredictorKind, f64)> = table
                    .predictors
                    .iter()
                    .map(|p| {
                        let others: Vec<f64> =
                            p.fold_mcc.iter().enumerate().filter(|(j, _)| *j != fi).map(|(_, v)| *v).collect();
                        (p.name.clone(), p.kind, mean_sd(&others).0)
                    })
                    .collect();
                let w = weights_from_means(&summaries, scheme).ok()?;
                let mut combined = vec![0.0; labels.len()];
                for &i in fold {
                    let probs: BTreeMap<String, f64> =
                        table.predictors.iter().map(|p| (p.name.clone(), p.oof[i])).collect();
                    combined[i] = hybrid_predict(&probs, &w).ok()?;
                }
                fold_scores.push(fold_mcc(labels, &combined, fold, table.threshold).value);
            }
            let (mean, sd) = mean_sd(&fold_scores);
            Some(SchemePerformance { scheme, fold_mcc: fold_scores, mean, sd })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Unweighted,
    MachinePerf,
    CrowdPerf,
    HybridPerf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Unweighted, Scheme::MachinePerf, Scheme::CrowdPerf, Scheme::HybridPerf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Unweighted => "unweighted",
            Scheme::MachinePerf => "machine_perf",
            Scheme::CrowdPerf => "crowd_perf",
            Scheme::HybridPerf => "hybrid_perf",
        }
    }

    pub fn admits(&self, kind: PredictorKind) -> bool {
        match self {
            Scheme::Unweighted | Scheme::HybridPerf => true,
            Scheme::MachinePerf => kind == PredictorKind::Machine,
            Scheme::CrowdPerf => kind == PredictorKind::Crowd,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = FuseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| FuseError::UnknownScheme(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    pub scheme: Scheme,
    pub weights: BTreeMap<String, f64>,
    /// Every admitted predictor had mean MCC <= 0, so weights are uniform.
    pub uniform_fallback: bool,
}

/// `w_i = max(0, mcc_i) / sum_j max(0, mcc_j)` over the admitted predictors,
/// uniform when no admitted predictor is positive. `unweighted` is uniform
/// over everything.
pub fn weights_from_means(
    summaries: &[(String, PredictorKind, f64)],
    scheme: Scheme,
) -> Result<HybridWeights, FuseError> {
    let admitted: Vec<&(String, PredictorKind, f64)> = summaries.iter().filter(|s| scheme.admits(s.1)).collect();
    if admitted.is_empty() {
        return Err(FuseError::EmptyScheme(scheme));
    }
    let uniform = |fallback| HybridWeights {
        scheme,
        weights: admitted.iter().map(|s| (s.0.clone(), 1.0 / admitted.len() as f64)).collect(),
        uniform_fallback: fallback,
    };
    if scheme == Scheme::Unweighted {
        return Ok(uniform(false));
    }
    let total: f64 = admitted.iter().map(|s| s.2.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(uniform(true));
    }
    Ok(HybridWeights {
        scheme,
        weights: admitted.iter().map(|s| (s.0.clone(), s.2.max(0.0) / total)).collect(),
        uniform_fallback: false,
    })
}

pub fn weights_from_performance(pt: &PerformanceTable, scheme: Scheme) -> Result<HybridWeights, FuseError> {
    weights_from_means(&pt.summaries(), scheme)
}

/// `sum_i w_i * p_i` over the weighted predictors.
pub fn hybrid_predict(probs: &BTreeMap<String, f64>, w: &HybridWeights) -> Result<f64, FuseError> {
    let mut total = 0.0;
    for (name, weight) in &w.weights {
        let p = *probs.get(name).ok_or_else(|| FuseError::MissingProbability(name.clone()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(FuseError::BadProbability { name: name.clone(), value: p });
        }
        total += weight * p;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Predictor,
    Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub kind: RowKind,
    pub mean: f64,
    pub sd: f64,
    /// Highest mean MCC in the report (all rows tied at the maximum are flagged).
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub k: usize,
    pub rows: Vec<ReportRow>,
    pub best_scheme: Option<Scheme>,
}

pub fn compare_report(pt: &PerformanceTable) -> Result<CompareReport, FuseError> {
    if pt.predictors.len() < 2 {
        return Err(FuseError::TooFewPredictors(pt.predictors.len()));
    }
    let mut rows: Vec<ReportRow> = pt
        .predictors
        .iter()
        .map(|p| ReportRow { name: p.name.clone(), kind: RowKind::Predictor, mean: p.mean, sd: p.sd, best: false })
        .chain(pt.schemes.iter().map(|s| ReportRow {
            name: s.scheme.to_string(),
            kind: RowKind::Scheme,
            mean: s.mean,
            sd: s.sd,
            best: false,
        }))
        .collect();
    let max = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    for r in &mut rows {
        r.best = r.mean == max;
    }
    let best_scheme = pt.schemes.iter().fold(None::<&SchemePerformance>, |acc, s| match acc {
        Some(b) if b.mean >= s.mean => Some(b),
        _ => Some(s),
    });
    Ok(CompareReport { k: pt.k, rows, best_scheme: best_scheme.map(|s| s.scheme) })
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>9} {:>8} {:>8}", "predictor", "kind", "mean", "sd")?;
        for r in &self.rows {
            let kind = match r.kind {
                RowKind::Predictor => "predictor",
                RowKind::Scheme => "scheme",
            };
            writeln!(f, "{:<20} {:>9} {:>8.4} {:>8.4}{}", r.name, kind, r.mean, r.sd, if r.best { "  *" } else { "" })?;
        }
        if let Some(s) = self.best_scheme {
            writeln!(f, "best scheme: {s}")?;
        }
        Ok(())
    }
}

/// Per-fold MCC table: one row per predictor and per scheme.
pub fn write_performance_csv<W: Write>(out: W, pt: &PerformanceTable) -> Result<(), FuseError> {
    let csv_err = |e: csv::Error| FuseError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["name".to_string(), "kind".into()];
    header.extend((0..pt.folds.len()).map(|i| format!("fold_{i}")));
    header.extend(["mean".to_string(), "sd".into()]);
    w.write_record(&header).map_err(csv_err)?;
    for p in &pt.predictors {
        let kind = match p.kind {
            PredictorKind::Machine => "machine",
            PredictorKind::Crowd => "crowd",
        };
        let mut rec = vec![p.name.clone(), kind.to_string()];
        rec.extend(p.fold_mcc.iter().map(|v| v.to_string()));
        rec.extend([p.mean.to_string(), p.sd.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    for s in &pt.schemes {
        let mut rec = vec![s.scheme.to_string(), "scheme".to_string()];
        rec.extend(s.fold_mcc.iter().map(|v| v.to_string()));
        rec.extend([s.mean.to_string(), s.sd.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| FuseError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, tn, fp, fn_ }
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&cm(5, 5, 0, 0)).value, 1.0);
        assert_eq!(mcc(&cm(1, 1, 1, 1)).value, 0.0);
        let v = mcc(&cm(4, 3, 1, 2)).value;
        assert!((v - 10.0 / 600f64.sqrt()).abs() < 1e-12);
        assert!((v - 0.408).abs() < 1e-3);
        let d = mcc(&cm(5, 0, 5, 0));
        assert!(d.degenerate);
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn fold_shapes() {
        let labels: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 0)).collect();
        let f = kfold_split(&labels, 10, 1).unwrap();
        assert!(f.iter().all(|x| x.len() == 1));
        let labels: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let f = kfold_split(&labels, 10, 1).unwrap();
        let mut sizes: Vec<usize> = f.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 2, 2, 2, 3, 3, 3]);
        assert_eq!(f, kfold_split(&labels, 10, 1).unwrap());
        assert_eq!(kfold_split(&labels[..5], 10, 1), Err(FuseError::TooFewRows { n: 5, k: 10 }));
    }

    #[test]
    fn weight_examples() {
        let s = vec![
            ("forest".to_string(), PredictorKind::Machine, 0.6),
            ("crowd".to_string(), PredictorKind::Crowd, 0.3),
        ];
        let w = weights_from_means(&s, Scheme::HybridPerf).unwrap();
        assert!((w.weights["forest"] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w.weights["crowd"] - 1.0 / 3.0).abs() < 1e-12);
        let four: Vec<_> = (0..4).map(|i| (format!("p{i}"), PredictorKind::Machine, 0.1 * i as f64)).collect();
        let u = weights_from_means(&four, Scheme::Unweighted).unwrap();
        assert!(u.weights.values().all(|&v| v == 0.25));
        let neg = vec![
            ("a".to_string(), PredictorKind::Machine, -0.2),
            ("b".to_string(), PredictorKind::Machine, 0.4),
        ];
        assert_eq!(weights_from_means(&neg, Scheme::MachinePerf).unwrap().weights["a"], 0.0);
        assert_eq!(weights_from_means(&neg, Scheme::CrowdPerf), Err(FuseError::EmptyScheme(Scheme::CrowdPerf)));
        let all_neg = vec![("a".to_string(), PredictorKind::Crowd, -0.2)];
        assert!(weights_from_means(&all_neg, Scheme::CrowdPerf).unwrap().uniform_fallback);
    }

    #[test]
    fn hybrid_examples() {
        let probs: BTreeMap<String, f64> = [("m".to_string(), 0.9), ("c".to_string(), 0.6)].into();
        let w = HybridWeights {
            scheme: Scheme::Unweighted,
            weights: [("m".to_string(), 0.5), ("c".to_string(), 0.5)].into(),
            uniform_fallback: false,
        };
        assert!((hybrid_predict(&probs, &w).unwrap() - 0.75).abs() < 1e-12);
        let one = HybridWeights { weights: [("c".to_string(), 1.0)].into(), ..w.clone() };
        assert_eq!(hybrid_predict(&probs, &one).unwrap(), 0.6);
        let missing = HybridWeights { weights: [("x".to_string(), 1.0)].into(), ..w };
        assert_eq!(hybrid_predict(&probs, &missing), Err(FuseError::MissingProbability("x".into())));
    }

    fn lanes(labels: &[u8]) -> Vec<CrowdLane> {
        vec![
            CrowdLane { name: "oracle".into(), probs: labels.iter().map(|&y| Some(f64::from(y))).collect() },
            CrowdLane { name: "constant".into(), probs: vec![Some(0.3); labels.len()] },
        ]
    }

    #[test]
    fn oracle_and_constant_lanes() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let ds = LabeledDataset::numeric(vec!["x".into()], vec![vec![0.0]; 40], labels.clone()).unwrap();
        let pt = evaluate_cv(&[], &ds, &lanes(&labels), &CvParams::new(3)).unwrap();
        assert_eq!(pt.predictor("oracle").unwrap().mean, 1.0);
        let c = pt.predictor("constant").unwrap();
        assert!(c.fold_mcc.iter().all(|&v| v == 0.0));
        assert!(c.degenerate_folds.iter().all(|&d| d));
        let report = compare_report(&pt).unwrap();
        assert_eq!(report.rows.len(), 2 + Scheme::ALL.len() - 1);
        assert!(report.rows.iter().find(|r| r.name == "oracle").unwrap().best);
        assert!(!report.rows.iter().find(|r| r.name == "constant").unwrap().best);

        let mut missing = lanes(&labels);
        missing[0].probs[7] = None;
        assert_eq!(
            evaluate_cv(&[], &ds, &missing, &CvParams::new(3)),
            Err(FuseError::MissingCrowdScore { lane: "oracle".into(), row: 7 })
        );
    }

    #[test]
    fn single_fold_sd_is_zero() {
        let p = |name: &str, v: f64| PredictorPerformance {
            name: name.into(),
            kind: PredictorKind::Machine,
            fold_mcc: vec![v],
            degenerate_folds: vec![false],
            mean: v,
            sd: mean_sd(&[v]).1,
            oof: vec![],
        };
        let pt = PerformanceTable {
            k: 1,
            seed: 0,
            threshold: 0.5,
            folds: vec![vec![]],
            predictors: vec![p("a", 0.4), p("b", 0.2)],
            schemes: vec![],
        };
        let report = compare_report(&pt).unwrap();
        assert!(report.rows.iter().all(|r| r.sd == 0.0));
        assert_eq!("hybrid_perf".parse::<Scheme>().unwrap(), Scheme::HybridPerf);
    }
}
