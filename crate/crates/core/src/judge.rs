//! Crowd and mentor judgments: Likert rating sheets, unweighted aggregation,
//! the composite-to-probability mapping and the crowd-based classifier.

use std::collections::BTreeMap;
use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::learn::{self, cart_fit, LabeledDataset, LearnError, Tree, TreeParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgeError {
    #[error("invalid rating schema: {0}")]
    Schema(String),
    #[error("unknown rating schema `{0}`")]
    UnknownSchema(String),
    #[error("no rating sheets to aggregate")]
    NoSheets,
    #[error("sheet from evaluator `{evaluator}` is invalid: {reason}")]
    InvalidSheet { evaluator: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSchema {
    pub name: String,
    pub criteria: Vec<String>,
    pub scale_min: i32,
    pub scale_max: i32,
}

pub const DEFAULT_SCHEMA: &str = "mentor10";

impl RatingSchema {
    pub fn new(name: &str, criteria: &[&str], scale_min: i32, scale_max: i32) -> Result<Self, JudgeError> {
        if scale_min >= scale_max {
            return Err(JudgeError::Schema(format!("scale [{scale_min}, {scale_max}] is empty")));
        }
        if criteria.is_empty() {
            return Err(JudgeError::Schema("no criteria".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in criteria {
            if !seen.insert(*c) {
                return Err(JudgeError::Schema(format!("duplicate criterion `{c}`")));
            }
        }
        Ok(Self {
            name: name.into(),
            criteria: criteria.iter().map(|c| c.to_string()).collect(),
            scale_min,
            scale_max,
        })
    }

    /// 7-point crowd scale.
    pub fn crowd7() -> Self {
        Self::new("crowd7", &["feasibility", "scalability", "desirability"], 1, 7).expect("bundled schema")
    }

    /// 10-point mentor scale.
    pub fn mentor10() -> Self {
        Self::new("mentor10", &["desirability", "implementability", "scalability", "profitability"], 1, 10)
            .expect("bundled schema")
    }

    pub fn by_name(name: &str) -> Result<Self, JudgeError> {
        match name {
            "crowd7" => Ok(Self::crowd7()),
            "mentor10" => Ok(Self::mentor10()),
            other => Err(JudgeError::UnknownSchema(other.into())),
        }
    }

    pub fn bundled() -> Vec<Self> {
        vec![Self::crowd7(), Self::mentor10()]
    }

    pub fn span(&self) -> f64 {
        f64::from(self.scale_max - self.scale_min)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrowdKind {
    #[default]
    NonExpert,
    Expert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSheet {
    pub evaluator_id: String,
    pub venture_id: String,
    pub round_id: String,
    pub scores: BTreeMap<String, i32>,
    /// Free-text guidance keyed by business-model dimension, stored verbatim.
    #[serde(default)]
    pub qualitative: BTreeMap<String, String>,
    #[serde(default)]
    pub crowd_kind: CrowdKind,
}

impl RatingSheet {
    pub fn validate(&self, schema: &RatingSchema) -> Result<(), JudgeError> {
        let fail = |reason: String| JudgeError::InvalidSheet { evaluator: self.evaluator_id.clone(), reason };
        for c in &schema.criteria {
            match self.scores.get(c) {
                None => return Err(fail(format!("criterion `{c}` not scored"))),
                Some(&s) if s < schema.scale_min || s > schema.scale_max => {
                    return Err(fail(format!(
                        "`{c}` score {s} outside [{}, {}]",
                        schema.scale_min, schema.scale_max
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.scores.keys().find(|k| !schema.criteria.contains(k)) {
            return Err(fail(format!("criterion `{extra}` is not in schema `{}`", schema.name)));
        }
        Ok(())
    }

    /// Mean of this sheet's criterion scores.
    pub fn composite(&self, schema: &RatingSchema) -> f64 {
        let sum: i64 = schema.criteria.iter().map(|c| i64::from(self.scores[c])).sum();
        sum as f64 / schema.criteria.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionMean {
    pub criterion: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub schema: String,
    pub criteria: Vec<CriterionMean>,
    pub composite: f64,
    pub n_sheets: usize,
}

impl CriterionScores {
    /// Criterion means in schema order.
    pub fn means(&self) -> Vec<f64> {
        self.criteria.iter().map(|c| c.mean).collect()
    }
}

/// Unweighted mean per criterion; composite is the mean of criterion means.
/// Sums are integral, so the result does not depend on sheet order.
pub fn aggregate_unweighted(schema: &RatingSchema, sheets: &[RatingSheet]) -> Result<CriterionScores, JudgeError> {
    if sheets.is_empty() {
        return Err(JudgeError::NoSheets);
    }
    for s in sheets {
        s.validate(schema)?;
    }
    let n = sheets.len();
    let criteria: Vec<CriterionMean> = schema
        .criteria
        .iter()
        .map(|c| {
            let sum: i64 = sheets.iter().map(|s| i64::from(s.scores[c])).sum();
            CriterionMean { criterion: c.clone(), mean: sum as f64 / n as f64, count: n }
        })
        .collect();
    let composite = criteria.iter().map(|c| c.mean).sum::<f64>() / criteria.len() as f64;
    Ok(CriterionScores { schema: schema.name.clone(), criteria, composite, n_sheets: n })
}

/// Min-max rescale of the composite onto [0, 1].
pub fn composite_to_probability(cs: &CriterionScores, schema: &RatingSchema) -> f64 {
    scale_to_probability(cs.composite, schema)
}

pub fn scale_to_probability(value: f64, schema: &RatingSchema) -> f64 {
    ((value - f64::from(schema.scale_min)) / schema.span()).clamp(0.0, 1.0)
}

/// CART over per-criterion mean features.
pub fn crowd_classifier_fit(
    schema: &RatingSchema,
    rows: &[(Vec<f64>, u8)],
    params: &TreeParams,
) -> Result<Tree, JudgeError> {
    let ds = crowd_dataset(schema, rows)?;
    if !ds.has_both_classes() {
        return Err(LearnError::SingleClass.into());
    }
    Ok(cart_fit(&ds, params)?)
}

pub fn crowd_dataset(schema: &RatingSchema, rows: &[(Vec<f64>, u8)]) -> Result<LabeledDataset, JudgeError> {
    let (data, labels) = rows.iter().cloned().unzip();
    Ok(learn::LabeledDataset::numeric(schema.criteria.clone(), data, labels)?)
}

/// Seeded synthetic crowd: each score is `round(true_quality + N(0, noise_sd))`
/// clipped to the scale.
pub fn simulate_crowd(
    seed: u64,
    true_quality: f64,
    n_raters: usize,
    noise_sd: f64,
    schema: &RatingSchema,
    venture_id: &str,
) -> Result<Vec<RatingSheet>, JudgeError> {
    if n_raters == 0 {
        return Err(JudgeError::InvalidParam("n_raters must be at least 1".into()));
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|e| JudgeError::InvalidParam(format!("noise_sd: {e}")))?;
    let mut rng = seed::rng(seed);
    let sheets = (0..n_raters)
        .map(|i| {
            let scores = schema
                .criteria
                .iter()
                .map(|c| {
                    let raw = (true_quality + noise.sample(&mut rng)).round();
                    let v = raw.clamp(f64::from(schema.scale_min), f64::from(schema.scale_max)) as i32;
                    (c.clone(), v)
                })
                .collect();
            RatingSheet {
                evaluator_id: format!("sim-{i:03}"),
                venture_id: venture_id.into(),
                round_id: format!("sim-{seed}"),
                scores,
                qualitative: BTreeMap::new(),
                crowd_kind: CrowdKind::NonExpert,
            }
        })
        .collect();
    Ok(sheets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAggregate {
    pub round_id: String,
    pub venture_id: String,
    pub scores: CriterionScores,
    pub probability: f64,
}

/// One CSV row per round: ids, sheet count, criterion means, composite, probability.
pub fn write_aggregates_csv<W: Write>(
    out: W,
    schema: &RatingSchema,
    rows: &[RoundAggregate],
) -> Result<(), JudgeError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["round_id".to_string(), "venture_id".into(), "n_sheets".into()];
    header.extend(schema.criteria.iter().cloned());
    header.extend(["composite".to_string(), "probability".into()]);
    w.write_record(&header).map_err(|e| JudgeError::Csv(e.to_string()))?;
    for r in rows {
        let mut rec = vec![r.round_id.clone(), r.venture_id.clone(), r.scores.n_sheets.to_string()];
        rec.extend(r.scores.criteria.iter().map(|c| c.mean.to_string()));
        rec.extend([r.scores.composite.to_string(), r.probability.to_string()]);
        w.write_record(&rec).map_err(|e| JudgeError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| JudgeError::Csv(e.to_string()))
}
