//! Assembles the guidance report for a venture from committed state and the
//! active model registry entry. Pure: no I/O.

use std::collections::BTreeMap;

use bmguide_core::fuse::{self, HybridWeights, PerformanceTable, Scheme};
use bmguide_core::judge::{self, CriterionMean, RatingSchema};
use bmguide_core::learn::{Predictor, TrainedModel};
use bmguide_core::schema::{self, BusinessModel, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{RoundStatus, State, ValidationRound, CROWD_LANE};

/// Models of the latest registry entry, loaded from their documents.
#[derive(Debug, Clone)]
pub struct ActiveModels {
    pub registry_version: u32,
    pub feature_names: Vec<String>,
    pub models: Vec<(String, TrainedModel)>,
    pub performance: PerformanceTable,
}

impl ActiveModels {
    /// Success probability per model family, or why there is none.
    pub fn predict(&self, t: &Taxonomy, model: &BusinessModel) -> Result<BTreeMap<String, f64>, String> {
        if self.feature_names != t.feature_names() {
            return Err(format!("registry v{} was trained on a different taxonomy", self.registry_version));
        }
        let row = schema::encode_one_hot(t, model).map_err(|e| e.to_string())?;
        let x: Vec<f64> = row.bits.iter().map(|&b| f64::from(b)).collect();
        self.models
            .iter()
            .map(|(name, m)| m.predict_proba(&x).map(|p| (name.clone(), p)).map_err(|e| e.to_string()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachinePart {
    pub available: bool,
    pub registry_version: Option<u32>,
    pub probabilities: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Cross-validated MCC means of the active registry entry.
    Registry,
    /// No usable performance data: the crowd alone.
    CrowdOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPart {
    pub probability: f64,
    pub parts: BTreeMap<String, f64>,
    pub weights: HybridWeights,
    pub source: WeightSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Informative {
    pub criteria: Vec<CriterionMean>,
    pub composite: f64,
    pub n_sheets: usize,
    pub crowd_probability: f64,
    pub machine: MachinePart,
    pub hybrid: HybridPart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineagePoint {
    pub round_id: String,
    pub model_version: u32,
    pub status: RoundStatus,
    pub n_sheets: usize,
    pub composite: f64,
    pub crowd_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub venture_id: String,
    pub round_id: String,
    pub round_status: RoundStatus,
    pub model_version: u32,
    pub schema: String,
    pub informative: Informative,
    /// Verbatim comments grouped by the layer, sub-layer or dimension they address.
    pub suggestive: BTreeMap<String, Vec<String>>,
    /// Every rated round of the venture, oldest first, this one included.
    pub lineage: Vec<LineagePoint>,
}

fn aggregate(round: &ValidationRound) -> Result<(judge::CriterionScores, f64), ApiError> {
    let schema = RatingSchema::by_name(&round.schema).map_err(|e| ApiError::internal(e.to_string()))?;
    let scores = match &round.aggregate {
        Some(a) => a.clone(),
        None => judge::aggregate_unweighted(&schema, &round.sheet_list()).map_err(|e| ApiError::internal(e.to_string()))?,
    };
    let p = judge::composite_to_probability(&scores, &schema);
    Ok((scores, p))
}

/// Weights for the parts on display. Predictors the registry has no score
/// for are left out; when nothing admitted remains the crowd stands alone.
pub fn hybrid_weights(parts: &BTreeMap<String, f64>, active: Option<&ActiveModels>, scheme: Scheme) -> (HybridWeights, WeightSource) {
    if let Some(a) = active {
        let summaries: Vec<_> =
            a.performance.summaries().into_iter().filter(|(name, _, _)| parts.contains_key(name)).collect();
        if let Ok(w) = fuse::weights_from_means(&summaries, scheme) {
            return (w, WeightSource::Registry);
        }
    }
    let w = HybridWeights { scheme, weights: BTreeMap::from([(CROWD_LANE.to_string(), 1.0)]), uniform_fallback: true };
    (w, WeightSource::CrowdOnly)
}

pub fn build(
    state: &State,
    t: &Taxonomy,
    venture_id: &str,
    round_id: Option<&str>,
    active: Option<&ActiveModels>,
    scheme: Scheme,
) -> Result<GuidanceReport, ApiError> {
    let venture = state.venture(venture_id)?;
    let rated: Vec<&ValidationRound> = state.rounds_of(venture_id).into_iter().filter(|r| !r.sheets.is_empty()).collect();
    let round = match round_id {
        Some(id) => {
            let r = state.round(id)?;
            if r.venture_id != venture_id {
                return Err(ApiError::not_found(format!("round `{id}` does not belong to `{venture_id}`")));
            }
            if r.sheets.is_empty() {
                return Err(ApiError::conflict(format!("round `{id}` has no rating sheets yet")));
            }
            r
        }
        None => *rated
            .last()
            .ok_or_else(|| ApiError::conflict(format!("venture `{venture_id}` has no rated round yet")))?,
    };
    let (scores, crowd_probability) = aggregate(round)?;
    let snapshot = venture
        .version(round.model_version)
        .ok_or_else(|| ApiError::internal(format!("round `{}` lost its model snapshot", round.round_id)))?;

    let mut parts = BTreeMap::from([(CROWD_LANE.to_string(), crowd_probability)]);
    let machine = match active.map(|a| (a, a.predict(t, &snapshot.model))) {
        None => MachinePart {
            available: false,
            registry_version: None,
            probabilities: BTreeMap::new(),
            reason: Some("no trained model in the registry".into()),
        },
        Some((a, Err(reason))) => MachinePart {
            available: false,
            registry_version: Some(a.registry_version),
            probabilities: BTreeMap::new(),
            reason: Some(reason),
        },
        Some((a, Ok(probs))) => {
            parts.extend(probs.clone());
            MachinePart { available: true, registry_version: Some(a.registry_version), probabilities: probs, reason: None }
        }
    };
    let usable = if machine.available { active } else { None };
    let (weights, source) = hybrid_weights(&parts, usable, scheme);
    let probability = fuse::hybrid_predict(&parts, &weights).map_err(|e| ApiError::internal(e.to_string()))?;

    let mut suggestive: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for sheet in round.sheets.values() {
        for (target, text) in &sheet.qualitative {
            if !text.trim().is_empty() {
                suggestive.entry(target.clone()).or_default().push(text.clone());
            }
        }
    }

    let mut lineage = Vec::new();
    for r in &rated {
        let (s, p) = aggregate(r)?;
        lineage.push(LineagePoint {
            round_id: r.round_id.clone(),
            model_version: r.model_version,
            status: r.status,
            n_sheets: s.n_sheets,
            composite: s.composite,
            crowd_probability: p,
        });
        if r.round_id == round.round_id {
            break;
        }
    }

    Ok(GuidanceReport {
        venture_id: venture_id.to_string(),
        round_id: round.round_id.clone(),
        round_status: round.status,
        model_version: round.model_version,
        schema: round.schema.clone(),
        informative: Informative {
            criteria: scores.criteria,
            composite: scores.composite,
            n_sheets: scores.n_sheets,
            crowd_probability,
            machine,
            hybrid: HybridPart { probability, parts, weights, source },
        },
        suggestive,
        lineage,
    })
}
