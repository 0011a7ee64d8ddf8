//! Expertise matching between submissions and evaluators.
//!
//! Topic signatures are stop-word-filtered term frequencies compared by
//! cosine. An evaluator profile blends static expertise tags with a dynamic
//! signature accumulated from past, quality-weighted contributions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::seed;

pub const STOP_WORDS_TXT: &str = include_str!("../data/stopwords.txt");

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_M: usize = 7;
pub const DEFAULT_M_BOUNDS: (usize, usize) = (5, 10);
pub const DEFAULT_DECAY: f64 = 0.9;

/// Static expertise tags offered by default.
pub const STANDARD_TAGS: [&str; 3] = ["market", "technology", "finance"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssignError {
    #[error("need {needed} evaluators but only {available} are available (short by {})", needed - available)]
    Shortfall { needed: usize, available: usize },
    #[error("evaluator `{0}` appears more than once")]
    DuplicateEvaluator(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub fn stop_words() -> &'static BTreeSet<String> {
    static WORDS: OnceLock<BTreeSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOP_WORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect()
    })
}

/// Lowercased alphanumeric tokens with stop words removed.
pub fn tokenize(text: &str) -> Vec<String> {
    let stops = stop_words();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !stops.contains(t))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicSignature {
    pub weights: BTreeMap<String, f64>,
}

impl TopicSignature {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    /// Drops non-positive entries and scales the rest to sum 1.
    pub fn normalized(weights: BTreeMap<String, f64>) -> Self {
        let weights: BTreeMap<String, f64> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        let total: f64 = weights.values().sum();
        if total <= 0.0 {
            return Self::default();
        }
        Self { weights: weights.into_iter().map(|(k, w)| (k, w / total)).collect() }
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        let dot: f64 = self.weights.iter().map(|(k, w)| w * other.get(k)).sum();
        let na = self.weights.values().map(|w| w * w).sum::<f64>().sqrt();
        let nb = other.weights.values().map(|w| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// Term-frequency signature of `text`.
pub fn extract_topics(text: &str) -> TopicSignature {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for t in tokenize(text) {
        *counts.entry(t).or_default() += 1.0;
    }
    TopicSignature::normalized(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub signature: TopicSignature,
    pub quality: f64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveProfile {
    pub evaluator_id: String,
    pub static_tags: BTreeSet<String>,
    pub dynamic: TopicSignature,
    pub contribution_log: Vec<Contribution>,
    pub decay: f64,
}

impl AdaptiveProfile {
    pub fn new<I, S>(evaluator_id: &str, tags: I, decay: f64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            evaluator_id: evaluator_id.into(),
            static_tags: tags.into_iter().map(|t| t.into().to_lowercase()).collect(),
            dynamic: TopicSignature::default(),
            contribution_log: Vec::new(),
            decay,
        }
    }

    /// Seeds the dynamic signature from profile text (e.g. a CV summary) at full quality.
    pub fn with_background(self, text: &str, timestamp: u64) -> Self {
        update_profile(&self, text, 1.0, timestamp).expect("quality 1 is valid")
    }
}

fn fold_step(dynamic: &TopicSignature, decay: f64, c: &Contribution) -> TopicSignature {
    let mut acc: BTreeMap<String, f64> = dynamic.weights.iter().map(|(k, w)| (k.clone(), decay * w)).collect();
    for (k, w) in &c.signature.weights {
        *acc.entry(k.clone()).or_default() += c.quality * w;
    }
    TopicSignature::normalized(acc)
}

/// `dynamic <- normalize(decay * dynamic + quality * topics(text))`, logged.
pub fn update_profile(
    profile: &AdaptiveProfile,
    text: &str,
    quality: f64,
    timestamp: u64,
) -> Result<AdaptiveProfile, AssignError> {
    if !(0.0..=1.0).contains(&quality) {
        return Err(AssignError::InvalidParam(format!("quality {quality} outside [0, 1]")));
    }
    let c = Contribution { signature: extract_topics(text), quality, timestamp };
    let mut next = profile.clone();
    next.dynamic = fold_step(&profile.dynamic, profile.decay, &c);
    next.contribution_log.push(c);
    Ok(next)
}

/// Rebuilds the dynamic signature from the contribution log.
pub fn replay(profile: &AdaptiveProfile) -> TopicSignature {
    profile
        .contribution_log
        .iter()
        .fold(TopicSignature::default(), |d, c| fold_step(&d, profile.decay, c))
}

/// Agreement of one evaluator's composite with the final aggregate,
/// `1 - |own - aggregate| / (scale_max - scale_min)`.
pub fn quality_indicator(own: f64, aggregate: f64, scale_min: f64, scale_max: f64) -> f64 {
    (1.0 - (own - aggregate).abs() / (scale_max - scale_min)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub signature: TopicSignature,
    pub required_tags: BTreeSet<String>,
}

impl Item {
    pub fn from_text<I, S>(item_id: &str, text: &str, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            item_id: item_id.into(),
            signature: extract_topics(text),
            required_tags: tags.into_iter().map(|t| t.into().to_lowercase()).collect(),
        }
    }
}

pub fn tag_overlap(required: &BTreeSet<String>, offered: &BTreeSet<String>) -> f64 {
    required.intersection(offered).count() as f64 / required.len().max(1) as f64
}

/// `alpha * tag_overlap + (1 - alpha) * cosine(item, dynamic)`.
pub fn match_score(item: &Item, profile: &AdaptiveProfile, alpha: f64) -> f64 {
    let alpha = alpha.clamp(0.0, 1.0);
    let s = alpha * tag_overlap(&item.required_tags, &profile.static_tags)
        + (1.0 - alpha) * item.signature.cosine(&profile.dynamic);
    s.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignParams {
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    pub m_bounds: (usize, usize),
}

impl Default for AssignParams {
    fn default() -> Self {
        Self { m: DEFAULT_M, alpha: DEFAULT_ALPHA, seed: 0, m_bounds: DEFAULT_M_BOUNDS }
    }
}

impl AssignParams {
    pub fn effective_m(&self) -> usize {
        let (lo, hi) = self.m_bounds;
        self.m.clamp(lo.max(1), hi.max(lo.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvaluator {
    pub evaluator_id: String,
    pub score: f64,
    pub outstanding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub item_id: String,
    pub ranked: Vec<RankedEvaluator>,
    pub chosen: Vec<String>,
    pub m: usize,
}

/// Top-`m` evaluators by match score. Ties go to fewer outstanding
/// assignments, then to a seeded hash of the evaluator id.
pub fn assign(
    item: &Item,
    profiles: &[AdaptiveProfile],
    outstanding: &BTreeMap<String, usize>,
    params: &AssignParams,
) -> Result<Assignment, AssignError> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(AssignError::InvalidParam(format!("alpha {} outside [0, 1]", params.alpha)));
    }
    let m = params.effective_m();
    let mut seen = BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.evaluator_id.as_str()) {
            return Err(AssignError::DuplicateEvaluator(p.evaluator_id.clone()));
        }
    }
    if profiles.len() < m {
        return Err(AssignError::Shortfall { needed: m, available: profiles.len() });
    }
    let draw = |id: &str| seed::mix(params.seed ^ seed::fnv1a(id.as_bytes()));
    let mut ranked: Vec<(RankedEvaluator, u64)> = profiles
        .iter()
        .map(|p| {
            let r = RankedEvaluator {
                evaluator_id: p.evaluator_id.clone(),
                score: match_score(item, p, params.alpha),
                outstanding: outstanding.get(&p.evaluator_id).copied().unwrap_or(0),
            };
            let d = draw(&p.evaluator_id);
            (r, d)
        })
        .collect();
    ranked.sort_by(|(a, da), (b, db)| {
        b.score
            .total_cmp(&a.score)
            .then(a.outstanding.cmp(&b.outstanding))
            .then(da.cmp(db))
            .then(a.evaluator_id.cmp(&b.evaluator_id))
    });
    let ranked: Vec<RankedEvaluator> = ranked.into_iter().map(|(r, _)| r).collect();
    let chosen = ranked.iter().take(m).map(|r| r.evaluator_id.clone()).collect();
    Ok(Assignment { item_id: item.item_id.clone(), ranked, chosen, m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(pairs: &[(&str, f64)]) -> TopicSignature {
        TopicSignature::normalized(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn topic_examples() {
        assert!(extract_topics("").is_empty());
        let s = extract_topics("IoT energy platform for IoT devices");
        assert_eq!(s.weights.len(), 4);
        // five content tokens: iot x2, energy, platform, devices
        assert_eq!(s.get("iot"), 2.0 / 5.0);
        assert_eq!(s.get("energy"), 1.0 / 5.0);
        assert_eq!(s.get("platform"), 1.0 / 5.0);
        assert_eq!(s.get("devices"), 1.0 / 5.0);
        assert_eq!(s.get("for"), 0.0);
        assert_eq!(extract_topics("Smart grid, smart meters!"), extract_topics("Smart grid, smart meters!"));
    }

    #[test]
    fn match_examples() {
        let mut p = AdaptiveProfile::new("a", ["market"], 1.0);
        p.dynamic = sig(&[("grid", 1.0), ("solar", 1.0)]);
        let item = Item { item_id: "i".into(), signature: p.dynamic.clone(), required_tags: ["market".into()].into() };
        assert!((match_score(&item, &p, 0.5) - 1.0).abs() < 1e-12);
        let disjoint = Item {
            item_id: "j".into(),
            signature: sig(&[("retail", 1.0)]),
            required_tags: ["finance".into()].into(),
        };
        assert_eq!(match_score(&disjoint, &p, 0.5), 0.0);
        let orth = Item { required_tags: ["market".into()].into(), ..disjoint };
        assert_eq!(match_score(&orth, &p, 0.5), 0.5);
    }

    #[test]
    fn tag_assignment_and_shortfall() {
        let a = AdaptiveProfile::new("A", ["market"], DEFAULT_DECAY);
        let b = AdaptiveProfile::new("B", ["finance"], DEFAULT_DECAY);
        let item = Item::from_text("v", "", ["market"]);
        let params = AssignParams { m: 1, m_bounds: (1, 10), ..AssignParams::default() };
        let got = assign(&item, &[a.clone(), b.clone()], &BTreeMap::new(), &params).unwrap();
        assert_eq!(got.chosen, vec!["A".to_string()]);
        let err = assign(&item, &[a, b], &BTreeMap::new(), &AssignParams::default()).unwrap_err();
        assert_eq!(err, AssignError::Shortfall { needed: 7, available: 2 });
        assert!(err.to_string().contains("short by 5"));
    }

    #[test]
    fn identical_profiles_tie_break_by_seed_and_load() {
        let profiles: Vec<AdaptiveProfile> =
            (0..8).map(|i| AdaptiveProfile::new(&format!("e{i}"), ["market"], 0.9)).collect();
        let item = Item::from_text("v", "solar grid", ["market"]);
        let p = AssignParams { m: 5, seed: 11, ..AssignParams::default() };
        let x = assign(&item, &profiles, &BTreeMap::new(), &p).unwrap();
        let y = assign(&item, &profiles, &BTreeMap::new(), &p).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.chosen.len(), 5);
        let busy: BTreeMap<String, usize> = x.chosen.iter().map(|id| (id.clone(), 3)).collect();
        let z = assign(&item, &profiles, &busy, &p).unwrap();
        let fresh: BTreeSet<&String> = z.chosen.iter().take(3).collect();
        assert!(fresh.iter().all(|id| !busy.contains_key(*id)));
    }

    #[test]
    fn m_is_clamped() {
        assert_eq!(AssignParams { m: 2, ..AssignParams::default() }.effective_m(), 5);
        assert_eq!(AssignParams { m: 40, ..AssignParams::default() }.effective_m(), 10);
        assert_eq!(AssignParams::default().effective_m(), 7);
    }

    #[test]
    fn profile_updates() {
        let p = AdaptiveProfile::new("a", ["technology"], 1.0);
        let first = update_profile(&p, "solar battery storage", 1.0, 1).unwrap();
        assert_eq!(first.dynamic, extract_topics("solar battery storage"));
        let unchanged = update_profile(&first, "retail fashion", 0.0, 2).unwrap();
        assert_eq!(unchanged.dynamic, first.dynamic);
        let both = update_profile(&first, "retail fashion apparel", 1.0, 3).unwrap();
        let mass = |terms: &[&str]| terms.iter().map(|t| both.dynamic.get(t)).sum::<f64>();
        assert!((mass(&["solar", "battery", "storage"]) - 0.5).abs() < 1e-12);
        assert!((mass(&["retail", "fashion", "apparel"]) - 0.5).abs() < 1e-12);
        assert_eq!(replay(&both), both.dynamic);
        assert!(update_profile(&p, "x", 1.5, 0).is_err());
    }

    #[test]
    fn quality_indicator_bounds() {
        assert_eq!(quality_indicator(7.0, 7.0, 1.0, 10.0), 1.0);
        assert_eq!(quality_indicator(1.0, 10.0, 1.0, 10.0), 0.0);
        assert_eq!(quality_indicator(4.0, 7.0, 1.0, 7.0), 0.5);
    }
}
