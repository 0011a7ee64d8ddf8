//! Persistent domain state and its transitions. Every mutation goes through
//! [`crate::store::Store::commit`], so these methods never touch the disk.

use std::collections::{BTreeMap, BTreeSet};

use bmguide_core::assign::{self, AdaptiveProfile, AssignError, AssignParams, Assignment, Item, DEFAULT_DECAY};
use bmguide_core::fuse::PerformanceTable;
use bmguide_core::judge::{self, CriterionScores, CrowdKind, RatingSchema, RatingSheet};
use bmguide_core::pipeline::{HoldoutScore, TrainingParams};
use bmguide_core::schema::{self, BusinessModel, Taxonomy};
use bmguide_core::seed;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ServiceConfig;
use crate::error::ApiError;

pub const STATE_FORMAT_VERSION: u32 = 1;

/// Name of the crowd part in hybrid weights and performance tables.
pub const CROWD_LANE: &str = "crowd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: u32,
    pub model: BusinessModel,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Venture {
    pub venture_id: String,
    pub tags: BTreeSet<String>,
    pub versions: Vec<ModelVersion>,
    pub created_at: u64,
}

impl Venture {
    pub fn latest(&self) -> &ModelVersion {
        self.versions.last().expect("ventures are created with a model")
    }

    pub fn version(&self, v: u32) -> Option<&ModelVersion> {
        self.versions.iter().find(|m| m.version == v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mentor {
    pub evaluator_id: String,
    pub crowd_kind: CrowdKind,
    pub profile: AdaptiveProfile,
    pub created_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub assignment_id: String,
    pub evaluator_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRound {
    pub round_id: String,
    pub venture_id: String,
    pub model_version: u32,
    pub schema: String,
    pub assignment: Assignment,
    pub tasks: Vec<Task>,
    /// Keyed by evaluator; a re-submission replaces the earlier sheet.
    pub sheets: BTreeMap<String, RatingSheet>,
    pub status: RoundStatus,
    pub created_at: u64,
    pub closed_at: Option<u64>,
    pub aggregate: Option<CriterionScores>,
}

impl ValidationRound {
    pub fn task_for(&self, evaluator_id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.evaluator_id == evaluator_id)
    }

    pub fn sheet_list(&self) -> Vec<RatingSheet> {
        self.sheets.values().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRef {
    pub round_id: String,
    pub evaluator_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub venture_id: String,
    pub version: u32,
}

/// Everything needed to rebuild a registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub dataset_hash: String,
    pub params: TrainingParams,
    pub rows: Vec<SnapshotRef>,
    pub labels: Vec<u8>,
    pub crowd_lane: bool,
    pub taxonomy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub version: u32,
    pub created_at: u64,
    pub manifest: TrainingManifest,
    pub model_hashes: BTreeMap<String, String>,
    /// Model document file names under the data directory's `models/`.
    pub model_files: BTreeMap<String, String>,
    pub performance: PerformanceTable,
    pub holdout: Vec<HoldoutScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Snapshot {
        venture_id: String,
        version: u32,
        model: BusinessModel,
    },
    RoundClosed {
        round_id: String,
        venture_id: String,
        version: u32,
        aggregate: CriterionScores,
        crowd_probability: f64,
        machine: BTreeMap<String, f64>,
        registry_version: Option<u32>,
    },
    Label {
        venture_id: String,
        version: u32,
        series_a: bool,
    },
    Training {
        registry_version: u32,
        manifest: TrainingManifest,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub venture: u64,
    pub round: u64,
    pub assignment: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub format_version: u32,
    pub ventures: BTreeMap<String, Venture>,
    pub mentors: BTreeMap<String, Mentor>,
    pub rounds: BTreeMap<String, ValidationRound>,
    pub assignments: BTreeMap<String, AssignmentRef>,
    /// Append-only knowledge repository.
    pub log: Vec<LogEntry>,
    pub registry: Vec<RegistryEntry>,
    pub counters: Counters,
}

impl Default for State {
    fn default() -> Self {
        Self {
            format_version: STATE_FORMAT_VERSION,
            ventures: BTreeMap::new(),
            mentors: BTreeMap::new(),
            rounds: BTreeMap::new(),
            assignments: BTreeMap::new(),
            log: Vec::new(),
            registry: Vec::new(),
            counters: Counters::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewVenture {
    pub model: BusinessModel,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewMentor {
    pub evaluator_id: String,
    #[serde(default)]
    pub tags: Vec<String>,
    /// Seeds the topic profile, e.g. a short CV.
    #[serde(default)]
    pub background: String,
    #[serde(default)]
    pub crowd_kind: CrowdKind,
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewRound {
    pub schema: Option<String>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingBody {
    pub scores: BTreeMap<String, i32>,
    #[serde(default)]
    pub qualitative: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewLabel {
    pub venture_id: String,
    /// Latest version when omitted.
    pub version: Option<u32>,
    pub series_a: bool,
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn check_id(kind: &str, id: &str) -> Result<(), ApiError> {
    if valid_id(id) {
        Ok(())
    } else {
        Err(ApiError::invalid(format!("{kind} id `{id}` must be 1-64 characters of [A-Za-z0-9_-]")))
    }
}

/// Keys a qualitative comment may be filed under: any layer, sub-layer or
/// dimension name, or `general`.
pub fn feedback_targets(t: &Taxonomy) -> BTreeSet<String> {
    let mut out = BTreeSet::from(["general".to_string()]);
    for layer in t.layers() {
        out.insert(layer.name.to_string());
        for sub in &layer.sub_layers {
            out.insert(sub.name.clone());
            out.extend(sub.dimensions.iter().map(|d| d.name.clone()));
        }
    }
    out
}

/// Text an evaluator's expertise is matched against: free text plus the
/// chosen characteristics.
pub fn item_text(model: &BusinessModel) -> String {
    let mut parts = vec![model.description()];
    parts.extend(model.choices.values().flatten().cloned());
    parts.join(" ")
}

fn validate_against(t: &Taxonomy, model: &BusinessModel) -> Result<(), ApiError> {
    let report = schema::validate_model(t, model);
    if report.is_valid() {
        return Ok(());
    }
    let dims: Vec<&str> = report.findings.iter().map(|f| f.dimension.as_str()).collect();
    Err(ApiError::invalid(format!("model fails taxonomy validation in {}", dims.join(", ")))
        .with_details(json!({ "findings": report.findings })))
}

impl State {
    fn append(&mut self, at: u64, event: Event) {
        let seq = self.log.len() as u64 + 1;
        self.log.push(LogEntry { seq, at, event });
    }

    pub fn venture(&self, id: &str) -> Result<&Venture, ApiError> {
        self.ventures.get(id).ok_or_else(|| ApiError::not_found(format!("unknown venture `{id}`")))
    }

    pub fn round(&self, id: &str) -> Result<&ValidationRound, ApiError> {
        self.rounds.get(id).ok_or_else(|| ApiError::not_found(format!("unknown round `{id}`")))
    }

    pub fn open_round_of(&self, venture_id: &str) -> Option<&ValidationRound> {
        self.rounds.values().find(|r| r.venture_id == venture_id && r.status == RoundStatus::Open)
    }

    /// Rounds of one venture in creation order.
    pub fn rounds_of(&self, venture_id: &str) -> Vec<&ValidationRound> {
        let mut v: Vec<&ValidationRound> = self.rounds.values().filter(|r| r.venture_id == venture_id).collect();
        v.sort_by_key(|r| (r.created_at, r.round_id.clone()));
        v
    }

    pub fn create_venture(&mut self, t: &Taxonomy, req: NewVenture, now: u64) -> Result<&Venture, ApiError> {
        let mut model = req.model;
        if model.venture_id.is_empty() {
            loop {
                self.counters.venture += 1;
                let id = format!("v{:04}", self.counters.venture);
                if !self.ventures.contains_key(&id) {
                    model.venture_id = id;
                    break;
                }
            }
        }
        check_id("venture", &model.venture_id)?;
        if self.ventures.contains_key(&model.venture_id) {
            return Err(ApiError::conflict(format!("venture `{}` already exists", model.venture_id)));
        }
        validate_against(t, &model)?;
        let id = model.venture_id.clone();
        let tags = req.tags.iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        self.append(now, Event::Snapshot { venture_id: id.clone(), version: 1, model: model.clone() });
        self.ventures.insert(
            id.clone(),
            Venture { venture_id: id.clone(), tags, versions: vec![ModelVersion { version: 1, model, created_at: now }], created_at: now },
        );
        Ok(&self.ventures[&id])
    }

    pub fn put_model(&mut self, t: &Taxonomy, id: &str, mut model: BusinessModel, now: u64) -> Result<u32, ApiError> {
        self.venture(id)?;
        if model.venture_id.is_empty() {
            model.venture_id = id.to_string();
        } else if model.venture_id != id {
            return Err(ApiError::invalid(format!("body venture_id `{}` does not match `{id}`", model.venture_id)));
        }
        validate_against(t, &model)?;
        let v = self.ventures.get_mut(id).expect("checked");
        let version = v.latest().version + 1;
        v.versions.push(ModelVersion { version, model: model.clone(), created_at: now });
        self.append(now, Event::Snapshot { venture_id: id.to_string(), version, model });
        Ok(version)
    }

    pub fn register_mentor(&mut self, req: NewMentor, now: u64) -> Result<&Mentor, ApiError> {
        check_id("evaluator", &req.evaluator_id)?;
        if self.mentors.contains_key(&req.evaluator_id) {
            return Err(ApiError::conflict(format!("mentor `{}` already registered", req.evaluator_id)));
        }
        let decay = req.decay.unwrap_or(DEFAULT_DECAY);
        if !(0.0..=1.0).contains(&decay) {
            return Err(ApiError::invalid(format!("decay {decay} outside [0, 1]")));
        }
        let mut profile = AdaptiveProfile::new(&req.evaluator_id, req.tags, decay);
        if !req.background.trim().is_empty() {
            profile = profile.with_background(&req.background, now);
        }
        let id = req.evaluator_id.clone();
        self.mentors.insert(id.clone(), Mentor { evaluator_id: id.clone(), crowd_kind: req.crowd_kind, profile, created_at: now });
        Ok(&self.mentors[&id])
    }

    fn outstanding(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in self.rounds.values().filter(|r| r.status == RoundStatus::Open) {
            for t in &r.tasks {
                if !r.sheets.contains_key(&t.evaluator_id) {
                    *out.entry(t.evaluator_id.clone()).or_default() += 1;
                }
            }
        }
        out
    }

    pub fn open_round(
        &mut self,
        venture_id: &str,
        req: NewRound,
        cfg: &ServiceConfig,
        now: u64,
    ) -> Result<&ValidationRound, ApiError> {
        let venture = self.venture(venture_id)?;
        if let Some(open) = self.open_round_of(venture_id) {
            return Err(ApiError::conflict(format!("round `{}` is still open for `{venture_id}`", open.round_id)));
        }
        let schema_name = req.schema.unwrap_or_else(|| cfg.default_schema.clone());
        RatingSchema::by_name(&schema_name).map_err(|e| ApiError::invalid(e.to_string()))?;
        let snapshot = venture.latest();
        let round_no = self.counters.round + 1;
        let round_id = format!("r{round_no:04}");
        let item = Item::from_text(&round_id, &item_text(&snapshot.model), venture.tags.iter().cloned());
        let profiles: Vec<AdaptiveProfile> = self.mentors.values().map(|m| m.profile.clone()).collect();
        let params = AssignParams {
            m: req.m.unwrap_or(cfg.m),
            alpha: cfg.alpha,
            seed: seed::derive(cfg.assign_seed, round_no),
            m_bounds: cfg.m_bounds,
        };
        let assignment = assign::assign(&item, &profiles, &self.outstanding(), &params).map_err(|e| match e {
            AssignError::Shortfall { .. } => ApiError::conflict(e.to_string()),
            other => ApiError::invalid(other.to_string()),
        })?;
        let model_version = snapshot.version;
        self.counters.round = round_no;
        let mut tasks = Vec::new();
        for evaluator_id in &assignment.chosen {
            self.counters.assignment += 1;
            let assignment_id = format!("a{:04}", self.counters.assignment);
            self.assignments.insert(
                assignment_id.clone(),
                AssignmentRef { round_id: round_id.clone(), evaluator_id: evaluator_id.clone() },
            );
            tasks.push(Task { assignment_id, evaluator_id: evaluator_id.clone() });
        }
        let round = ValidationRound {
            round_id: round_id.clone(),
            venture_id: venture_id.to_string(),
            model_version,
            schema: schema_name,
            assignment,
            tasks,
            sheets: BTreeMap::new(),
            status: RoundStatus::Open,
            created_at: now,
            closed_at: None,
            aggregate: None,
        };
        self.rounds.insert(round_id.clone(), round);
        Ok(&self.rounds[&round_id])
    }

    pub fn assignment(&self, assignment_id: &str) -> Result<(&AssignmentRef, &ValidationRound), ApiError> {
        let a = self
            .assignments
            .get(assignment_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown assignment `{assignment_id}`")))?;
        Ok((a, self.round(&a.round_id)?))
    }

    pub fn submit_rating(
        &mut self,
        t: &Taxonomy,
        assignment_id: &str,
        evaluator_id: &str,
        body: RatingBody,
    ) -> Result<RatingSheet, ApiError> {
        let (a, round) = self.assignment(assignment_id)?;
        if a.evaluator_id != evaluator_id {
            return Err(ApiError::forbidden(format!("assignment `{assignment_id}` belongs to another mentor")));
        }
        if round.status == RoundStatus::Closed {
            return Err(ApiError::conflict(format!("round `{}` is closed", round.round_id)));
        }
        let targets = feedback_targets(t);
        if let Some(bad) = body.qualitative.keys().find(|k| !targets.contains(*k)) {
            return Err(ApiError::invalid(format!("qualitative key `{bad}` is not a layer, sub-layer or dimension")));
        }
        let schema = RatingSchema::by_name(&round.schema).map_err(|e| ApiError::internal(e.to_string()))?;
        let sheet = RatingSheet {
            evaluator_id: evaluator_id.to_string(),
            venture_id: round.venture_id.clone(),
            round_id: round.round_id.clone(),
            scores: body.scores,
            qualitative: body.qualitative,
            crowd_kind: self.mentors.get(evaluator_id).map(|m| m.crowd_kind).unwrap_or_default(),
        };
        sheet.validate(&schema).map_err(|e| ApiError::invalid(e.to_string()))?;
        let round_id = round.round_id.clone();
        self.rounds.get_mut(&round_id).expect("exists").sheets.insert(evaluator_id.to_string(), sheet.clone());
        Ok(sheet)
    }

    /// Closes a round: aggregates its sheets, folds each evaluator's
    /// agreement into their profile and logs the aggregate.
    pub fn close_round(
        &mut self,
        round_id: &str,
        machine: BTreeMap<String, f64>,
        registry_version: Option<u32>,
        now: u64,
    ) -> Result<&ValidationRound, ApiError> {
        let round = self.round(round_id)?;
        if round.status == RoundStatus::Closed {
            return Err(ApiError::conflict(format!("round `{round_id}` is already closed")));
        }
        if round.sheets.is_empty() {
            return Err(ApiError::conflict(format!("round `{round_id}` has no rating sheets")));
        }
        let schema = RatingSchema::by_name(&round.schema).map_err(|e| ApiError::internal(e.to_string()))?;
        let aggregate =
            judge::aggregate_unweighted(&schema, &round.sheet_list()).map_err(|e| ApiError::internal(e.to_string()))?;
        let crowd_probability = judge::composite_to_probability(&aggregate, &schema);
        let venture = self.venture(&round.venture_id)?;
        let text = venture.version(round.model_version).map(|m| item_text(&m.model)).unwrap_or_default();
        let (lo, hi) = (f64::from(schema.scale_min), f64::from(schema.scale_max));
        let mut updates = Vec::new();
        for sheet in round.sheets.values() {
            if let Some(mentor) = self.mentors.get(&sheet.evaluator_id) {
                let q = assign::quality_indicator(sheet.composite(&schema), aggregate.composite, lo, hi);
                let profile = assign::update_profile(&mentor.profile, &text, q, now)
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                updates.push((sheet.evaluator_id.clone(), profile));
            }
        }
        let (venture_id, version) = (round.venture_id.clone(), round.model_version);
        for (id, profile) in updates {
            self.mentors.get_mut(&id).expect("exists").profile = profile;
        }
        let r = self.rounds.get_mut(round_id).expect("exists");
        r.status = RoundStatus::Closed;
        r.closed_at = Some(now);
        r.aggregate = Some(aggregate.clone());
        self.append(
            now,
            Event::RoundClosed {
                round_id: round_id.to_string(),
                venture_id,
                version,
                aggregate,
                crowd_probability,
                machine,
                registry_version,
            },
        );
        Ok(&self.rounds[round_id])
    }

    /// Ids of open rounds created at least `timeout` seconds before `now`.
    pub fn expired_rounds(&self, timeout: u64, now: u64) -> Vec<String> {
        self.rounds
            .values()
            .filter(|r| r.status == RoundStatus::Open && now.saturating_sub(r.created_at) >= timeout)
            .map(|r| r.round_id.clone())
            .collect()
    }

    pub fn add_label(&mut self, req: &NewLabel, now: u64) -> Result<SnapshotRef, ApiError> {
        let v = self.venture(&req.venture_id)?;
        let version = req.version.unwrap_or(v.latest().version);
        if v.version(version).is_none() {
            return Err(ApiError::not_found(format!("venture `{}` has no version {version}", req.venture_id)));
        }
        self.append(now, Event::Label { venture_id: req.venture_id.clone(), version, series_a: req.series_a });
        Ok(SnapshotRef { venture_id: req.venture_id.clone(), version })
    }

    /// Stores each model as a venture (or a new version) and logs its label
    /// when present.
    pub fn import(&mut self, t: &Taxonomy, models: Vec<BusinessModel>, now: u64) -> Result<Vec<SnapshotRef>, ApiError> {
        let mut out = Vec::new();
        for model in models {
            let label = model.series_a;
            let id = model.venture_id.clone();
            let (id, version) = if self.ventures.contains_key(&id) {
                let version = self.put_model(t, &id, model, now)?;
                (id, version)
            } else {
                let v = self.create_venture(t, NewVenture { model, tags: Vec::new() }, now)?;
                (v.venture_id.clone(), v.latest().version)
            };
            if let Some(series_a) = label {
                self.append(now, Event::Label { venture_id: id.clone(), version, series_a });
            }
            out.push(SnapshotRef { venture_id: id, version });
        }
        Ok(out)
    }

    /// Per venture, the latest version carrying a label, with the last label
    /// logged for it. Ordered by venture id.
    pub fn labeled_snapshots(&self) -> Vec<(SnapshotRef, bool)> {
        let mut by_venture: BTreeMap<&str, BTreeMap<u32, bool>> = BTreeMap::new();
        for e in &self.log {
            if let Event::Label { venture_id, version, series_a } = &e.event {
                by_venture.entry(venture_id).or_default().insert(*version, *series_a);
            }
        }
        by_venture
            .into_iter()
            .filter_map(|(id, versions)| {
                let (&version, &label) = versions.iter().next_back()?;
                Some((SnapshotRef { venture_id: id.to_string(), version }, label))
            })
            .collect()
    }

    /// Crowd probability of the latest closed round judging exactly this snapshot.
    pub fn crowd_probability_for(&self, s: &SnapshotRef) -> Option<f64> {
        self.log.iter().rev().find_map(|e| match &e.event {
            Event::RoundClosed { venture_id, version, crowd_probability, .. }
                if *venture_id == s.venture_id && *version == s.version =>
            {
                Some(*crowd_probability)
            }
            _ => None,
        })
    }

    pub fn snapshot_model(&self, s: &SnapshotRef) -> Option<&BusinessModel> {
        self.ventures.get(&s.venture_id)?.version(s.version).map(|m| &m.model)
    }

    pub fn next_registry_version(&self) -> u32 {
        self.registry.last().map_or(1, |e| e.version + 1)
    }

    pub fn push_registry(&mut self, entry: RegistryEntry, now: u64) {
        self.append(now, Event::Training { registry_version: entry.version, manifest: entry.manifest.clone() });
        self.registry.push(entry);
    }
}
