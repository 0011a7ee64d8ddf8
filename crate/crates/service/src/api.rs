//! HTTP routes. Handlers check the caller's role, run one state transition
//! or read, and shape the response; the math lives in the engine.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bmguide_core::fuse::{self, CompareReport, CrowdLane};
use bmguide_core::judge::{CriterionScores, RatingSchema, RatingSheet};
use bmguide_core::learn::{LabeledDataset, ModelDocument};
use bmguide_core::pipeline::{self, HoldoutScore, TrainingParams};
use bmguide_core::schema::{self, BusinessModel, Taxonomy};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auth::{Caller, Role, ANY, OWNERS};
use crate::error::{ApiError, Body};
use crate::guidance::{self, ActiveModels, GuidanceReport};
use crate::state::{
    self as st, NewLabel, NewMentor, NewRound, NewVenture, RatingBody, RegistryEntry, RoundStatus, SnapshotRef,
    TrainingManifest, ValidationRound, Venture, CROWD_LANE,
};
use crate::App;

pub const OPENAPI_JSON: &str = include_str!("../openapi.json");

/// Every route as `(method, path)`; the interface description lists the same set.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/health"),
    ("get", "/openapi.json"),
    ("get", "/taxonomy"),
    ("get", "/schemas"),
    ("get", "/ventures"),
    ("post", "/ventures"),
    ("get", "/ventures/{id}"),
    ("put", "/ventures/{id}/model"),
    ("get", "/ventures/{id}/models/{version}"),
    ("post", "/ventures/{id}/rounds"),
    ("get", "/ventures/{id}/guidance"),
    ("get", "/mentors"),
    ("post", "/mentors"),
    ("get", "/assignments"),
    ("get", "/assignments/{id}"),
    ("post", "/assignments/{id}/rating"),
    ("get", "/rounds/{id}"),
    ("post", "/rounds/{id}/close"),
    ("post", "/admin/labels"),
    ("post", "/admin/import"),
    ("post", "/admin/retrain"),
    ("get", "/admin/models"),
    ("get", "/admin/repository"),
];

type AppState = State<Arc<App>>;

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/openapi.json", get(openapi))
        .route("/taxonomy", get(taxonomy))
        .route("/schemas", get(schemas))
        .route("/ventures", get(list_ventures).post(create_venture))
        .route("/ventures/{id}", get(get_venture))
        .route("/ventures/{id}/model", axum::routing::put(put_model))
        .route("/ventures/{id}/models/{version}", get(get_model_version))
        .route("/ventures/{id}/rounds", post(open_round))
        .route("/ventures/{id}/guidance", get(get_guidance))
        .route("/mentors", get(list_mentors).post(register_mentor))
        .route("/assignments", get(list_assignments))
        .route("/assignments/{id}", get(get_assignment))
        .route("/assignments/{id}/rating", post(submit_rating))
        .route("/rounds/{id}", get(get_round))
        .route("/rounds/{id}/close", post(close_round))
        .route("/admin/labels", post(add_label))
        .route("/admin/import", post(import))
        .route("/admin/retrain", post(retrain))
        .route("/admin/models", get(list_models))
        .route("/admin/repository", get(repository))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(app)
}

fn created<T: Serialize>(body: T) -> Response {
    (StatusCode::CREATED, Json(body)).into_response()
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

async fn openapi() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI_JSON).into_response()
}

async fn taxonomy(State(app): AppState) -> Json<Taxonomy> {
    Json(app.taxonomy.clone())
}

async fn schemas(State(app): AppState) -> Json<Value> {
    Json(json!({ "default": app.config.default_schema, "schemas": RatingSchema::bundled() }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round_id: String,
    pub model_version: u32,
    pub status: RoundStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionSummary {
    pub version: u32,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureView {
    pub venture_id: String,
    pub tags: Vec<String>,
    pub version: u32,
    pub model: BusinessModel,
    pub versions: Vec<VersionSummary>,
    pub rounds: Vec<RoundSummary>,
}

fn venture_view(s: &st::State, v: &Venture) -> VentureView {
    VentureView {
        venture_id: v.venture_id.clone(),
        tags: v.tags.iter().cloned().collect(),
        version: v.latest().version,
        model: v.latest().model.clone(),
        versions: v.versions.iter().map(|m| VersionSummary { version: m.version, created_at: m.created_at }).collect(),
        rounds: s
            .rounds_of(&v.venture_id)
            .into_iter()
            .map(|r| RoundSummary { round_id: r.round_id.clone(), model_version: r.model_version, status: r.status })
            .collect(),
    }
}

async fn list_ventures(State(app): AppState, caller: Caller) -> Result<Json<Value>, ApiError> {
    caller.require(ANY)?;
    let s = app.store.read();
    let list: Vec<Value> = s
        .ventures
        .values()
        .map(|v| json!({ "venture_id": v.venture_id, "version": v.latest().version }))
        .collect();
    Ok(Json(json!({ "ventures": list })))
}

async fn create_venture(State(app): AppState, caller: Caller, Body(req): Body<NewVenture>) -> Result<Response, ApiError> {
    caller.require(OWNERS)?;
    let now = app.now();
    let view = app.store.commit(|s| {
        let id = s.create_venture(&app.taxonomy, req, now)?.venture_id.clone();
        Ok(venture_view(s, &s.ventures[&id]))
    })?;
    Ok(created(view))
}

async fn get_venture(State(app): AppState, caller: Caller, Path(id): Path<String>) -> Result<Json<VentureView>, ApiError> {
    caller.require(ANY)?;
    let s = app.store.read();
    Ok(Json(venture_view(&s, s.venture(&id)?)))
}

async fn put_model(
    State(app): AppState,
    caller: Caller,
    Path(id): Path<String>,
    Body(model): Body<BusinessModel>,
) -> Result<Response, ApiError> {
    caller.require(OWNERS)?;
    let now = app.now();
    let version = app.store.commit(|s| s.put_model(&app.taxonomy, &id, model, now))?;
    Ok(created(json!({ "venture_id": id, "version": version })))
}

async fn get_model_version(
    State(app): AppState,
    caller: Caller,
    Path((id, version)): Path<(String, u32)>,
) -> Result<Json<st::ModelVersion>, ApiError> {
    caller.require(ANY)?;
    let s = app.store.read();
    let v = s.venture(&id)?;
    v.version(version)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("venture `{id}` has no version {version}")))
}

async fn open_round(
    State(app): AppState,
    caller: Caller,
    Path(id): Path<String>,
    raw: axum::body::Bytes,
) -> Result<Response, ApiError> {
    caller.require(OWNERS)?;
    // The body is optional: an empty one takes the configured defaults.
    let req: NewRound = if raw.iter().all(u8::is_ascii_whitespace) {
        NewRound::default()
    } else {
        serde_json::from_slice(&raw).map_err(|e| ApiError::invalid(e.to_string()))?
    };
    app.close_expired()?;
    let now = app.now();
    let round = app.store.commit(|s| s.open_round(&id, req, &app.config, now).cloned())?;
    Ok(created(round))
}

async fn get_guidance(
    State(app): AppState,
    caller: Caller,
    Path(id): Path<String>,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Json<GuidanceReport>, ApiError> {
    caller.require(OWNERS)?;
    let s = app.store.read();
    let active = app.active();
    let report =
        guidance::build(&s, &app.taxonomy, &id, q.get("round").map(String::as_str), active.as_deref(), app.config.scheme)?;
    Ok(Json(report))
}

async fn list_mentors(State(app): AppState, caller: Caller) -> Result<Json<Value>, ApiError> {
    caller.require(&[Role::Admin])?;
    let s = app.store.read();
    Ok(Json(json!({ "mentors": s.mentors.values().collect::<Vec<_>>() })))
}

async fn register_mentor(State(app): AppState, caller: Caller, Body(req): Body<NewMentor>) -> Result<Response, ApiError> {
    caller.require(&[Role::Admin])?;
    let now = app.now();
    let mentor = app.store.commit(|s| s.register_mentor(req, now).cloned())?;
    Ok(created(mentor))
}

/// What a mentor sees of one task: the model to judge and their own sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentView {
    pub assignment_id: String,
    pub round_id: String,
    pub venture_id: String,
    pub status: RoundStatus,
    pub schema: RatingSchema,
    pub model_version: u32,
    pub model: BusinessModel,
    pub own_sheet: Option<RatingSheet>,
}

fn assignment_view(s: &st::State, assignment_id: &str, round: &ValidationRound, evaluator: &str) -> Result<AssignmentView, ApiError> {
    let model = s
        .venture(&round.venture_id)?
        .version(round.model_version)
        .ok_or_else(|| ApiError::internal("round snapshot missing"))?
        .model
        .clone();
    Ok(AssignmentView {
        assignment_id: assignment_id.to_string(),
        round_id: round.round_id.clone(),
        venture_id: round.venture_id.clone(),
        status: round.status,
        schema: RatingSchema::by_name(&round.schema).map_err(|e| ApiError::internal(e.to_string()))?,
        model_version: round.model_version,
        model,
        own_sheet: round.sheets.get(evaluator).cloned(),
    })
}

async fn list_assignments(State(app): AppState, caller: Caller) -> Result<Json<Value>, ApiError> {
    let me = caller.mentor()?;
    let s = app.store.read();
    let mut out = Vec::new();
    for (id, a) in s.assignments.iter().filter(|(_, a)| a.evaluator_id == me) {
        out.push(assignment_view(&s, id, s.round(&a.round_id)?, me)?);
    }
    Ok(Json(json!({ "assignments": out })))
}

async fn get_assignment(State(app): AppState, caller: Caller, Path(id): Path<String>) -> Result<Json<AssignmentView>, ApiError> {
    let me = caller.mentor()?;
    let s = app.store.read();
    let (a, round) = s.assignment(&id)?;
    if a.evaluator_id != me {
        return Err(ApiError::forbidden(format!("assignment `{id}` belongs to another mentor")));
    }
    Ok(Json(assignment_view(&s, &id, round, me)?))
}

async fn submit_rating(
    State(app): AppState,
    caller: Caller,
    Path(id): Path<String>,
    Body(body): Body<RatingBody>,
) -> Result<Response, ApiError> {
    let me = caller.mentor()?.to_string();
    app.close_expired()?;
    let sheet = app.store.commit(|s| s.submit_rating(&app.taxonomy, &id, &me, body))?;
    Ok(created(sheet))
}

/// A mentor's view of a closed round: the aggregate and their own sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentorRoundView {
    pub round_id: String,
    pub venture_id: String,
    pub status: RoundStatus,
    pub aggregate: Option<CriterionScores>,
    pub own_sheet: Option<RatingSheet>,
}

async fn get_round(State(app): AppState, caller: Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    caller.require(ANY)?;
    let s = app.store.read();
    let round = s.round(&id)?;
    if let Some(me) = caller.evaluator_id.as_deref() {
        if round.task_for(me).is_none() {
            return Err(ApiError::forbidden(format!("`{me}` is not assigned to round `{id}`")));
        }
        if round.status == RoundStatus::Open {
            return Err(ApiError::forbidden("round results are hidden from mentors until it closes"));
        }
        let view = MentorRoundView {
            round_id: round.round_id.clone(),
            venture_id: round.venture_id.clone(),
            status: round.status,
            aggregate: round.aggregate.clone(),
            own_sheet: round.sheets.get(me).cloned(),
        };
        return Ok(Json(view).into_response());
    }
    Ok(Json(round.clone()).into_response())
}

async fn close_round(State(app): AppState, caller: Caller, Path(id): Path<String>) -> Result<Json<ValidationRound>, ApiError> {
    caller.require(OWNERS)?;
    let round = app.close_round(&id)?;
    Ok(Json(round))
}

async fn add_label(State(app): AppState, caller: Caller, Body(req): Body<NewLabel>) -> Result<Response, ApiError> {
    caller.require(&[Role::Admin])?;
    let now = app.now();
    let r = app.store.commit(|s| s.add_label(&req, now))?;
    Ok(created(json!({ "venture_id": r.venture_id, "version": r.version, "series_a": req.series_a })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportBody {
    pub models: Vec<BusinessModel>,
}

async fn import(State(app): AppState, caller: Caller, Body(req): Body<ImportBody>) -> Result<Response, ApiError> {
    caller.require(&[Role::Admin])?;
    let now = app.now();
    let refs = app.store.commit(|s| s.import(&app.taxonomy, req.models, now))?;
    Ok(created(json!({ "imported": refs })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrainRequest {
    pub seed: u64,
    pub n_trees: Option<usize>,
    pub folds: Option<usize>,
    pub holdout_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainResponse {
    pub registry_version: u32,
    pub model_hashes: BTreeMap<String, String>,
    pub manifest: TrainingManifest,
    pub holdout: Vec<HoldoutScore>,
    pub report: CompareReport,
}

/// Rebuilds the training dataset a manifest describes.
pub fn dataset_for(s: &st::State, t: &Taxonomy, rows: &[SnapshotRef], labels: Vec<u8>) -> Result<LabeledDataset, ApiError> {
    let mut encoded = Vec::with_capacity(rows.len());
    for r in rows {
        let model = s
            .snapshot_model(r)
            .ok_or_else(|| ApiError::internal(format!("snapshot {}@{} missing", r.venture_id, r.version)))?;
        encoded.push(schema::encode_one_hot(t, model).map_err(|e| ApiError::internal(e.to_string()))?);
    }
    LabeledDataset::from_feature_rows(t, &encoded, labels).map_err(|e| ApiError::internal(e.to_string()))
}

async fn retrain(State(app): AppState, caller: Caller, Body(req): Body<RetrainRequest>) -> Result<Response, ApiError> {
    caller.require(&[Role::Admin])?;
    let _one_at_a_time = app.retrain_lock.lock().await;
    let cfg = &app.config;
    let params = TrainingParams {
        seed: req.seed,
        n_trees: req.n_trees.unwrap_or(cfg.n_trees),
        folds: req.folds.unwrap_or(cfg.cv_folds),
        holdout_fraction: req.holdout_fraction.unwrap_or(0.2),
        threshold: cfg.threshold,
    };
    if params.n_trees == 0 || params.folds < 2 || !(0.0 < params.holdout_fraction && params.holdout_fraction <= 0.5) {
        return Err(ApiError::invalid("need n_trees >= 1, folds >= 2 and holdout_fraction in (0, 0.5]"));
    }
    let s = app.store.read();
    let labeled = s.labeled_snapshots();
    if labeled.len() < cfg.retrain_min {
        return Err(ApiError::conflict(format!(
            "{} labeled snapshots, retraining needs at least {}",
            labeled.len(),
            cfg.retrain_min
        )));
    }
    let rows: Vec<SnapshotRef> = labeled.iter().map(|(r, _)| r.clone()).collect();
    let labels: Vec<u8> = labeled.iter().map(|(_, l)| u8::from(*l)).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(ApiError::conflict("labeled snapshots are all one class"));
    }
    let ds = dataset_for(&s, &app.taxonomy, &rows, labels.clone())?;
    let crowd: Vec<Option<f64>> = rows.iter().map(|r| s.crowd_probability_for(r)).collect();
    let lanes = if crowd.iter().all(Option::is_some) {
        vec![CrowdLane { name: CROWD_LANE.into(), probs: crowd }]
    } else {
        Vec::new()
    };
    let crowd_lane = !lanes.is_empty();
    drop(s);

    let outcome = tokio::task::spawn_blocking(move || pipeline::train_models(&ds, &lanes, &params))
        .await
        .map_err(|e| ApiError::internal(format!("training task failed: {e}")))?
        .map_err(|e| ApiError::conflict(format!("training failed: {e}")))?;

    let version = app.store.read().next_registry_version();
    let feature_names = app.taxonomy.feature_names();
    let mut model_hashes = BTreeMap::new();
    let mut model_files = BTreeMap::new();
    for (name, model) in &outcome.models {
        let doc = ModelDocument::new(model.clone(), feature_names.clone());
        let file = format!("v{version:04}-{name}.json");
        app.store.write_model(&file, &doc.to_json())?;
        model_hashes.insert(name.clone(), doc.hash());
        model_files.insert(name.clone(), file);
    }
    let manifest = TrainingManifest {
        dataset_hash: outcome.dataset_hash.clone(),
        params,
        rows,
        labels,
        crowd_lane,
        taxonomy: format!("{}@{}", app.taxonomy.name(), app.taxonomy.version()),
    };
    let entry = RegistryEntry {
        version,
        created_at: app.now(),
        manifest: manifest.clone(),
        model_hashes: model_hashes.clone(),
        model_files,
        performance: outcome.performance.clone(),
        holdout: outcome.holdout.clone(),
    };
    let report = fuse::compare_report(&outcome.performance).map_err(|e| ApiError::internal(e.to_string()))?;
    let now = app.now();
    app.store.commit(|s| {
        s.push_registry(entry, now);
        Ok(())
    })?;
    app.set_active(ActiveModels {
        registry_version: version,
        feature_names,
        models: outcome.models,
        performance: outcome.performance,
    });
    tracing::info!(version, "registry entry trained");
    Ok(created(RetrainResponse { registry_version: version, model_hashes, manifest, holdout: outcome.holdout, report }))
}

async fn list_models(State(app): AppState, caller: Caller) -> Result<Json<Value>, ApiError> {
    caller.require(&[Role::Admin])?;
    let s = app.store.read();
    Ok(Json(json!({
        "active": app.active().map(|a| a.registry_version),
        "registry": s.registry,
    })))
}

async fn repository(
    State(app): AppState,
    caller: Caller,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    caller.require(&[Role::Admin])?;
    let since: u64 = match q.get("since") {
        Some(v) => v.parse().map_err(|_| ApiError::bad_request(format!("bad `since` value `{v}`")))?,
        None => 0,
    };
    let s = app.store.read();
    let entries: Vec<_> = s.log.iter().filter(|e| e.seq > since).collect();
    Ok(Json(json!({ "entries": entries })))
}
