//! In-process harness: requests go through the router with `oneshot`, the
//! store lives in a temp dir and the clock is a counter the test controls.

#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use bmguide_core::fuse;
use bmguide_core::schema::{BusinessModel, Taxonomy};
use bmguide_core::synth;
use bmguide_service::guidance::GuidanceReport;
use bmguide_service::{router, App, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum As<'a> {
    Nobody,
    Entrepreneur,
    Admin,
    Mentor(&'a str),
}

pub struct Harness {
    pub dir: TempDir,
    pub config: ServiceConfig,
    pub clock: Arc<AtomicU64>,
    pub app: Arc<App>,
}

fn open(config: &ServiceConfig, clock: &Arc<AtomicU64>) -> Arc<App> {
    let c = clock.clone();
    App::with_clock(config.clone(), Box::new(move || c.load(Ordering::SeqCst))).expect("app opens")
}

impl Harness {
    pub fn new() -> Self {
        Self::with(|_| {})
    }

    pub fn with(tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServiceConfig { data_dir: dir.path().to_path_buf(), ..ServiceConfig::default() };
        tweak(&mut config);
        let clock = Arc::new(AtomicU64::new(1_000));
        let app = open(&config, &clock);
        Self { dir, config, clock, app }
    }

    /// Drops the running app and opens a fresh one over the same directory.
    pub fn restart(&mut self) {
        self.app = open(&self.config, &self.clock);
    }

    pub fn tick(&self, secs: u64) {
        self.clock.fetch_add(secs, Ordering::SeqCst);
    }

    pub async fn call(&self, method: Method, path: &str, who: As<'_>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(path);
        let t = &self.config.tokens;
        req = match who {
            As::Nobody => req,
            As::Entrepreneur => req.header("authorization", format!("Bearer {}", t.entrepreneur)),
            As::Admin => req.header("authorization", format!("Bearer {}", t.admin)),
            As::Mentor(id) => {
                req.header("authorization", format!("Bearer {}", t.mentor)).header("x-evaluator-id", id)
            }
        };
        let req = match body {
            Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = router(self.app.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
        (status, value)
    }

    pub async fn get(&self, path: &str, who: As<'_>) -> (StatusCode, Value) {
        self.call(Method::GET, path, who, None).await
    }

    pub async fn post(&self, path: &str, who: As<'_>, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, who, Some(body)).await
    }

    pub async fn mentor(&self, id: &str, tags: &[&str], background: &str) {
        let (s, b) = self
            .post("/mentors", As::Admin, json!({ "evaluator_id": id, "tags": tags, "background": background }))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{b}");
    }
}

pub fn fixture_model(id: &str, seed: u64) -> BusinessModel {
    let mut m = synth::ventures(&Taxonomy::iot(), 1, seed).remove(0);
    m.venture_id = id.into();
    m.series_a = None;
    m
}

pub fn mentor10_scores(v: i32) -> Value {
    let s = bmguide_core::judge::RatingSchema::mentor10();
    Value::Object(s.criteria.iter().map(|c| (c.clone(), json!(v))).collect())
}

/// The stored hybrid must equal a recomputation from the report's own parts.
pub fn hybrid_consistent(report: &GuidanceReport) -> bool {
    let h = &report.informative.hybrid;
    match fuse::hybrid_predict(&h.parts, &h.weights) {
        Ok(p) => p.to_bits() == h.probability.to_bits(),
        Err(_) => false,
    }
}

pub struct FlowOutcome {
    pub hybrid_consistent: bool,
    pub sheets_after_restart: usize,
    pub sheets_before_restart: usize,
    pub assignments: usize,
    pub audit_violations: Vec<String>,
}

/// Every GET path of the shipped interface description with ids filled in.
pub fn get_paths(venture: &str, round: &str, assignment: &str) -> Vec<String> {
    let doc: Value = serde_json::from_str(bmguide_service::api::OPENAPI_JSON).unwrap();
    doc["paths"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(_, ops)| ops.get("get").is_some())
        .map(|(p, _)| {
            let p = if p.starts_with("/ventures") {
                p.replace("{id}", venture)
            } else if p.starts_with("/rounds") {
                p.replace("{id}", round)
            } else {
                p.replace("{id}", assignment)
            };
            p.replace("{version}", "1")
        })
        .collect()
}

/// Calls every GET endpoint as `me` and reports any response that carries
/// another evaluator's id, comment marker, or aggregate scores.
pub async fn anti_cascade_audit(h: &Harness, me: &str, peers: &[&str], venture: &str, round: &str, assignment: &str) -> Vec<String> {
    let mut violations = Vec::new();
    for path in get_paths(venture, round, assignment) {
        let (_, body) = h.get(&path, As::Mentor(me)).await;
        let text = body.to_string();
        for peer in peers.iter().filter(|p| **p != me) {
            if text.contains(&format!("\"{peer}\"")) || text.contains(&format!("marker-{peer}")) {
                violations.push(format!("{path} reveals {peer} to {me}"));
            }
        }
        for key in ["\"composite\"", "\"mean\"", "\"sheets\"", "\"aggregate\":{"] {
            if text.contains(key) {
                violations.push(format!("{path} shows {key} to {me} while the round is open"));
            }
        }
    }
    violations
}

/// Create a venture, open a round with m = 5 over 8 mentors, collect five
/// sheets (restarting the service after the third), then read guidance.
pub async fn scripted_flow() -> FlowOutcome {
    let mut h = Harness::new();
    let mentors: Vec<String> = (1..=8).map(|i| format!("m{i}")).collect();
    for (i, m) in mentors.iter().enumerate() {
        let tags: &[&str] = if i % 2 == 0 { &["market"] } else { &["finance"] };
        h.mentor(m, tags, "connected devices platform customers").await;
    }
    let model = fixture_model("acme", 11);
    let (s, _) = h.post("/ventures", As::Entrepreneur, json!({ "model": model, "tags": ["market"] })).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, round) = h.post("/ventures/acme/rounds", As::Entrepreneur, json!({ "m": 5 })).await;
    assert_eq!(s, StatusCode::CREATED, "{round}");
    let round_id = round["round_id"].as_str().unwrap().to_string();
    let tasks: Vec<(String, String)> = round["tasks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| (t["assignment_id"].as_str().unwrap().into(), t["evaluator_id"].as_str().unwrap().into()))
        .collect();

    let peers: Vec<&str> = mentors.iter().map(String::as_str).collect();
    let mut audit_violations = Vec::new();
    let mut before = 0;
    for (i, (aid, who)) in tasks.iter().enumerate() {
        audit_violations.extend(anti_cascade_audit(&h, who, &peers, "acme", &round_id, aid).await);
        let body = json!({
            "scores": mentor10_scores(4 + i as i32),
            "qualitative": { "Revenue Model": format!("marker-{who} consider usage pricing") },
        });
        let (s, b) = h.post(&format!("/assignments/{aid}/rating"), As::Mentor(who), body).await;
        assert_eq!(s, StatusCode::CREATED, "{b}");
        if i == 2 {
            before = h.app.store.read().rounds[&round_id].sheets.len();
            h.restart();
            let after = h.app.store.read().rounds[&round_id].sheets.len();
            assert_eq!(before, after);
        }
    }
    let sheets_before_restart = before;
    let sheets_after_restart = h.app.store.read().rounds[&round_id].sheets.len();

    let (s, g) = h.get("/ventures/acme/guidance", As::Entrepreneur).await;
    assert_eq!(s, StatusCode::OK, "{g}");
    let report: GuidanceReport = serde_json::from_value(g).unwrap();
    FlowOutcome {
        hybrid_consistent: hybrid_consistent(&report),
        sheets_before_restart,
        sheets_after_restart,
        assignments: tasks.len(),
        audit_violations,
    }
}

/// `n` labeled ventures whose label is a single taxonomy characteristic.
pub fn separable_corpus(n: usize, seed: u64) -> Vec<BusinessModel> {
    synth::separable_ventures(&Taxonomy::iot(), n, seed)
}
