mod common;

use axum::http::StatusCode;
use bmguide_core::learn::{Learner, ModelDocument};
use bmguide_core::schema::Taxonomy;
use bmguide_service::api::{dataset_for, RetrainResponse};
use bmguide_service::guidance::{GuidanceReport, WeightSource};
use common::{mentor10_scores, As, Harness};
use serde_json::{json, Value};

async fn import(h: &Harness, models: &[bmguide_core::schema::BusinessModel]) {
    let (s, b) = h.post("/admin/import", As::Admin, json!({ "models": models })).await;
    assert_eq!(s, StatusCode::CREATED, "{b}");
}

async fn retrain(h: &Harness, seed: u64) -> (StatusCode, Value) {
    h.post("/admin/retrain", As::Admin, json!({ "seed": seed, "n_trees": 60 })).await
}

#[tokio::test]
async fn retrain_threshold_and_determinism() {
    let h = Harness::new();
    let corpus = common::separable_corpus(60, 21);
    import(&h, &corpus[..19]).await;
    let (s, body) = retrain(&h, 5).await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");

    import(&h, &corpus[19..]).await;
    let (s, first) = retrain(&h, 5).await;
    assert_eq!(s, StatusCode::CREATED, "{first}");
    let first: RetrainResponse = serde_json::from_value(first).unwrap();
    assert_eq!(first.registry_version, 1);
    assert_eq!(first.manifest.rows.len(), 60);
    assert!(!first.manifest.crowd_lane);

    let (_, second) = retrain(&h, 5).await;
    let second: RetrainResponse = serde_json::from_value(second).unwrap();
    assert_eq!(second.registry_version, 2);
    assert_eq!(first.model_hashes, second.model_hashes);
    assert_eq!(first.manifest, second.manifest);

    // Holdout on the separable corpus.
    let forest = first.holdout.iter().find(|s| s.name == "random_forest").unwrap();
    assert!(forest.mcc >= 0.9, "holdout MCC {}", forest.mcc);

    // Both versions stay in the registry, with their documents on disk.
    let (_, models) = h.get("/admin/models", As::Admin).await;
    assert_eq!(models["registry"].as_array().unwrap().len(), 2);
    assert_eq!(models["active"], 2);
}

#[tokio::test]
async fn manifest_reproduces_registry_entry() {
    let h = Harness::new();
    import(&h, &common::separable_corpus(30, 4)).await;
    let (s, body) = retrain(&h, 9).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    let r: RetrainResponse = serde_json::from_value(body).unwrap();
    let t = Taxonomy::iot();
    let state = h.app.store.read();
    let ds = dataset_for(&state, &t, &r.manifest.rows, r.manifest.labels.clone()).unwrap();
    assert_eq!(ds.content_hash(), r.manifest.dataset_hash);
    for spec in r.manifest.params.specs() {
        let model = spec.fit(&ds).unwrap();
        let doc = ModelDocument::new(model, t.feature_names());
        assert_eq!(Some(&doc.hash()), r.model_hashes.get(spec.name()), "{}", spec.name());
    }
}

#[tokio::test]
async fn single_class_and_bad_params_rejected() {
    let h = Harness::with(|c| c.retrain_min = 2);
    let mut corpus = common::separable_corpus(4, 1);
    for m in &mut corpus {
        m.series_a = Some(true);
    }
    import(&h, &corpus).await;
    let (s, _) = retrain(&h, 1).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = h.post("/admin/retrain", As::Admin, json!({ "seed": 1, "folds": 1 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = h.post("/admin/retrain", As::Admin, json!({ "seed": 1, "extra": 1 })).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn guidance_uses_registry_after_restart() {
    let mut h = Harness::with(|c| c.m_bounds = (1, 10));
    let corpus = common::separable_corpus(40, 8);
    import(&h, &corpus).await;
    let (s, _) = retrain(&h, 3).await;
    assert_eq!(s, StatusCode::CREATED);
    h.restart();

    h.mentor("a", &[], "").await;
    h.mentor("b", &[], "").await;
    let mut m = corpus[0].clone();
    m.venture_id = "fresh".into();
    m.series_a = None;
    h.post("/ventures", As::Entrepreneur, json!({ "model": m })).await;
    let (_, r) = h.post("/ventures/fresh/rounds", As::Entrepreneur, json!({ "m": 2 })).await;
    for i in 0..2 {
        let t = &r["tasks"][i];
        let (aid, who) = (t["assignment_id"].as_str().unwrap(), t["evaluator_id"].as_str().unwrap());
        let (s, _) = h.post(&format!("/assignments/{aid}/rating"), As::Mentor(who), json!({ "scores": mentor10_scores(7 + i as i32) })).await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (s, g) = h.get("/ventures/fresh/guidance", As::Entrepreneur).await;
    assert_eq!(s, StatusCode::OK, "{g}");
    let report: GuidanceReport = serde_json::from_value(g).unwrap();
    let inf = &report.informative;
    assert!(inf.machine.available);
    assert_eq!(inf.machine.registry_version, Some(1));
    assert_eq!(inf.machine.probabilities.len(), 3);
    assert!(inf.machine.probabilities.values().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(inf.hybrid.source, WeightSource::Registry);
    assert!(common::hybrid_consistent(&report));
    // Series A follows the subscription choice, which the first model has.
    assert_eq!(corpus[0].series_a, Some(true));
    assert!(inf.machine.probabilities["random_forest"] > 0.5);

    // Closing logs the aggregate alongside the machine view.
    let rid = r["round_id"].as_str().unwrap();
    h.post(&format!("/rounds/{rid}/close"), As::Entrepreneur, json!({})).await;
    let (_, log) = h.get("/admin/repository", As::Admin).await;
    let closed = log["entries"].as_array().unwrap().iter().rev().find(|e| e["kind"] == "round_closed").unwrap();
    assert_eq!(closed["registry_version"], 1);
    assert_eq!(closed["machine"].as_object().unwrap().len(), 3);
}

#[tokio::test]
async fn crowd_lane_joins_when_every_row_was_rated() {
    let h = Harness::with(|c| {
        c.m_bounds = (1, 10);
        c.retrain_min = 12;
    });
    h.mentor("a", &[], "").await;
    let corpus = common::separable_corpus(12, 13);
    import(&h, &corpus).await;
    for m in &corpus {
        let id = &m.venture_id;
        let (_, r) = h.post(&format!("/ventures/{id}/rounds"), As::Entrepreneur, json!({ "m": 1 })).await;
        let aid = r["tasks"][0]["assignment_id"].as_str().unwrap();
        let score = if m.series_a == Some(true) { 8 } else { 3 };
        h.post(&format!("/assignments/{aid}/rating"), As::Mentor("a"), json!({ "scores": mentor10_scores(score) })).await;
        let rid = r["round_id"].as_str().unwrap();
        let (s, _) = h.post(&format!("/rounds/{rid}/close"), As::Entrepreneur, json!({})).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, body) = h.post("/admin/retrain", As::Admin, json!({ "seed": 2, "n_trees": 30, "folds": 3 })).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    let r: RetrainResponse = serde_json::from_value(body).unwrap();
    assert!(r.manifest.crowd_lane);
    assert!(r.report.rows.iter().any(|row| row.name == "crowd"));
}

#[tokio::test]
async fn repository_log_is_append_only() {
    let h = Harness::new();
    import(&h, &common::separable_corpus(20, 2)).await;
    let (_, before) = h.get("/admin/repository", As::Admin).await;
    let before = before["entries"].as_array().unwrap().clone();
    let (s, _) = h.post("/admin/labels", As::Admin, json!({ "venture_id": "s0001", "series_a": false })).await;
    assert_eq!(s, StatusCode::CREATED);
    retrain(&h, 1).await;
    let (_, after) = h.get("/admin/repository", As::Admin).await;
    let after = after["entries"].as_array().unwrap();
    assert_eq!(&after[..before.len()], &before[..]);
    assert_eq!(after.len(), before.len() + 2);
    let (_, since) = h.get(&format!("/admin/repository?since={}", before.len()), As::Admin).await;
    assert_eq!(since["entries"].as_array().unwrap().len(), 2);
}
