mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use feedpath_core::ltr::{Aspect, Candidate};
use feedpath_service::api::{router, AppState};
use feedpath_service::workspace::{self, Workspace};

struct Fixture {
    _dir: tempfile::TempDir,
    ws: Workspace,
    state: Arc<AppState>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let ws = common::prepared_workspace(dir.path());
        let state = Arc::new(AppState::load(ws.clone()).unwrap());
        Fixture { _dir: dir, ws, state }
    }

    fn app(&self) -> Router {
        router(Arc::clone(&self.state))
    }

    fn reload(&mut self) {
        self.state = Arc::new(AppState::load(self.ws.clone()).unwrap());
    }

    fn stored(&self) -> usize {
        workspace::read_judgments(&self.ws.judgments_path()).unwrap().len()
    }

    /// Path ids mined for one feed item, in dump order.
    fn item_paths(&self, item: &str) -> Vec<String> {
        let mut ids = Vec::new();
        for r in workspace::read_paths(&self.ws.paths_path()).unwrap() {
            let id = r.id.to_string();
            if r.pair.contains(&format!("|{item}|")) && !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids
    }
}

async fn call(app: Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, body)
}

async fn get(app: Router, uri: &str) -> (StatusCode, Value) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_json(app: Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(app, req).await
}

fn judgment(better: &str, worse: &str, judge: &str) -> Value {
    json!({"better": better, "worse": worse, "aspect": "relevance", "judge": judge, "judged_at": 5})
}

#[tokio::test]
async fn duplicate_judgment_conflicts_and_store_is_unchanged() {
    let fx = Fixture::new();
    let ids = fx.item_paths("f000");
    let body = judgment(&ids[0], &ids[1], "ann");
    let (status, stored) = post_json(fx.app(), "/judgments", &body).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(stored["judge"], "ann");
    let before = std::fs::read(fx.ws.judgments_path()).unwrap();

    let (status, err) = post_json(fx.app(), "/judgments", &body).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "duplicate");
    // The reversed order names the same pair.
    let (status, _) = post_json(fx.app(), "/judgments", &judgment(&ids[1], &ids[0], "ann")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(std::fs::read(fx.ws.judgments_path()).unwrap(), before);

    // Another judge or aspect is a distinct record.
    let (status, _) = post_json(fx.app(), "/judgments", &judgment(&ids[0], &ids[1], "bob")).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(fx.stored(), 2);
}

#[tokio::test]
async fn judgments_survive_restart() {
    let mut fx = Fixture::new();
    let ids = fx.item_paths("f001");
    let body = judgment(&ids[2], &ids[0], "ann");
    assert_eq!(post_json(fx.app(), "/judgments", &body).await.0, StatusCode::CREATED);
    fx.reload();
    let (_, stats) = get(fx.app(), "/stats").await;
    assert_eq!(stats["judgments"]["relevance"], 1);
    assert_eq!(post_json(fx.app(), "/judgments", &body).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let fx = Fixture::new();
    let ids = fx.item_paths("f000");
    let other = fx.item_paths("f001");

    let req = Request::post("/judgments")
        .header(header::CONTENT_TYPE, "text/plain")
        .body(Body::from(judgment(&ids[0], &ids[1], "ann").to_string()))
        .unwrap();
    assert_eq!(call(fx.app(), req).await.0, StatusCode::UNSUPPORTED_MEDIA_TYPE);

    let req = Request::post("/judgments")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{\"better\":"))
        .unwrap();
    assert_eq!(call(fx.app(), req).await.0, StatusCode::BAD_REQUEST);

    let cases = [
        (judgment(&ids[0], &ids[0], "ann"), StatusCode::BAD_REQUEST),
        (judgment(&ids[0], &ids[1], " "), StatusCode::BAD_REQUEST),
        (judgment(&ids[0], &other[0], "ann"), StatusCode::BAD_REQUEST),
        (judgment(&ids[0], "ffffffffffffffff", "ann"), StatusCode::NOT_FOUND),
        (json!({"better": ids[0], "worse": ids[1], "aspect": "beauty", "judge": "ann"}), StatusCode::BAD_REQUEST),
        (json!({"pair_id": "x-y", "better": ids[0], "worse": ids[1], "aspect": "relevance", "judge": "ann"}), StatusCode::BAD_REQUEST),
    ];
    for (body, want) in cases {
        let (status, err) = post_json(fx.app(), "/judgments", &body).await;
        assert_eq!(status, want, "{body}");
        assert!(err["error"].is_string());
    }
    assert_eq!(fx.stored(), 0);

    assert_eq!(get(fx.app(), "/rank?item=nope").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(fx.app(), "/rank?item=f000&user=nobody").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get(fx.app(), "/pairs?aspect=beauty").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn rank_without_model_is_a_precondition_failure() {
    let fx = Fixture::new();
    let (status, err) = get(fx.app(), "/rank?item=f000&aspect=surprisal").await;
    assert_eq!(status, StatusCode::PRECONDITION_FAILED);
    assert_eq!(err["code"], "no_model");
}

#[tokio::test]
async fn consistent_triplet_is_fully_transitive() {
    let fx = Fixture::new();
    let ids = fx.item_paths("f002");
    let (a, b, c) = (&ids[0], &ids[1], &ids[2]);
    for (x, y) in [(a, b), (b, c), (a, c)] {
        assert_eq!(post_json(fx.app(), "/judgments", &judgment(x, y, "ann")).await.0, StatusCode::CREATED);
    }
    let (_, stats) = get(fx.app(), "/stats").await;
    assert_eq!(stats["transitivity"]["relevance"], 1.0);
    assert_eq!(stats["transitivity"]["surprisal"], Value::Null);
    assert_eq!(stats["judgments"]["relevance"], 3);

    // Closing the cycle makes the one triplet intransitive.
    let fx = Fixture::new();
    for (x, y) in [(a, b), (b, c), (c, a)] {
        post_json(fx.app(), "/judgments", &judgment(x, y, "ann")).await;
    }
    let (_, stats) = get(fx.app(), "/stats").await;
    assert_eq!(stats["transitivity"]["relevance"], 0.0);
}

#[tokio::test]
async fn feed_and_pair_listing() {
    let fx = Fixture::new();
    let (status, feed) = get(fx.app(), "/feed-items").await;
    assert_eq!(status, StatusCode::OK);
    let feed = feed.as_array().unwrap();
    assert_eq!(feed.len(), 40);
    assert_eq!(feed[0]["item"], "f000");
    assert_eq!(feed[0]["paths"], 12);

    let (_, pairs) = get(fx.app(), "/pairs?aspect=relevance&n=3&judge=ann").await;
    let pairs = pairs.as_array().unwrap().clone();
    assert_eq!(pairs.len(), 3);
    let first = &pairs[0];
    let a = &first["a"];
    assert_eq!(a["hops"].as_array().unwrap().len(), a["length"].as_u64().unwrap() as usize + 1);
    assert!(a["hops"][0]["edge"].is_string());
    assert!(a["hops"][a["length"].as_u64().unwrap() as usize]["edge"].is_null());

    let body = judgment(a["id"].as_str().unwrap(), first["b"]["id"].as_str().unwrap(), "ann");
    assert_eq!(post_json(fx.app(), "/judgments", &body).await.0, StatusCode::CREATED);
    let (_, after) = get(fx.app(), "/pairs?aspect=relevance&n=3&judge=ann").await;
    assert_eq!(after[0]["pair_id"], pairs[1]["pair_id"]);
    // Other judges and aspects still see the pair.
    let (_, other) = get(fx.app(), "/pairs?aspect=surprisal&n=1&judge=ann").await;
    assert_eq!(other[0]["pair_id"], first["pair_id"]);
}

async fn judge_by_frequency(fx: &Fixture) {
    let data = common::synthetic_dir().join("judgments.jsonl");
    let js: Vec<feedpath_core::eval::Judgment> = feedpath_core::io::read_jsonl(data).unwrap();
    for j in js.iter().filter(|j| j.aspect == Aspect::Relevance).take(60) {
        let body = json!({"better": j.better, "worse": j.worse, "aspect": "relevance", "judge": j.judge, "judged_at": j.judged_at});
        let (status, _) = post_json(fx.app(), "/judgments", &body).await;
        assert_eq!(status, StatusCode::CREATED);
    }
}

#[tokio::test]
async fn retrain_then_rank_matches_model_order() {
    let fx = Fixture::new();
    judge_by_frequency(&fx).await;
    let (status, summary) = post_json(fx.app(), "/train?aspect=relevance", &json!({})).await;
    assert_eq!(status, StatusCode::OK, "{summary}");
    assert_eq!(summary["dev_split"], true);
    assert!(fx.ws.model_path(Aspect::Relevance).exists());

    let (status, full) = get(fx.app(), "/rank?item=f003&aspect=relevance").await;
    assert_eq!(status, StatusCode::OK);
    let model = workspace::read_model(&fx.ws.model_path(Aspect::Relevance)).unwrap();
    let (_, features) = workspace::read_features(&fx.ws.features_path()).unwrap();
    let cands: Vec<Candidate> = fx
        .item_paths("f003")
        .into_iter()
        .map(|id| Candidate { features: features[&id].clone(), id })
        .collect();
    let expected: Vec<String> = model.rank(&cands).unwrap().iter().map(|r| r.candidate.id.clone()).collect();
    let got: Vec<String> = full["paths"].as_array().unwrap().iter().map(|p| p["path"]["id"].as_str().unwrap().to_owned()).collect();
    assert_eq!(got, expected);

    let (_, top) = get(fx.app(), "/rank?item=f003&aspect=relevance&k=1").await;
    let top = top["paths"].as_array().unwrap();
    assert_eq!(top.len(), 1);
    assert_eq!(top[0]["path"]["id"], expected[0].as_str());
    let best = cands.iter().find(|c| c.id == expected[0]).unwrap();
    let argmax = cands.iter().map(|c| model.score(&c.features).unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(model.score(&best.features).unwrap(), argmax);

    // Contributions are w·x per feature and sum to the score.
    let contrib: f64 = top[0]["contributions"].as_array().unwrap().iter().map(|c| c["value"].as_f64().unwrap()).sum();
    assert!((contrib - top[0]["score"].as_f64().unwrap()).abs() < 1e-9);

    let (_, stats) = get(fx.app(), "/stats").await;
    assert_eq!(stats["models"], json!(["relevance"]));
}

#[tokio::test]
async fn retrain_is_exclusive() {
    let fx = Fixture::new();
    judge_by_frequency(&fx).await;
    let guard = fx.state.try_begin_training().unwrap();
    assert!(fx.state.try_begin_training().is_none());
    let (status, err) = post_json(fx.app(), "/train?aspect=relevance", &json!({})).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(err["code"], "training");
    drop(guard);
    let (status, _) = post_json(fx.app(), "/train?aspect=relevance", &json!({})).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn train_without_judgments_is_unprocessable() {
    let fx = Fixture::new();
    let (status, err) = post_json(fx.app(), "/train?aspect=surprisal", &json!({})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "training_failed");
}
