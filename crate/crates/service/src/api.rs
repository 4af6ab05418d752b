//! JSON HTTP API over a workspace.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use feedpath_core::eval::{pair_id, transitivity_score, Judgment};
use feedpath_core::features::FeatureVector;
use feedpath_core::graph::InteractionGraph;
use feedpath_core::io;
use feedpath_core::ltr::{Aspect, LinearRankModel};
use feedpath_core::paths::{FeedItem, PairKey, PathRecord};

use crate::ops;
use crate::workspace::{self, PairRecord, Workspace, WorkspaceConfig};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }
    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", m)
    }
    fn not_found(m: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", m)
    }
    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "code": self.code}))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct JudgmentStore {
    all: Vec<Judgment>,
    keys: HashSet<(String, String, Aspect)>,
}

pub struct AppState {
    ws: Workspace,
    cfg: WorkspaceConfig,
    graph: Arc<InteractionGraph>,
    feed: Vec<FeedItem>,
    paths: HashMap<String, PathRecord>,
    /// Path ids per feed item node, in dump order.
    by_item: BTreeMap<String, Vec<String>>,
    features: BTreeMap<String, FeatureVector>,
    pairs: Vec<PairRecord>,
    judgments: Mutex<JudgmentStore>,
    models: RwLock<HashMap<Aspect, Arc<LinearRankModel>>>,
    training: AtomicBool,
}

impl AppState {
    pub fn load(ws: Workspace) -> anyhow::Result<Self> {
        let cfg = ws.config()?;
        let graph = Arc::new(ws.graph()?);
        let feed = if ws.feed_path().exists() { workspace::read_feed(&ws.feed_path())? } else { Vec::new() };
        let records = if ws.paths_path().exists() { workspace::read_paths(&ws.paths_path())? } else { Vec::new() };
        let mut by_item: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for r in &records {
            let key = PairKey::parse(&r.pair)?;
            let ids = by_item.entry(key.item).or_default();
            let id = r.id.to_string();
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        let paths = workspace::index_paths(records);
        let features = if ws.features_path().exists() {
            workspace::read_features(&ws.features_path())?.1
        } else {
            warn!("no feature file in workspace; ranking and training are unavailable");
            BTreeMap::new()
        };
        let pairs = if ws.pairs_path().exists() { io::read_jsonl(ws.pairs_path())? } else { Vec::new() };
        let all = workspace::read_judgments(&ws.judgments_path())?;
        let keys = all.iter().map(|j| (j.pair_id.clone(), j.judge.clone(), j.aspect)).collect();
        let mut models = HashMap::new();
        for aspect in Aspect::BOTH {
            let p = ws.model_path(aspect);
            if p.exists() {
                models.insert(aspect, Arc::new(workspace::read_model(&p)?));
            }
        }
        Ok(AppState {
            ws,
            cfg,
            graph,
            feed,
            paths,
            by_item,
            features,
            pairs,
            judgments: Mutex::new(JudgmentStore { all, keys }),
            models: RwLock::new(models),
            training: AtomicBool::new(false),
        })
    }

    fn model(&self, aspect: Aspect) -> Option<Arc<LinearRankModel>> {
        self.models.read().expect("model lock poisoned").get(&aspect).cloned()
    }

    fn view(&self, id: &str) -> Option<PathView> {
        let r = self.paths.get(id)?;
        let hops = r
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let (label, node_type) = match self.graph.node_ix(n) {
                    Some(ix) => {
                        let node = self.graph.node(ix);
                        (node.label().to_owned(), node.node_type.clone())
                    }
                    None => (n.clone(), String::new()),
                };
                Hop { node: n.clone(), label, node_type, edge: r.edge_types.get(i).cloned() }
            })
            .collect();
        Some(PathView { id: id.to_owned(), length: r.edge_types.len(), hops })
    }
}

#[derive(Debug, Serialize)]
struct Hop {
    node: String,
    label: String,
    #[serde(rename = "type")]
    node_type: String,
    /// Edge leaving this node; absent on the last hop.
    #[serde(skip_serializing_if = "Option::is_none")]
    edge: Option<String>,
}

#[derive(Debug, Serialize)]
struct PathView {
    id: String,
    length: usize,
    hops: Vec<Hop>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/feed-items", get(feed_items))
        .route("/pairs", get(pairs))
        .route("/judgments", post(post_judgment))
        .route("/train", post(train))
        .route("/rank", get(rank))
        .route("/stats", get(stats))
        .with_state(state)
}

pub async fn serve(ws: Workspace, addr: SocketAddr) -> anyhow::Result<()> {
    let state = Arc::new(AppState::load(ws)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Serialize)]
struct FeedEntry {
    item: String,
    label: String,
    seen_at: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    session: Option<String>,
    paths: usize,
}

async fn feed_items(State(s): State<Arc<AppState>>) -> ApiResult<Vec<FeedEntry>> {
    Ok(Json(
        s.feed
            .iter()
            .map(|f| FeedEntry {
                item: f.node.clone(),
                label: s.graph.node_ix(&f.node).map(|ix| s.graph.node(ix).label().to_owned()).unwrap_or_else(|| f.node.clone()),
                seen_at: f.seen_at,
                session: f.session.clone(),
                paths: s.by_item.get(&f.node).map_or(0, Vec::len),
            })
            .collect(),
    ))
}

fn parse_aspect(s: Option<&str>) -> Result<Aspect, ApiError> {
    match s {
        None => Ok(Aspect::Relevance),
        Some(a) => a.parse().map_err(|_| ApiError::bad_request(format!("unknown aspect `{a}`"))),
    }
}

#[derive(Deserialize)]
struct PairsQuery {
    aspect: Option<String>,
    n: Option<usize>,
    judge: Option<String>,
}

#[derive(Serialize)]
struct PairView {
    pair_id: String,
    item: String,
    a: PathView,
    b: PathView,
}

async fn pairs(State(s): State<Arc<AppState>>, Query(q): Query<PairsQuery>) -> ApiResult<Vec<PairView>> {
    let aspect = parse_aspect(q.aspect.as_deref())?;
    let n = q.n.unwrap_or(s.cfg.pairs_per_item);
    let done: HashSet<String> = match &q.judge {
        Some(judge) => {
            let store = s.judgments.lock().expect("judgment lock poisoned");
            store.all.iter().filter(|j| &j.judge == judge && j.aspect == aspect).map(|j| j.pair_id.clone()).collect()
        }
        None => HashSet::new(),
    };
    let mut out = Vec::new();
    for p in s.pairs.iter().filter(|p| !done.contains(&p.pair_id)) {
        if out.len() >= n {
            break;
        }
        let (Some(a), Some(b)) = (s.view(&p.a), s.view(&p.b)) else {
            continue;
        };
        let item = PairKey::parse(&p.pair).map(|k| k.item).unwrap_or_default();
        out.push(PairView { pair_id: p.pair_id.clone(), item, a, b });
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JudgmentBody {
    pair_id: Option<String>,
    better: String,
    worse: String,
    aspect: Aspect,
    judge: String,
    judged_at: Option<i64>,
    comment: Option<String>,
}

fn json_body<T: for<'de> Deserialize<'de>>(headers: &HeaderMap, body: &Bytes) -> Result<T, ApiError> {
    let ct = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    if !ct.starts_with("application/json") {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "content_type", "expected application/json"));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn post_judgment(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<(StatusCode, Json<Judgment>), ApiError> {
    let b: JudgmentBody = json_body(&headers, &body)?;
    if b.judge.trim().is_empty() {
        return Err(ApiError::bad_request("judge must not be empty"));
    }
    if b.better == b.worse {
        return Err(ApiError::bad_request("better and worse must differ"));
    }
    let (Some(pb), Some(pw)) = (s.paths.get(&b.better), s.paths.get(&b.worse)) else {
        let missing = if s.paths.contains_key(&b.better) { &b.worse } else { &b.better };
        return Err(ApiError::not_found(format!("unknown path `{missing}`")));
    };
    if pb.pair != pw.pair {
        return Err(ApiError::bad_request("paths belong to different feed items"));
    }
    let id = pair_id(&b.better, &b.worse);
    if let Some(given) = &b.pair_id {
        if *given != id {
            return Err(ApiError::bad_request(format!("pair_id should be `{id}`")));
        }
    }
    let judged_at = b.judged_at.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)
    });
    let j = Judgment {
        pair_id: id,
        better: b.better,
        worse: b.worse,
        aspect: b.aspect,
        judge: b.judge,
        judged_at,
        comment: b.comment.filter(|c| !c.trim().is_empty()),
    };
    let mut store = s.judgments.lock().expect("judgment lock poisoned");
    let key = (j.pair_id.clone(), j.judge.clone(), j.aspect);
    if store.keys.contains(&key) {
        return Err(ApiError::new(StatusCode::CONFLICT, "duplicate", "pair already judged by this judge for this aspect"));
    }
    io::append_jsonl(s.ws.judgments_path(), &j).map_err(ApiError::internal)?;
    store.keys.insert(key);
    store.all.push(j.clone());
    Ok((StatusCode::CREATED, Json(j)))
}

#[derive(Deserialize)]
struct TrainQuery {
    aspect: Option<String>,
}

/// Held while a retrain runs; dropping it frees the slot.
pub struct TrainingGuard(Arc<AppState>);

impl Drop for TrainingGuard {
    fn drop(&mut self) {
        self.0.training.store(false, Ordering::SeqCst);
    }
}

impl AppState {
    /// Claims the single retrain slot, or `None` when a retrain is running.
    pub fn try_begin_training(self: &Arc<Self>) -> Option<TrainingGuard> {
        self.training
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| TrainingGuard(Arc::clone(self)))
    }
}

async fn train(State(s): State<Arc<AppState>>, Query(q): Query<TrainQuery>) -> ApiResult<ops::TrainSummary> {
    let aspect = parse_aspect(q.aspect.as_deref())?;
    let guard = s
        .try_begin_training()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "training", "a retrain is already running"))?;
    let st = Arc::clone(&s);
    let result = tokio::task::spawn_blocking(move || {
        let _guard = guard;
        let judgments = st.judgments.lock().expect("judgment lock poisoned").all.clone();
        let (model, summary) = ops::train_model(&judgments, &st.features, aspect, st.cfg.seed)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "training_failed", e.to_string()))?;
        io::write_string(st.ws.model_path(aspect), &model.to_json()).map_err(ApiError::internal)?;
        st.models.write().expect("model lock poisoned").insert(aspect, Arc::new(model));
        Ok::<_, ApiError>(summary)
    })
    .await
    .map_err(ApiError::internal)??;
    Ok(Json(result))
}

#[derive(Deserialize)]
struct RankQuery {
    user: Option<String>,
    item: String,
    aspect: Option<String>,
    k: Option<usize>,
}

#[derive(Serialize)]
struct RankedView {
    rank: usize,
    score: f64,
    path: PathView,
    contributions: Vec<ops::Contribution>,
}

#[derive(Serialize)]
struct RankResponse {
    user: String,
    item: String,
    aspect: Aspect,
    paths: Vec<RankedView>,
}

async fn rank(State(s): State<Arc<AppState>>, Query(q): Query<RankQuery>) -> ApiResult<RankResponse> {
    let aspect = parse_aspect(q.aspect.as_deref())?;
    let user = s.graph.node(s.graph.user()).id.clone();
    if let Some(u) = &q.user {
        if *u != user {
            return Err(ApiError::not_found(format!("unknown user `{u}`")));
        }
    }
    if !s.feed.iter().any(|f| f.node == q.item) {
        return Err(ApiError::not_found(format!("unknown feed item `{}`", q.item)));
    }
    let model = s
        .model(aspect)
        .ok_or_else(|| ApiError::new(StatusCode::PRECONDITION_FAILED, "no_model", format!("no trained {aspect} model")))?;
    let ids = s.by_item.get(&q.item).cloned().unwrap_or_default();
    let ranked = ops::rank_ids(&model, &ids, &s.features, q.k).map_err(ApiError::internal)?;
    let paths = ranked
        .into_iter()
        .map(|r| RankedView {
            rank: r.rank,
            score: r.score,
            path: s.view(&r.id).expect("ranked ids come from the dump"),
            contributions: r.contributions,
        })
        .collect();
    Ok(Json(RankResponse { user, item: q.item, aspect, paths }))
}

async fn stats(State(s): State<Arc<AppState>>) -> ApiResult<serde_json::Value> {
    let store = s.judgments.lock().expect("judgment lock poisoned");
    let mut counts = serde_json::Map::new();
    let mut trans = serde_json::Map::new();
    for aspect in Aspect::BOTH {
        let js: Vec<&Judgment> = store.all.iter().filter(|j| j.aspect == aspect).collect();
        counts.insert(aspect.name().into(), json!(js.len()));
        let t = transitivity_score(js.iter().map(|j| (j.better.as_str(), j.worse.as_str())));
        trans.insert(aspect.name().into(), json!(t));
    }
    let models: Vec<&str> = Aspect::BOTH.iter().filter(|a| s.model(**a).is_some()).map(|a| a.name()).collect();
    Ok(Json(json!({
        "label": s.cfg.label,
        "nodes": s.graph.node_count(),
        "edges": s.graph.edge_count(),
        "feed_items": s.feed.len(),
        "paths": s.paths.len(),
        "pairs": s.pairs.len(),
        "judgments": counts,
        "transitivity": trans,
        "models": models,
    })))
}
