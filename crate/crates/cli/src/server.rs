//! Review API over a run's artifacts directory. Read-only except for the
//! adjudication log, whose writes go through a single mutex-held writer.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use crossmap::similarity::rank_candidates;
use crossmap::{
    load_corpus, Corpus, CrosswalkReport, ImportanceRanking, Side, SimilarityKind,
    SimilarityMatrix, StepwiseResult,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::adjudication::{AdjudicationRecord, AdjudicationStore, Decision, NewAdjudication};
use crate::pipeline::{
    parse_similarity_csv, sha256_file, RunManifest, MANIFEST, RANKINGS, REPORT_JSON, SIMILARITY,
    SPECIFICATIONS_CORPUS, STANDARDS_CORPUS,
};

pub const ADJUDICATIONS: &str = "adjudications.jsonl";

/// Everything the API serves, loaded once at startup.
pub struct Artifacts {
    pub standards: Corpus,
    pub specifications: Corpus,
    pub similarity: SimilarityMatrix,
    pub rankings: Vec<ImportanceRanking>,
    pub report: CrosswalkReport,
    pub manifest_sha256: Option<String>,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).with_context(|| format!("reading artifact {}", path.display()))
}

impl Artifacts {
    /// Loads a run directory, checking each file against the manifest hashes when present.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = if dir.join(MANIFEST).exists() {
            Some(RunManifest::load(dir)?)
        } else {
            None
        };
        if let Some(m) = &manifest {
            for name in [STANDARDS_CORPUS, SPECIFICATIONS_CORPUS, SIMILARITY, RANKINGS, REPORT_JSON] {
                let want = m
                    .artifacts
                    .get(name)
                    .with_context(|| format!("manifest does not list {name}"))?;
                if &sha256_file(&dir.join(name))? != want {
                    bail!("corrupt artifacts: {name} does not match its manifest hash");
                }
            }
        }
        let kind = manifest
            .as_ref()
            .map_or(SimilarityKind::Cosine, |m| m.config.similarity.kind);
        let standards = load_corpus(dir.join(STANDARDS_CORPUS), Side::Standard)?;
        let specifications = load_corpus(dir.join(SPECIFICATIONS_CORPUS), Side::Specification)?;
        let similarity =
            parse_similarity_csv(&read(dir, SIMILARITY)?, kind, &standards, &specifications)
                .context("corrupt artifacts: similarity.csv")?;
        let rankings: Vec<ImportanceRanking> = serde_json::from_str(&read(dir, RANKINGS)?)
            .context("corrupt artifacts: rankings.json")?;
        let report = CrosswalkReport::from_json_str(&read(dir, REPORT_JSON)?)
            .context("corrupt artifacts: report.json")?;
        if similarity.row_refs.len() != standards.len()
            || similarity.col_refs.len() != specifications.len()
        {
            bail!("corrupt artifacts: similarity matrix shape disagrees with the corpora");
        }
        let manifest_sha256 = manifest
            .is_some()
            .then(|| sha256_file(&dir.join(MANIFEST)))
            .transpose()?;
        Ok(Self {
            standards,
            specifications,
            similarity,
            rankings,
            report,
            manifest_sha256,
        })
    }

    fn row(&self, standard_ref: usize) -> Option<&StepwiseResult> {
        self.report
            .table
            .rows
            .iter()
            .map(|r| &r.result)
            .find(|r| r.target_ref == standard_ref)
    }
}

#[derive(Clone)]
pub struct AppState {
    pub artifacts: Arc<Artifacts>,
    pub store: Arc<Mutex<AdjudicationStore>>,
}

impl AppState {
    pub fn open(dir: &Path) -> Result<Self> {
        let artifacts = Artifacts::load(dir)?;
        let store = AdjudicationStore::open(dir.join(ADJUDICATIONS))?;
        Ok(Self {
            artifacts: Arc::new(artifacts),
            store: Arc::new(Mutex::new(store)),
        })
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn not_found(what: String) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, what)
}

fn internal(e: anyhow::Error) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}"))
}

#[derive(Serialize)]
struct StandardView {
    #[serde(rename = "ref")]
    ref_num: usize,
    id: String,
    domain_id: usize,
    domain: String,
    text: String,
    steps: Vec<usize>,
    r2: Vec<f64>,
    increments: Vec<f64>,
    /// Candidates with at least one current decision.
    decided_candidates: usize,
    candidate_count: usize,
}

async fn standards(State(s): State<AppState>) -> Json<Vec<StandardView>> {
    let latest = s.store.lock().await.latest();
    let a = &s.artifacts;
    let views = a
        .standards
        .statements()
        .iter()
        .map(|st| {
            let row = a.row(st.ref_num);
            let mut decided: Vec<usize> = latest
                .iter()
                .filter(|r| r.standard_ref == st.ref_num)
                .map(|r| r.spec_ref)
                .collect();
            decided.dedup();
            StandardView {
                ref_num: st.ref_num,
                id: st.id.clone(),
                domain_id: st.domain_id,
                domain: a
                    .standards
                    .scheme()
                    .domain(st.domain_id)
                    .map_or_else(String::new, |d| d.name.clone()),
                text: st.text.clone(),
                steps: row.map(|r| r.steps.clone()).unwrap_or_default(),
                r2: row.map(|r| r.r2.clone()).unwrap_or_default(),
                increments: row.map(|r| r.increments.clone()).unwrap_or_default(),
                decided_candidates: decided.len(),
                candidate_count: a.specifications.len(),
            }
        })
        .collect();
    Json(views)
}

#[derive(Serialize)]
struct CandidateView {
    rank: usize,
    spec_ref: usize,
    spec_id: String,
    domain_id: usize,
    domain: String,
    text: String,
    similarity: f64,
    /// 1-based entry step when regression selected this spec.
    step: Option<usize>,
    r2_increment: Option<f64>,
    importance: Option<f64>,
    decisions: Vec<AdjudicationRecord>,
}

fn parse_ref(raw: &str) -> Result<usize, ApiError> {
    raw.parse()
        .map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("`{raw}` is not a ref number")))
}

async fn candidates(
    State(s): State<AppState>,
    UrlPath(raw): UrlPath<String>,
) -> Result<Json<Vec<CandidateView>>, ApiError> {
    let standard_ref = parse_ref(&raw)?;
    let a = &s.artifacts;
    let ranked = rank_candidates(&a.similarity, standard_ref)
        .map_err(|_| not_found(format!("no standard with ref {standard_ref}")))?;
    let row = a.row(standard_ref);
    let ranking = a.rankings.iter().find(|r| r.target_ref == standard_ref);
    let latest = s.store.lock().await.latest();
    let views = ranked
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let spec = a.specifications.statement(c.spec_ref).ok();
            let step = row.and_then(|r| r.steps.iter().position(|&s| s == c.spec_ref));
            CandidateView {
                rank: k + 1,
                spec_ref: c.spec_ref,
                spec_id: spec.map_or_else(String::new, |s| s.id.clone()),
                domain_id: spec.map_or(0, |s| s.domain_id),
                domain: spec
                    .and_then(|s| a.specifications.scheme().domain(s.domain_id))
                    .map_or_else(String::new, |d| d.name.clone()),
                text: spec.map_or_else(String::new, |s| s.text.clone()),
                similarity: c.similarity,
                step: step.map(|i| i + 1),
                r2_increment: step.and_then(|i| row.and_then(|r| r.increments.get(i).copied())),
                importance: ranking.and_then(|r| {
                    r.scores
                        .iter()
                        .find(|sc| sc.spec_ref == c.spec_ref)
                        .map(|sc| sc.mean_importance)
                }),
                decisions: latest
                    .iter()
                    .filter(|r| r.standard_ref == standard_ref && r.spec_ref == c.spec_ref)
                    .cloned()
                    .collect(),
            }
        })
        .collect();
    Ok(Json(views))
}

async fn report(State(s): State<AppState>) -> Response {
    let mut resp = Json(&s.artifacts.report).into_response();
    if let Some(h) = &s.artifacts.manifest_sha256 {
        if let Ok(v) = format!("\"{h}\"").parse() {
            resp.headers_mut().insert(header::ETAG, v);
        }
    }
    resp
}

#[derive(Deserialize)]
struct AdjudicationQuery {
    #[serde(default)]
    history: bool,
}

async fn list_adjudications(
    State(s): State<AppState>,
    Query(q): Query<AdjudicationQuery>,
) -> Json<Vec<AdjudicationRecord>> {
    let store = s.store.lock().await;
    Json(if q.history {
        store.history().to_vec()
    } else {
        store.latest()
    })
}

fn validate(a: &Artifacts, new: &NewAdjudication) -> Result<(), String> {
    if a.standards.statement(new.standard_ref).is_err() {
        return Err(format!("unknown standard_ref {}", new.standard_ref));
    }
    if a.specifications.statement(new.spec_ref).is_err() {
        return Err(format!("unknown spec_ref {}", new.spec_ref));
    }
    if new.reviewer.trim().is_empty() {
        return Err("reviewer must be nonempty".into());
    }
    Ok(())
}

async fn post_adjudication(
    State(s): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<AdjudicationRecord>), ApiError> {
    let unprocessable = |m: String| ApiError(StatusCode::UNPROCESSABLE_ENTITY, m);
    let new: NewAdjudication =
        serde_json::from_slice(&body).map_err(|e| unprocessable(e.to_string()))?;
    validate(&s.artifacts, &new).map_err(unprocessable)?;
    let record = AdjudicationRecord {
        standard_ref: new.standard_ref,
        spec_ref: new.spec_ref,
        decision: new.decision,
        note: new.note,
        reviewer: new.reviewer.trim().to_string(),
        created_at: Utc::now(),
    };
    let stored = s.store.lock().await.append(record).map_err(internal)?;
    Ok((StatusCode::CREATED, Json(stored)))
}

#[derive(Serialize)]
struct ExportRow {
    #[serde(rename = "ref")]
    ref_num: usize,
    id: String,
    steps: Vec<usize>,
    r2: Vec<f64>,
    accepted: Vec<usize>,
    rejected: Vec<usize>,
    flagged: Vec<usize>,
    decisions: Vec<AdjudicationRecord>,
}

async fn export(State(s): State<AppState>) -> Response {
    let latest = s.store.lock().await.latest();
    let a = &s.artifacts;
    let mut by_standard: BTreeMap<usize, Vec<AdjudicationRecord>> = BTreeMap::new();
    for r in &latest {
        by_standard.entry(r.standard_ref).or_default().push(r.clone());
    }
    let rows: Vec<ExportRow> = a
        .standards
        .statements()
        .iter()
        .map(|st| {
            let decisions = by_standard.remove(&st.ref_num).unwrap_or_default();
            let refs = |d: Decision| {
                let mut v: Vec<usize> = decisions
                    .iter()
                    .filter(|r| r.decision == d)
                    .map(|r| r.spec_ref)
                    .collect();
                v.dedup();
                v
            };
            let row = a.row(st.ref_num);
            ExportRow {
                ref_num: st.ref_num,
                id: st.id.clone(),
                steps: row.map(|r| r.steps.clone()).unwrap_or_default(),
                r2: row.map(|r| r.r2.clone()).unwrap_or_default(),
                accepted: refs(Decision::Accept),
                rejected: refs(Decision::Reject),
                flagged: refs(Decision::Flag),
                decisions,
            }
        })
        .collect();
    Json(json!({
        "manifest_sha256": a.manifest_sha256,
        "report": a.report,
        "crosswalk": rows,
    }))
    .into_response()
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/standards", get(standards))
        .route("/api/standards/{ref}/candidates", get(candidates))
        .route("/api/report", get(report))
        .route(
            "/api/adjudications",
            get(list_adjudications).post(post_adjudication),
        )
        .route("/api/export", get(export))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.nest_service("/ui", ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr`, prints the bound address and serves until interrupted.
pub async fn serve(dir: &Path, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<()> {
    let state = AppState::open(dir)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    let bound = listener.local_addr()?;
    println!("listening on http://{bound}");
    log::info!("serving {} on {bound}", dir.display());
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server error")
}
