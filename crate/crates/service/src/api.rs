//! HTTP handlers. Columns are 1-based on the wire.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use classtree::consult::{AnswerMode, ConsultError, Session, SessionView, Status};
use classtree::methods::solve;
use classtree::model::validate;
use classtree::{ClassTree, EntropyRule, HeuristicConfig, Method, Problem, ProblemFile, ValidationReport};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::journal::Event;
use crate::store::{SessionEntry, Store};

pub type AppState = Arc<Store>;

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    Invalid(ValidationReport),
    NotFound(String),
    Conflict(String),
    Unprocessable(String),
    NoMatch(Box<SessionBody>),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::Invalid(report) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "invalid problem", "report": report }),
            ),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, json!({ "error": m })),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": m })),
            ApiError::NoMatch(session) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": "answers match no known pattern", "session": session }),
            ),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::Internal(format!("journal: {e}"))
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionBody {
    pub id: String,
    pub problem_id: String,
    #[serde(flatten)]
    pub view: SessionView,
}

fn body_of(entry: &SessionEntry) -> SessionBody {
    SessionBody {
        id: entry.id.clone(),
        problem_id: entry.problem_id.clone(),
        view: entry.session.view(),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/problems", post(create_problem).get(list_problems))
        .route("/api/problems/{id}", get(get_problem))
        .route("/api/problems/{id}/tree", get(get_tree))
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session).delete(delete_session))
        .route("/api/sessions/{id}/answers", post(answer))
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::BadRequest(format!("malformed request body: {e}")))
}

fn problem_of(state: &Store, id: &str) -> Result<Arc<Problem>, ApiError> {
    state
        .problem(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown problem {id}")))
}

async fn create_problem(
    State(state): State<AppState>,
    body: String,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let file: ProblemFile = parse_json(&body)?;
    let report = validate(&file);
    if !report.is_valid() {
        return Err(ApiError::Invalid(report));
    }
    let problem = Problem::from_file(file).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let warnings: Vec<String> = problem.warnings().iter().map(|v| v.message.clone()).collect();
    let id = state.add_problem(problem)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "warnings": warnings }))))
}

async fn list_problems(State(state): State<AppState>) -> Json<serde_json::Value> {
    let problems: Vec<serde_json::Value> = state
        .problem_ids()
        .into_iter()
        .filter_map(|id| {
            let p = state.problem(&id)?;
            Some(json!({ "id": id, "rows": p.num_rows(), "cols": p.num_cols() }))
        })
        .collect();
    Json(json!({ "problems": problems }))
}

async fn get_problem(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let problem = problem_of(&state, &id)?;
    Ok(Json(json!({ "id": id, "problem": problem.to_file() })))
}

fn parse_method(name: &str) -> Result<Method, ApiError> {
    name.parse().map_err(ApiError::BadRequest)
}

fn parse_rule(name: Option<&str>) -> Result<EntropyRule, ApiError> {
    name.map_or(Ok(EntropyRule::default()), |r| r.parse().map_err(ApiError::BadRequest))
}

#[derive(Debug, Deserialize)]
pub struct TreeQuery {
    method: Option<String>,
    entropy_rule: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct TreeBody {
    problem_id: String,
    method: Method,
    entropy_rule: EntropyRule,
    cost: f64,
    tree: ClassTree,
    rendered: String,
}

async fn get_tree(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<TreeQuery>,
) -> Result<Json<TreeBody>, ApiError> {
    let problem = problem_of(&state, &id)?;
    let method = parse_method(
        query
            .method
            .as_deref()
            .ok_or_else(|| ApiError::BadRequest("missing query parameter method".into()))?,
    )?;
    let entropy_rule = parse_rule(query.entropy_rule.as_deref())?;
    let config = HeuristicConfig { entropy_rule };
    let body = tokio::task::spawn_blocking(move || {
        solve(&problem, method, config).map(|solved| TreeBody {
            problem_id: id,
            method,
            entropy_rule,
            cost: solved.cost,
            rendered: solved.tree.render(&problem),
            tree: solved.tree,
        })
    })
    .await?
    .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    Ok(Json(body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(alias = "problemId")]
    problem_id: String,
    strategy: String,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default, alias = "entropyRule")]
    entropy_rule: Option<String>,
}

async fn create_session(
    State(state): State<AppState>,
    body: String,
) -> Result<(StatusCode, Json<SessionBody>), ApiError> {
    let req: CreateSession = parse_json(&body)?;
    let problem = problem_of(&state, &req.problem_id)?;
    let strategy = parse_method(&req.strategy)?;
    let mode: AnswerMode = req
        .mode
        .as_deref()
        .map_or(Ok(AnswerMode::default()), str::parse)
        .map_err(ApiError::BadRequest)?;
    let config = HeuristicConfig {
        entropy_rule: parse_rule(req.entropy_rule.as_deref())?,
    };
    let session = tokio::task::spawn_blocking(move || Session::new(problem, strategy, mode, config))
        .await?
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let handle = state.add_session(req.problem_id, session)?;
    let entry = handle.lock().await;
    Ok((StatusCode::CREATED, Json(body_of(&entry))))
}

async fn list_sessions(State(state): State<AppState>) -> Json<serde_json::Value> {
    let mut rows = Vec::new();
    for handle in state.sessions() {
        let entry = handle.lock().await;
        rows.push(json!({
            "id": entry.id,
            "problemId": entry.problem_id,
            "strategy": entry.session.strategy(),
            "status": entry.session.status(),
        }));
    }
    rows.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));
    Json(json!({ "sessions": rows }))
}

fn session_of(state: &Store, id: &str) -> Result<crate::store::SessionHandle, ApiError> {
    state
        .session(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionBody>, ApiError> {
    let handle = session_of(&state, &id)?;
    let entry = handle.lock().await;
    Ok(Json(body_of(&entry)))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let handle = session_of(&state, &id)?;
    // Wait for any answer in flight before removing.
    let _guard = handle.lock().await;
    if state.remove_session(&id)? {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::NotFound(format!("unknown session {id}")))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    column: usize,
    value: bool,
}

async fn answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> Result<Json<SessionBody>, ApiError> {
    let req: AnswerRequest = parse_json(&body)?;
    let handle = session_of(&state, &id)?;
    let mut entry = handle.lock().await;
    if state.session(&id).is_none() {
        return Err(ApiError::NotFound(format!("unknown session {id}")));
    }
    let cols = entry.session.problem().num_cols();
    if req.column == 0 || req.column > cols {
        return Err(ApiError::BadRequest(format!(
            "column {} out of range 1..={cols}",
            req.column
        )));
    }
    let column = req.column - 1;
    let mut next = entry.session.clone();
    let result = tokio::task::spawn_blocking(move || {
        let r = next.answer(column, req.value);
        (next, r)
    })
    .await?;
    let (next, outcome) = result;
    match outcome {
        Ok(()) | Err(ConsultError::NoMatch) => {}
        Err(e @ (ConsultError::Settled | ConsultError::NotRecommended { .. } | ConsultError::AlreadyObserved(_))) => {
            return Err(ApiError::Conflict(one_based(&e)));
        }
        Err(e @ ConsultError::ColumnOutOfRange { .. }) => return Err(ApiError::BadRequest(one_based(&e))),
        Err(e @ ConsultError::Infeasible(_)) => return Err(ApiError::Unprocessable(e.to_string())),
    }
    state.record(&Event::Answer {
        session: id,
        column,
        value: req.value,
    })?;
    entry.session = next;
    let body = body_of(&entry);
    if entry.session.status() == &Status::NoMatch {
        return Err(ApiError::NoMatch(Box::new(body)));
    }
    Ok(Json(body))
}

/// Error text with columns shifted to the 1-based wire convention.
fn one_based(e: &ConsultError) -> String {
    match e {
        ConsultError::NotRecommended {
            column,
            recommended,
        } => format!(
            "strict mode: column {} answered but column {} is recommended",
            column + 1,
            recommended + 1
        ),
        ConsultError::AlreadyObserved(c) => format!("column {} was already inspected", c + 1),
        other => other.to_string(),
    }
}
