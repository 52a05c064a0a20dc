//! Read-only HTTP/JSON admin API.

use std::sync::Arc;

use axum::extract::{Query, State as AxumState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bigbird_core::observability::audit::{audit_query, AuditAction, AuditEvent, AuditFilter};
use bigbird_core::observability::info_schema::{info_schema_query, JobFilter, Scope};
use bigbird_core::observability::{MetricName, MetricSeries};
use bigbird_core::platform::State;
use bigbird_core::slots::{JobKind, JobState};
use bigbird_core::Timestamp;
use serde::Deserialize;

/// What the API serves: a state snapshot and the audit log read alongside it.
#[derive(Debug)]
pub struct ApiState {
    pub state: State,
    pub audit: Vec<AuditEvent>,
}

pub fn router(state: Arc<ApiState>) -> Router {
    Router::new()
        .route("/v1/metrics", get(metrics))
        .route("/v1/jobs", get(jobs))
        .route("/v1/audit", get(audit))
        .with_state(state)
}

fn bad_request(message: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(serde_json::json!({ "error": message }))).into_response()
}

#[derive(Debug, Default, Deserialize)]
pub struct MetricsParams {
    pub metric: Option<String>,
    pub project: Option<String>,
}

/// Series matching the metric name and project dimension filters.
pub fn filter_series(state: &State, metric: Option<MetricName>, project: Option<&str>) -> Vec<MetricSeries> {
    state
        .metrics
        .series()
        .filter(|s| metric.is_none_or(|m| s.metric == m))
        .filter(|s| project.is_none_or(|p| s.dimensions.get("project").map(String::as_str) == Some(p)))
        .collect()
}

async fn metrics(AxumState(api): AxumState<Arc<ApiState>>, Query(p): Query<MetricsParams>) -> Response {
    let metric = match p.metric.as_deref().map(|m| MetricName::parse(m).ok_or(m)) {
        Some(Err(m)) => return bad_request(format!("unknown metric `{m}`")),
        Some(Ok(m)) => Some(m),
        None => None,
    };
    Json(filter_series(&api.state, metric, p.project.as_deref())).into_response()
}

#[derive(Debug, Default, Deserialize)]
pub struct JobsParams {
    pub project: Option<String>,
    #[serde(rename = "type")]
    pub job_type: Option<String>,
    pub state: Option<String>,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

async fn jobs(AxumState(api): AxumState<Arc<ApiState>>, Query(p): Query<JobsParams>) -> Response {
    let job_type = match p.job_type.as_deref() {
        Some(t) => match JobKind::parse(t) {
            Some(k) => Some(k),
            None => return bad_request(format!("unknown job type `{t}`")),
        },
        None => None,
    };
    let state = match p.state.as_deref() {
        Some(s) => match JobState::parse(s) {
            Some(k) => Some(k),
            None => return bad_request(format!("unknown job state `{s}`")),
        },
        None => None,
    };
    let filter = JobFilter {
        project: None,
        job_type,
        state,
        from: p.from.map(Timestamp),
        to: p.to.map(Timestamp),
    };
    let scope = match p.project {
        Some(project) => Scope::Project(project),
        None => Scope::Organization,
    };
    let s = &api.state;
    match info_schema_query(&s.cloud, &s.slots, &s.ingestion, &scope, &filter) {
        Ok(rows) => Json(rows).into_response(),
        Err(e) => (StatusCode::NOT_FOUND, Json(serde_json::json!({ "error": e.to_string() }))).into_response(),
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct AuditParams {
    pub principal: Option<String>,
    pub action: Option<String>,
    pub resource: Option<String>,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

async fn audit(AxumState(api): AxumState<Arc<ApiState>>, Query(p): Query<AuditParams>) -> Response {
    let action = match p.action.as_deref() {
        Some(a) => match AuditAction::parse(a) {
            Some(a) => Some(a),
            None => return bad_request(format!("unknown audit action `{a}`")),
        },
        None => None,
    };
    let filter = AuditFilter {
        principal: p.principal,
        action,
        resource_prefix: p.resource,
        from: p.from.map(Timestamp),
        to: p.to.map(Timestamp),
    };
    Json(audit_query(&api.audit, &filter)).into_response()
}

pub async fn serve(listen: &str, api: Arc<ApiState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    axum::serve(listener, router(api)).await
}
