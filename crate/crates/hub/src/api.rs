//! Read-only JSON API over a challenge store.
//!
//! | Route                                 | Body                                              |
//! |---------------------------------------|---------------------------------------------------|
//! | `GET /api/rounds`                     | rounds with status, targets and submission counts |
//! | `GET /api/leaderboard`                | leaderboard rows, ranked then reference           |
//! | `GET /api/forecasts?target=&round=`   | every forecaster's quantiles plus observations    |
//! | `GET /api/observations?target=`       | realized values                                   |
//! | `GET /api/scores?target=&horizon=`    | score records, both filters optional              |
//! | `GET /api/analysis/coverage`          | interval coverage per forecaster and cell         |
//! | `GET /api/analysis/share-beating-benchmark` | weekly share of participants beating it     |
//!
//! Every request reads the current files; the service never writes.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, NaiveDate, Utc};
use qhub_core::ingest::dax_observation;
use qhub_core::{Horizon, RoundSpec, TargetKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::pipeline::{Hub, HubError, REFERENCE_ALIASES};
use crate::store::{read_json, RoundStatus, StoreError};

#[derive(Clone)]
struct AppState {
    root: Arc<PathBuf>,
}

impl AppState {
    fn hub(&self) -> Result<Hub, ApiError> {
        Ok(Hub::open(self.root.as_ref().clone())?)
    }
}

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Internal(String),
}

impl From<HubError> for ApiError {
    fn from(e: HubError) -> Self {
        match e {
            HubError::UnknownRound(d) => ApiError::NotFound(format!("round {d} does not exist")),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(root: impl Into<PathBuf>) -> Router {
    let state = AppState { root: Arc::new(root.into()) };
    Router::new()
        .route("/api/rounds", get(rounds))
        .route("/api/leaderboard", get(leaderboard))
        .route("/api/forecasts", get(forecasts))
        .route("/api/observations", get(observations))
        .route("/api/scores", get(scores))
        .route("/api/analysis/coverage", get(coverage))
        .route("/api/analysis/share-beating-benchmark", get(share))
        .with_state(state)
}

/// Checks that a store can be served before binding a port.
pub fn check_store(root: impl Into<PathBuf>) -> Result<(), HubError> {
    let hub = Hub::open(root)?;
    hub.store().state()?;
    let lb = hub.store().leaderboard_json_path();
    if lb.exists() {
        read_json::<Value>(&lb)?;
    }
    Ok(())
}

fn parse_target(s: Option<&str>) -> Result<TargetKind, ApiError> {
    let s = s.ok_or_else(|| ApiError::BadRequest("missing query parameter `target`".into()))?;
    s.parse().map_err(|_| ApiError::BadRequest(format!("unknown target {s:?}")))
}

fn published(path: PathBuf) -> Result<Value, ApiError> {
    if !path.exists() {
        return Err(ApiError::NotFound("nothing published yet; run `hub leaderboard`".into()));
    }
    Ok(read_json(&path)?)
}

#[derive(Serialize)]
struct RoundView {
    round_date: NaiveDate,
    status: RoundStatus,
    targets: Vec<TargetKind>,
    accepted_submissions: usize,
    rejected_files: usize,
}

async fn rounds(State(app): State<AppState>) -> ApiResult<Vec<RoundView>> {
    let hub = app.hub()?;
    let state = hub.store().state()?;
    let mut out = Vec::new();
    for (&date, entry) in &state.rounds {
        let index = hub.store().submission_index(date)?;
        out.push(RoundView {
            round_date: date,
            status: entry.status,
            targets: entry.targets.clone(),
            accepted_submissions: index.accepted_aliases().count(),
            rejected_files: index.aliases.values().flatten().filter(|v| !v.accepted).count(),
        });
    }
    Ok(Json(out))
}

async fn leaderboard(State(app): State<AppState>) -> ApiResult<Value> {
    let hub = app.hub()?;
    let mut doc = published(hub.store().leaderboard_json_path())?;
    Ok(Json(doc.get_mut("rows").map(Value::take).unwrap_or(Value::Array(Vec::new()))))
}

#[derive(Deserialize)]
struct ForecastQuery {
    target: Option<String>,
    round: Option<String>,
}

#[derive(Serialize)]
struct ForecastView {
    alias: String,
    reference: bool,
    horizon: Horizon,
    quantiles: [f64; 5],
}

#[derive(Serialize)]
struct CellObservation {
    horizon: Horizon,
    valid_time: DateTime<Utc>,
    value: Option<f64>,
}

#[derive(Serialize)]
struct ForecastsView {
    round_date: NaiveDate,
    target: TargetKind,
    forecasts: Vec<ForecastView>,
    observations: Vec<CellObservation>,
}

async fn forecasts(State(app): State<AppState>, Query(q): Query<ForecastQuery>) -> ApiResult<ForecastsView> {
    let target = parse_target(q.target.as_deref())?;
    let round_s = q.round.ok_or_else(|| ApiError::BadRequest("missing query parameter `round`".into()))?;
    let date: NaiveDate = round_s.parse().map_err(|_| ApiError::BadRequest(format!("bad round date {round_s:?}")))?;
    let hub = app.hub()?;
    let round = hub.round_spec(date)?;
    if !round.covers(target) {
        return Err(ApiError::NotFound(format!("round {date} has no {target} forecasts")));
    }

    let mut forecasts = Vec::new();
    let participants = hub.submissions(&round)?;
    let references = hub.reference_forecasts(&round)?;
    for (alias, sub) in participants.iter().chain(references.iter()) {
        for row in sub.rows().iter().filter(|r| r.target() == target) {
            forecasts.push(ForecastView {
                alias: alias.clone(),
                reference: REFERENCE_ALIASES.contains(&alias.as_str()),
                horizon: row.horizon(),
                quantiles: *row.quantiles(),
            });
        }
    }
    let observations = hub
        .round_observations(&round)?
        .into_iter()
        .filter(|((t, _), _)| *t == target)
        .map(|((_, horizon), (valid_time, value))| CellObservation { horizon, valid_time, value })
        .collect();
    Ok(Json(ForecastsView { round_date: date, target, forecasts, observations }))
}

#[derive(Deserialize)]
struct TargetQuery {
    target: Option<String>,
}

#[derive(Serialize)]
struct ObservationView {
    valid_time: DateTime<Utc>,
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    round_date: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<Horizon>,
}

async fn observations(State(app): State<AppState>, Query(q): Query<TargetQuery>) -> ApiResult<Vec<ObservationView>> {
    let target = parse_target(q.target.as_deref())?;
    let hub = app.hub()?;
    if target.is_weather() {
        let series = hub.observations(target)?;
        return Ok(Json(
            series
                .iter()
                .map(|(valid_time, v)| ObservationView { valid_time, value: Some(v), round_date: None, horizon: None })
                .collect(),
        ));
    }
    // Index returns exist only relative to a round's anchor close.
    let Some(prices) = hub.prices()? else { return Ok(Json(Vec::new())) };
    let state = hub.store().state()?;
    let mut out = Vec::new();
    for (&date, entry) in &state.rounds {
        let round = RoundSpec::new(date, &entry.targets).map_err(|e| ApiError::Internal(e.to_string()))?;
        if !round.covers(TargetKind::Dax) {
            continue;
        }
        for &h in TargetKind::Dax.horizons() {
            if let Ok(obs) = dax_observation(&prices, &round, h) {
                out.push(ObservationView {
                    valid_time: obs.valid_time,
                    value: obs.value(),
                    round_date: Some(date),
                    horizon: Some(h),
                });
            }
        }
    }
    Ok(Json(out))
}

#[derive(Deserialize)]
struct ScoreQuery {
    target: Option<String>,
    horizon: Option<String>,
}

async fn scores(State(app): State<AppState>, Query(q): Query<ScoreQuery>) -> ApiResult<Vec<qhub_core::scoring::ScoreRecord>> {
    let target = q.target.as_deref().map(|t| parse_target(Some(t))).transpose()?;
    let horizon = q
        .horizon
        .as_deref()
        .map(|h| h.parse::<Horizon>().map_err(|_| ApiError::BadRequest(format!("bad horizon {h:?}"))))
        .transpose()?;
    let hub = app.hub()?;
    let records = hub
        .all_records()?
        .into_iter()
        .filter(|r| target.is_none_or(|t| r.target == t) && horizon.is_none_or(|h| r.horizon == h))
        .collect();
    Ok(Json(records))
}

async fn coverage(State(app): State<AppState>) -> ApiResult<Value> {
    let hub = app.hub()?;
    Ok(Json(published(hub.store().analysis_path("coverage"))?))
}

async fn share(State(app): State<AppState>) -> ApiResult<Value> {
    let hub = app.hub()?;
    Ok(Json(published(hub.store().analysis_path("share_beating_benchmark"))?))
}
