//! HTTP service for enrolling drawn password characters and verifying
//! attempts.
//!
//! Routes (JSON bodies, `Content-Type: application/json` required):
//!
//! - `POST /api/users` `{user_id, password: [label]}` creates an empty
//!   enrollment: 201, 400 (empty or invalid input), 409 (exists).
//! - `POST /api/users/{id}/enroll` `{label, strokes: [[[x,y,t]]]}` appends
//!   one template: 200 with remaining counts, 404, 422.
//! - `POST /api/verify` `{user_id, attempts: [{label, strokes}], threshold?}`
//!   scores each character Z-vs-1 (enrolled template first), fuses by sum
//!   and decides `fused >= threshold`: 200, 404, 409 (incomplete), 422.
//! - `GET /api/calibration` returns `{threshold, far, frr, eer}`.

mod store;

pub use store::{EnrollmentRecord, EnrollmentStore, JsonFileStore, MemoryStore, StoreError};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use drawpass_core::evalproto::{compute_eer, fuse_password, score_zvs1, ProtocolReport, Scorer};
use drawpass_core::signal::{prepare, Point, SampleSource, StrokeSample, DEFAULT_RATE_HZ};
use drawpass_core::TimeFunctionSet;

/// Operating point served by `/api/calibration` and used as the default
/// decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
    pub eer: f64,
}

/// Score file accepted for calibration: either plain fused score lists or
/// a protocol report (the fused result with `password_length` characters).
#[derive(Debug, Clone, Deserialize)]
struct ScoreLists {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

impl Calibration {
    pub fn from_scores(genuine: &[f64], impostor: &[f64]) -> Result<Self, String> {
        let e = compute_eer(genuine, impostor).map_err(|e| e.to_string())?;
        Ok(Calibration {
            threshold: e.threshold,
            far: e.far,
            frr: e.frr,
            eer: e.eer,
        })
    }

    pub fn from_file(path: &std::path::Path, password_length: usize) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Ok(l) = serde_json::from_str::<ScoreLists>(&text) {
            return Self::from_scores(&l.genuine, &l.impostor);
        }
        let r = ProtocolReport::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let f = r
            .fused
            .iter()
            .find(|f| f.length == password_length)
            .ok_or_else(|| format!("report has no fused result of length {password_length}"))?;
        Self::from_scores(&f.genuine, &f.impostor)
    }
}

pub struct ServiceConfig {
    /// Templates required per label (Z).
    pub enroll_count: usize,
    pub scorer: Scorer,
    pub model_id: String,
    pub calibration: Calibration,
    /// Labels accepted in passwords; empty accepts any label.
    pub alphabet: Vec<String>,
    pub resample_rate_hz: f64,
    /// Keeps raw verification attempts in the store.
    pub debug_store_attempts: bool,
}

impl ServiceConfig {
    pub fn new(scorer: Scorer, calibration: Calibration) -> Self {
        ServiceConfig {
            enroll_count: 1,
            scorer,
            model_id: "none".into(),
            calibration,
            alphabet: vec![],
            resample_rate_hz: DEFAULT_RATE_HZ,
            debug_store_attempts: false,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    cfg: ServiceConfig,
    store: Box<dyn EnrollmentStore>,
    user_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(cfg: ServiceConfig, store: Box<dyn EnrollmentStore>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                cfg,
                store,
                user_locks: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn user_lock(&self, user: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.inner
            .user_locks
            .lock()
            .expect("lock table")
            .entry(user.to_string())
            .or_default()
            .clone()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/users", post(create_user))
        .route("/api/users/{id}/enroll", post(enroll))
        .route("/api/verify", post(verify))
        .route("/api/calibration", get(calibration))
        .with_state(state)
}

pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r {
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            JsonRejection::JsonDataError(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct CreateUser {
    pub user_id: String,
    pub password: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EnrollmentStatus {
    pub user_id: String,
    pub password: Vec<String>,
    pub required_per_label: usize,
    pub remaining: BTreeMap<String, usize>,
    pub remaining_total: usize,
    pub complete: bool,
}

fn status_of(r: &EnrollmentRecord) -> EnrollmentStatus {
    let remaining = r
        .password
        .iter()
        .map(|l| (l.clone(), r.remaining(l)))
        .collect();
    EnrollmentStatus {
        user_id: r.user_id.clone(),
        password: r.password.clone(),
        required_per_label: r.required_per_label,
        remaining,
        remaining_total: r.remaining_total(),
        complete: r.is_complete(),
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

async fn create_user(
    State(st): State<AppState>,
    body: Result<Json<CreateUser>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<EnrollmentStatus>)> {
    let Json(req) = body?;
    let cfg = &st.inner.cfg;
    if req.user_id.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "user_id must not be empty",
        ));
    }
    if req.password.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "password must list at least one label",
        ));
    }
    if let Some(bad) = req
        .password
        .iter()
        .find(|l| l.is_empty() || (!cfg.alphabet.is_empty() && !cfg.alphabet.contains(l)))
    {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("label {bad:?} is not in the password alphabet"),
        ));
    }
    let record = EnrollmentRecord {
        user_id: req.user_id.clone(),
        password: req.password,
        required_per_label: cfg.enroll_count,
        templates: BTreeMap::new(),
        created_at: now_secs(),
        model_id: cfg.model_id.clone(),
        debug_attempts: vec![],
    };
    let status = status_of(&record);
    if !st.inner.store.create(record)? {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("user {:?} already exists", req.user_id),
        ));
    }
    Ok((StatusCode::CREATED, Json(status)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Drawing {
    pub label: String,
    pub strokes: Vec<Vec<Point>>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EnrollResponse {
    pub label: String,
    pub remaining_for_label: usize,
    pub remaining_total: usize,
    pub complete: bool,
}

fn time_functions(cfg: &ServiceConfig, user: &str, d: &Drawing) -> ApiResult<TimeFunctionSet> {
    let sample = StrokeSample {
        user_id: user.to_string(),
        session: 1,
        label: d.label.clone(),
        repetition: 1,
        source: SampleSource::Live,
        strokes: d.strokes.clone(),
    };
    sample
        .validate()
        .and_then(|_| prepare(&sample, cfg.resample_rate_hz))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

async fn enroll(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Drawing>, JsonRejection>,
) -> ApiResult<Json<EnrollResponse>> {
    let Json(req) = body?;
    let lock = st.user_lock(&id);
    let _guard = lock.lock().await;
    let mut record = st
        .inner
        .store
        .get(&id)?
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown user {id:?}")))?;
    if !record.password.contains(&req.label) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("label {:?} is not part of the password", req.label),
        ));
    }
    if record.remaining(&req.label) == 0 {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!(
                "label {:?} already has {} template(s)",
                req.label, record.required_per_label
            ),
        ));
    }
    let tf = time_functions(&st.inner.cfg, &id, &req)?;
    record
        .templates
        .entry(req.label.clone())
        .or_default()
        .push(tf);
    let resp = EnrollResponse {
        label: req.label.clone(),
        remaining_for_label: record.remaining(&req.label),
        remaining_total: record.remaining_total(),
        complete: record.is_complete(),
    };
    st.inner.store.put(record)?;
    Ok(Json(resp))
}

#[derive(Debug, Deserialize)]
pub struct VerifyRequest {
    pub user_id: String,
    pub attempts: Vec<Drawing>,
    /// Overrides the calibrated threshold for this request.
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct CharacterScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyResponse {
    pub per_character_scores: Vec<CharacterScore>,
    pub fused_score: f64,
    pub decision: String,
    pub threshold: f64,
}

async fn verify(
    State(st): State<AppState>,
    body: Result<Json<VerifyRequest>, JsonRejection>,
) -> ApiResult<Json<VerifyResponse>> {
    let Json(req) = body?;
    let cfg = &st.inner.cfg;
    let record = st.inner.store.get(&req.user_id)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            format!("unknown user {:?}", req.user_id),
        )
    })?;
    if !record.is_complete() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!(
                "enrollment incomplete: {} template(s) missing",
                record.remaining_total()
            ),
        ));
    }
    let labels: Vec<&String> = req.attempts.iter().map(|a| &a.label).collect();
    if labels.len() != record.password.len()
        || labels.iter().zip(&record.password).any(|(a, b)| *a != b)
    {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "attempt labels must match the password, in order",
        ));
    }
    if let Some(t) = req.threshold.filter(|t| !t.is_finite()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("threshold {t} is not finite"),
        ));
    }
    let attempts = req
        .attempts
        .iter()
        .map(|a| time_functions(cfg, &req.user_id, a))
        .collect::<ApiResult<Vec<_>>>()?;

    let st2 = st.clone();
    let rec2 = record.clone();
    let scores = tokio::task::spawn_blocking(move || -> Result<Vec<CharacterScore>, String> {
        let cfg = &st2.inner.cfg;
        rec2.password
            .iter()
            .zip(&attempts)
            .map(|(label, test)| {
                let one = rec2.templates[label]
                    .iter()
                    .map(|t| cfg.scorer.score_sets(t, test).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                let score = score_zvs1(&one).map_err(|e| e.to_string())?;
                Ok(CharacterScore {
                    label: label.clone(),
                    score,
                })
            })
            .collect()
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))?;

    let per: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let fused = fuse_password(&per)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let threshold = req.threshold.unwrap_or(cfg.calibration.threshold);

    if cfg.debug_store_attempts {
        let lock = st.user_lock(&req.user_id);
        let _guard = lock.lock().await;
        if let Some(mut r) = st.inner.store.get(&req.user_id)? {
            r.debug_attempts
                .push(serde_json::to_value(&req.attempts).expect("attempts serialize"));
            st.inner.store.put(r)?;
        }
    }

    Ok(Json(VerifyResponse {
        per_character_scores: scores,
        fused_score: fused,
        decision: if fused >= threshold {
            "accept"
        } else {
            "reject"
        }
        .into(),
        threshold,
    }))
}

async fn calibration(State(st): State<AppState>) -> Json<Calibration> {
    Json(st.inner.cfg.calibration)
}
