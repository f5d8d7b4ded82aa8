//! HTTP service exposing the cascade.
//!
//! Routes:
//! - `POST /v1/check` with `{"text": "..."}` returns the check result plus
//!   `model_fingerprint`.
//! - `GET /v1/health` reports whether a cascade is loaded and its
//!   fingerprints.
//! - `GET /v1/model` describes the loaded bundles.
//!
//! Errors are `{"error": {"code": ..., "message": ...}}` with codes
//! `EMPTY_TEXT` and `MALFORMED_REQUEST` (400), `BODY_TOO_LARGE` (413) and
//! `NOT_LOADED` (503).

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use predelete_core::cascade::{load_cascade, CascadeBundle, CascadeFingerprints, CheckResult};
use predelete_core::setting::Setting;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_BODY_LIMIT: usize = 16_384;
pub const MIN_BODY_LIMIT: usize = 1_024;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub manifest: Option<PathBuf>,
    pub max_body_bytes: usize,
    pub request_log: Option<PathBuf>,
    /// `*` allows any origin; empty disables CORS headers.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            manifest: None,
            max_body_bytes: DEFAULT_BODY_LIMIT,
            request_log: None,
            cors_origins: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_body_bytes < MIN_BODY_LIMIT {
            return Err(format!(
                "max body size must be at least {MIN_BODY_LIMIT} bytes, got {}",
                self.max_body_bytes
            ));
        }
        for origin in &self.cors_origins {
            if origin != "*" && HeaderValue::from_str(origin).is_err() {
                return Err(format!("invalid CORS origin {origin:?}"));
            }
        }
        Ok(())
    }
}

/// Shared service state. The cascade sits behind a lock only long enough
/// to clone its `Arc`, so a reload never waits for in-flight checks and
/// in-flight checks finish on the cascade they started with.
pub struct AppState {
    cascade: RwLock<Option<Arc<CascadeBundle>>>,
    manifest: Option<PathBuf>,
    request_log: Option<Mutex<BufWriter<File>>>,
    salt: [u8; 16],
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> std::io::Result<Self> {
        let request_log = match &config.request_log {
            Some(path) => Some(Mutex::new(BufWriter::new(
                OpenOptions::new().create(true).append(true).open(path)?,
            ))),
            None => None,
        };
        Ok(AppState {
            cascade: RwLock::new(None),
            manifest: config.manifest.clone(),
            request_log,
            salt: rand::random(),
        })
    }

    pub fn with_cascade(config: &ServiceConfig, cascade: CascadeBundle) -> std::io::Result<Self> {
        let state = AppState::new(config)?;
        state.swap(cascade);
        Ok(state)
    }

    pub fn current(&self) -> Option<Arc<CascadeBundle>> {
        self.cascade.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn swap(&self, cascade: CascadeBundle) {
        *self.cascade.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(cascade));
    }

    /// Loads the manifest again and swaps the new cascade in. On failure
    /// the old cascade stays.
    pub fn reload(&self) -> predelete_core::Result<()> {
        let Some(path) = &self.manifest else {
            return Err(predelete_core::Error::Cascade("no manifest configured".into()));
        };
        let cascade = load_cascade(path)?;
        log::info!("loaded cascade {}", cascade.fingerprints().cascade);
        self.swap(cascade);
        Ok(())
    }

    /// Salted SHA-256 of the text; the text itself is never stored.
    pub fn text_hash(&self, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.salt);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    fn log_check(&self, text: &str, result: &CheckResult, fingerprint: &str) {
        let Some(log) = &self.request_log else { return };
        let entry = serde_json::json!({
            "ts": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            "text_sha256": self.text_hash(text),
            "deletion": result.deletion.label,
            "disinfo": result.disinfo.label,
            "reason": result.reason.as_ref().map(|r| r.label.as_str()),
            "warnings": result.warnings.iter().map(|w| w.code.as_str()).collect::<Vec<_>>(),
            "model_fingerprint": fingerprint,
        });
        let mut w = log.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(w, "{entry}").and_then(|_| w.flush()) {
            log::error!("request log write failed: {e}");
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: ErrorBody,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorResponse {
            error: ErrorBody {
                code: self.code.to_string(),
                message: self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

#[derive(Deserialize)]
struct CheckRequest {
    text: String,
}

/// Body of a successful `POST /v1/check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResponse {
    #[serde(flatten)]
    pub result: CheckResult,
    pub model_fingerprint: String,
}

async fn check(State(state): State<Arc<AppState>>, body: Result<Bytes, BytesRejection>) -> Result<Response, ApiError> {
    let body = body.map_err(|rejection| {
        if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "BODY_TOO_LARGE", "request body exceeds the size limit")
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "MALFORMED_REQUEST", rejection.body_text())
        }
    })?;
    let request: CheckRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "MALFORMED_REQUEST",
            format!("expected a JSON object with a string field \"text\": {e}"),
        )
    })?;
    if request.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "EMPTY_TEXT", "text is empty"));
    }
    let cascade = state
        .current()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "NOT_LOADED", "no cascade is loaded"))?;
    let result = cascade
        .check(&request.text)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?;
    let fingerprint = cascade.fingerprints().cascade.clone();
    state.log_check(&request.text, &result, &fingerprint);
    Ok(Json(CheckResponse {
        result,
        model_fingerprint: fingerprint,
    })
    .into_response())
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    loaded: bool,
    fingerprints: Option<CascadeFingerprints>,
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let cascade = state.current();
    Json(Health {
        status: if cascade.is_some() { "ok" } else { "not_loaded" },
        loaded: cascade.is_some(),
        fingerprints: cascade.map(|c| c.fingerprints().clone()),
    })
}

async fn model(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let cascade = state
        .current()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "NOT_LOADED", "no cascade is loaded"))?;
    let fp = cascade.fingerprints();
    let stage = |setting: Setting, fingerprint: &str| {
        let b = cascade.stage(setting);
        serde_json::json!({
            "kind": b.model().kind(),
            "labels": b.labels(),
            "vocabulary_size": b.vocabulary().len(),
            "normalization": b.normalization(),
            "metadata": b.metadata,
            "fingerprint": fingerprint,
        })
    };
    Ok(Json(serde_json::json!({
        "format_version": predelete_core::models::FORMAT_VERSION,
        "model_fingerprint": fp.cascade,
        "thresholds": cascade.thresholds(),
        "deletion": stage(Setting::Deletion, &fp.deletion),
        "disinfo": stage(Setting::Disinfo, &fp.disinfo),
        "reason": stage(Setting::Reason, &fp.reason),
    })))
}

fn cors(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    )
}

pub fn router(state: Arc<AppState>, config: &ServiceConfig) -> Router {
    let router = Router::new()
        .route("/v1/check", post(check))
        .route("/v1/health", get(health))
        .route("/v1/model", get(model))
        .layer(DefaultBodyLimit::max(config.max_body_bytes))
        .with_state(state);
    match cors(&config.cors_origins) {
        Some(layer) => router.layer(layer),
        None => router,
    }
}

/// Binds, then serves until ctrl-c / SIGTERM. SIGHUP reloads the manifest.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    config.validate()?;
    let state = Arc::new(AppState::new(&config)?);
    if config.manifest.is_some() {
        state.reload()?;
    } else {
        log::warn!("no manifest configured; /v1/check will answer 503 until one is loaded");
    }
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    spawn_reload_on_hangup(state.clone());
    axum::serve(listener, router(state, &config))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    Ok(())
}

#[cfg(unix)]
fn spawn_reload_on_hangup(state: Arc<AppState>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hangups) = signal(SignalKind::hangup()) else {
        log::warn!("cannot install SIGHUP handler; reload disabled");
        return;
    };
    tokio::spawn(async move {
        while hangups.recv().await.is_some() {
            let state = state.clone();
            match tokio::task::spawn_blocking(move || state.reload()).await {
                Ok(Ok(())) => {}
                Ok(Err(e)) => log::error!("reload failed, keeping the current cascade: {e}"),
                Err(e) => log::error!("reload task failed: {e}"),
            }
        }
    });
}

#[cfg(not(unix))]
fn spawn_reload_on_hangup(_state: Arc<AppState>) {}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    log::info!("shutting down");
}

#[cfg(test)]
mod tests {
    use predelete_core::cascade::{fixture, save_cascade};

    use super::*;

    async fn spawn(state: Arc<AppState>, config: &ServiceConfig) -> String {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = router(state, config);
        tokio::spawn(async move { axum::serve(listener, app).await });
        format!("http://{addr}")
    }

    async fn post(base: &str, body: &str) -> (StatusCode, serde_json::Value) {
        let response = reqwest::Client::new()
            .post(format!("{base}/v1/check"))
            .body(body.to_string())
            .send()
            .await
            .unwrap();
        let status = StatusCode::from_u16(response.status().as_u16()).unwrap();
        let bytes = response.bytes().await.unwrap();
        (status, serde_json::from_slice(&bytes).unwrap())
    }

    async fn get_json(url: String) -> serde_json::Value {
        let bytes = reqwest::get(url).await.unwrap().bytes().await.unwrap();
        serde_json::from_slice(&bytes).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ServiceConfig::default().validate().is_ok());
        let small = ServiceConfig {
            max_body_bytes: 10,
            ..Default::default()
        };
        assert!(small.validate().is_err());
        let bad_origin = ServiceConfig {
            cors_origins: vec!["bad\norigin".into()],
            ..Default::default()
        };
        assert!(bad_origin.validate().is_err());
    }

    #[tokio::test]
    async fn unloaded_service_reports_503() {
        let config = ServiceConfig::default();
        let base = spawn(Arc::new(AppState::new(&config).unwrap()), &config).await;
        let health = get_json(format!("{base}/v1/health")).await;
        assert_eq!(health["status"], "not_loaded");
        assert_eq!(health["loaded"], false);
        let (status, body) = post(&base, r#"{"text":"hello"}"#).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        assert_eq!(body["error"]["code"], "NOT_LOADED");
    }

    #[tokio::test]
    async fn malformed_requests() {
        let config = ServiceConfig::default();
        let base = spawn(Arc::new(AppState::with_cascade(&config, fixture::cascade()).unwrap()), &config).await;
        for body in ["not json", r#"{"txt":"x"}"#, r#"{"text":3}"#] {
            let (status, json) = post(&base, body).await;
            assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
            assert_eq!(json["error"]["code"], "MALFORMED_REQUEST", "{body}");
        }
        let (status, json) = post(&base, r#"{"text":"you are all vermin"}"#).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(json["reason"]["label"], "hate_speech");
        assert_eq!(json["warnings"][0]["code"], "DELETE_RISK");
        let model = get_json(format!("{base}/v1/model")).await;
        assert_eq!(model["model_fingerprint"], json["model_fingerprint"]);
        assert_eq!(model["reason"]["labels"].as_array().unwrap().len(), 4);
    }

    #[tokio::test]
    async fn request_log_holds_hashes_only() {
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("requests.jsonl");
        let config = ServiceConfig {
            request_log: Some(log_path.clone()),
            ..Default::default()
        };
        let state = Arc::new(AppState::with_cascade(&config, fixture::cascade()).unwrap());
        let base = spawn(state.clone(), &config).await;
        post(&base, r#"{"text":"good morning everyone"}"#).await;
        let log = std::fs::read_to_string(&log_path).unwrap();
        assert!(!log.contains("morning"));
        let entry: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(entry["text_sha256"], state.text_hash("good morning everyone"));
        assert_eq!(entry["deletion"], "not_deleted");
        assert_eq!(entry["reason"], serde_json::Value::Null);
    }

    #[tokio::test]
    async fn cors_header_for_allowed_origin() {
        let config = ServiceConfig {
            cors_origins: vec!["http://localhost:5173".into()],
            ..Default::default()
        };
        let base = spawn(Arc::new(AppState::new(&config).unwrap()), &config).await;
        let response = reqwest::Client::new()
            .get(format!("{base}/v1/health"))
            .header("origin", "http://localhost:5173")
            .send()
            .await
            .unwrap();
        assert_eq!(
            response.headers().get("access-control-allow-origin").unwrap(),
            "http://localhost:5173"
        );
    }

    #[test]
    fn reload_swaps_and_keeps_old_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_cascade(&fixture::cascade(), dir.path()).unwrap();
        let config = ServiceConfig {
            manifest: Some(manifest.clone()),
            ..Default::default()
        };
        let state = AppState::new(&config).unwrap();
        assert!(state.current().is_none());
        state.reload().unwrap();
        let loaded = state.current().unwrap().fingerprints().cascade.clone();
        std::fs::write(dir.path().join("reason.bundle"), b"garbage").unwrap();
        assert!(state.reload().is_err());
        assert_eq!(state.current().unwrap().fingerprints().cascade, loaded);
        assert!(AppState::new(&ServiceConfig::default()).unwrap().reload().is_err());
    }
}
