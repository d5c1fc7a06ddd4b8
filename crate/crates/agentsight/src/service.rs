//! HTTP ingestion service for real-time scoring of streamed runs.
//!
//! Events arrive one per request and accumulate in per-run sessions; closing
//! a run validates it, scores it with the loaded detector bundle, and
//! returns the verdict. Scores are computed exactly as in offline detection,
//! so a streamed run and the same run scored from a file produce
//! bit-identical values. Anomalous closes are appended to an alerts JSONL
//! file when one is configured.
//!
//! Endpoints:
//! - `POST /v1/events`: append one event (JSON body) to its run's session
//! - `POST /v1/runs/{id}/close`: validate, score, return verdict
//! - `GET /v1/runs/{id}`: session status
//! - `GET /v1/healthz`: liveness and bundle state

use std::collections::HashMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::detector::{TrainedDetector, Verdict};
use crate::event::{parse_event_line, validate_run, Event, GroundTruth, RunLog, Violation};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Append-only JSONL file receiving one record per anomalous close.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alerts_path: Option<PathBuf>,
    /// Static bearer token required on all /v1 endpoints except healthz.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bearer_token: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloseResponse {
    pub run_id: String,
    pub verdict: Verdict,
    pub score: f64,
    pub latency_ms: f64,
}

struct ClosedSession {
    response: CloseResponse,
    event_count: usize,
}

enum Session {
    Open(Vec<Event>),
    /// A close is in flight; events and further closes are rejected.
    Closing,
    Closed(ClosedSession),
}

pub struct ServiceState {
    detector: Option<Arc<TrainedDetector>>,
    sessions: Mutex<HashMap<String, Session>>,
    alerts: Mutex<()>,
    config: ServiceConfig,
}

impl ServiceState {
    pub fn new(detector: Option<Arc<TrainedDetector>>, config: ServiceConfig) -> Self {
        Self { detector, sessions: Mutex::new(HashMap::new()), alerts: Mutex::new(()), config }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/events", post(ingest_event))
        .route("/v1/runs/{id}/close", post(close_run))
        .route("/v1/runs/{id}", get(run_status))
        .route("/v1/healthz", get(healthz))
        .with_state(state)
}

/// Binds the router to an already-bound listener and serves until shutdown.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<ServiceState>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

fn error_body(code: &str, detail: impl Into<String>) -> Value {
    json!({ "code": code, "detail": detail.into() })
}

fn unauthorized() -> Response {
    (StatusCode::UNAUTHORIZED, Json(error_body("unauthorized", "missing or wrong bearer token")))
        .into_response()
}

fn authorize(state: &ServiceState, headers: &HeaderMap) -> Result<(), Response> {
    let Some(expected) = &state.config.bearer_token else {
        return Ok(());
    };
    let presented = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(expected.as_str()) {
        Ok(())
    } else {
        Err(unauthorized())
    }
}

/// Field requirements per event kind: (field, expected JSON shape).
fn required_fields(kind: &str) -> Option<&'static [(&'static str, FieldShape)]> {
    use FieldShape as F;
    match kind {
        "ApplicationStarted" => Some(&[
            ("user_inputs", F::Str),
            ("application_data", F::Str),
            ("llm_models", F::StrArray),
            ("system_data", F::Str),
        ]),
        "AgentStarted" => Some(&[("agent", F::Agent), ("agent_data", F::Str)]),
        "LlmCall" => Some(&[
            ("agent", F::Agent),
            ("iteration", F::Uint),
            ("input", F::Str),
            ("output", F::Str),
            ("duration_ms", F::Uint),
            ("prompt_tokens", F::Uint),
            ("completion_tokens", F::Uint),
            ("model_version", F::Str),
        ]),
        "ToolUsage" => Some(&[
            ("agent", F::Agent),
            ("tool_name", F::Str),
            ("usage_count", F::Uint),
            ("input", F::Str),
            ("output", F::Str),
            ("failed", F::Bool),
        ]),
        "AgentFinished" => Some(&[
            ("agent", F::Agent),
            ("task_output", F::Str),
            ("duration_ms", F::Uint),
            ("tools_used", F::UintMap),
            ("llm_call_count", F::Uint),
        ]),
        "ApplicationEnded" => Some(&[
            ("output", F::Str),
            ("prompt_tokens_total", F::Uint),
            ("completion_tokens_total", F::Uint),
        ]),
        "ErrorEvent" => Some(&[("agent", F::Agent), ("message", F::Str)]),
        _ => None,
    }
}

#[derive(Clone, Copy)]
enum FieldShape {
    Str,
    Uint,
    Bool,
    StrArray,
    UintMap,
    Agent,
}

impl FieldShape {
    fn name(self) -> &'static str {
        match self {
            FieldShape::Str => "string",
            FieldShape::Uint => "unsigned integer",
            FieldShape::Bool => "boolean",
            FieldShape::StrArray => "array of strings",
            FieldShape::UintMap => "object of unsigned integers",
            FieldShape::Agent => "agent object",
        }
    }

    fn matches(self, value: &Value) -> bool {
        match self {
            FieldShape::Str => value.is_string(),
            FieldShape::Uint => value.is_u64(),
            FieldShape::Bool => value.is_boolean(),
            FieldShape::StrArray => {
                value.as_array().is_some_and(|a| a.iter().all(Value::is_string))
            }
            FieldShape::UintMap => {
                value.as_object().is_some_and(|m| m.values().all(Value::is_u64))
            }
            FieldShape::Agent => {
                value.as_object().is_some_and(|a| {
                    a.get("index").is_some_and(Value::is_u64)
                        && a.get("name").is_some_and(Value::is_string)
                })
            }
        }
    }
}

/// Checks the flat event schema and names the offending field path on
/// failure. Run before serde so clients get a precise 400.
fn check_event_schema(value: &Value) -> Result<(), (String, String)> {
    let object = value
        .as_object()
        .ok_or_else(|| ("(body)".to_string(), "event must be a JSON object".to_string()))?;
    for (field, shape) in [("run_id", FieldShape::Str), ("kind", FieldShape::Str)] {
        match object.get(field) {
            None => return Err((field.into(), "missing required field".into())),
            Some(v) if !shape.matches(v) => {
                return Err((field.into(), format!("expected {}", shape.name())));
            }
            Some(_) => {}
        }
    }
    match object.get("timestamp_ms") {
        None => return Err(("timestamp_ms".into(), "missing required field".into())),
        Some(v) if !v.is_u64() => {
            return Err(("timestamp_ms".into(), "expected unsigned integer".into()));
        }
        Some(_) => {}
    }
    let kind = object["kind"].as_str().expect("checked above");
    let Some(fields) = required_fields(kind) else {
        return Err(("kind".into(), format!("unknown event kind {kind:?}")));
    };
    for &(field, shape) in fields {
        match object.get(field) {
            None => return Err((field.into(), "missing required field".into())),
            Some(v) if !shape.matches(v) => {
                let path = if matches!(shape, FieldShape::Agent) && v.is_object() {
                    format!("{field}.index|name")
                } else {
                    field.to_string()
                };
                return Err((path, format!("expected {}", shape.name())));
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn schema_violation(path: String, detail: String) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({ "code": "schema_violation", "path": path, "detail": detail })),
    )
        .into_response()
}

async fn ingest_event(
    State(state): State<Arc<ServiceState>>,
    headers: HeaderMap,
    body: String,
) -> Response {
    if let Err(response) = authorize(&state, &headers) {
        return response;
    }
    let value: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return schema_violation("(body)".into(), format!("invalid JSON: {e}")),
    };
    if let Err((path, detail)) = check_event_schema(&value) {
        return schema_violation(path, detail);
    }
    let event: Event = match parse_event_line(&body) {
        Ok(event) => event,
        Err(e) => return schema_violation("(event)".into(), e.to_string()),
    };

    let mut sessions = state.sessions.lock().expect("sessions lock");
    let session = sessions
        .entry(event.run_id.clone())
        .or_insert_with(|| Session::Open(Vec::new()));
    match session {
        Session::Open(events) => {
            events.push(event);
            let count = events.len();
            (StatusCode::OK, Json(json!({ "run_id": value["run_id"], "events": count })))
                .into_response()
        }
        Session::Closing | Session::Closed(_) => (
            StatusCode::CONFLICT,
            Json(error_body("run_closed", format!("run {} is closed", event.run_id))),
        )
            .into_response(),
    }
}

async fn close_run(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Response {
    if let Err(response) = authorize(&state, &headers) {
        return response;
    }
    let Some(detector) = state.detector.clone() else {
        return (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(error_body("no_bundle", "no detector bundle is loaded")),
        )
            .into_response();
    };

    let events = {
        let mut sessions = state.sessions.lock().expect("sessions lock");
        match sessions.get_mut(&id) {
            None => {
                return (
                    StatusCode::NOT_FOUND,
                    Json(error_body("unknown_run", format!("no session for run {id}"))),
                )
                    .into_response();
            }
            Some(Session::Closed(closed)) => {
                // Idempotent: a second close repeats the stored result.
                return (StatusCode::OK, Json(closed.response.clone())).into_response();
            }
            Some(Session::Closing) => {
                return (
                    StatusCode::CONFLICT,
                    Json(error_body("close_in_flight", format!("run {id} is being closed"))),
                )
                    .into_response();
            }
            Some(slot @ Session::Open(_)) => {
                let Session::Open(events) = std::mem::replace(slot, Session::Closing) else {
                    unreachable!("matched Open above");
                };
                events
            }
        }
    };

    let run = RunLog::new(id.clone(), events, GroundTruth::benign());
    if let Err(violations) = validate_run(&run) {
        reopen(&state, &id, run.events);
        return invalid_run_response(violations);
    }

    let scored = tokio::task::spawn_blocking(move || {
        let started = Instant::now();
        let verdict = detector.classify_run(&run);
        (verdict, started.elapsed().as_secs_f64() * 1e3, run)
    })
    .await
    .expect("scoring task panicked");
    let (verdict, latency_ms, run) = scored;
    let verdict = match verdict {
        Ok(v) => v,
        Err(e) => {
            let detail = e.to_string();
            reopen(&state, &id, run.events);
            return (StatusCode::BAD_REQUEST, Json(error_body("unscorable", detail)))
                .into_response();
        }
    };

    let response = CloseResponse {
        run_id: id.clone(),
        verdict: verdict.verdict,
        score: verdict.score,
        latency_ms,
    };
    if verdict.is_anomalous() {
        append_alert(&state, &response);
    }
    let mut sessions = state.sessions.lock().expect("sessions lock");
    sessions.insert(
        id,
        Session::Closed(ClosedSession { response: response.clone(), event_count: run.events.len() }),
    );
    (StatusCode::OK, Json(response)).into_response()
}

/// Puts a session back to Open after a failed close so the client can
/// append the missing events and retry.
fn reopen(state: &ServiceState, id: &str, events: Vec<Event>) {
    let mut sessions = state.sessions.lock().expect("sessions lock");
    sessions.insert(id.to_string(), Session::Open(events));
}

fn invalid_run_response(violations: Vec<Violation>) -> Response {
    (
        StatusCode::BAD_REQUEST,
        Json(json!({
            "code": "invalid_run",
            "detail": "run failed lifecycle validation",
            "violations": violations,
        })),
    )
        .into_response()
}

fn append_alert(state: &ServiceState, response: &CloseResponse) {
    let Some(path) = &state.config.alerts_path else {
        return;
    };
    let record = json!({
        "run_id": response.run_id,
        "verdict": response.verdict,
        "score": response.score,
        "latency_ms": response.latency_ms,
        "unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    });
    // Serialize appends so concurrent closes cannot interleave lines.
    let _guard = state.alerts.lock().expect("alerts lock");
    let opened = std::fs::OpenOptions::new().create(true).append(true).open(path);
    match opened {
        Ok(mut file) => {
            if let Err(e) = writeln!(file, "{record}") {
                tracing::error!("alert append failed: {e}");
            }
        }
        Err(e) => tracing::error!("alert file open failed: {e}"),
    }
}

async fn run_status(
    State(state): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Response {
    if let Err(response) = authorize(&state, &headers) {
        return response;
    }
    let sessions = state.sessions.lock().expect("sessions lock");
    match sessions.get(&id) {
        None => (
            StatusCode::NOT_FOUND,
            Json(error_body("unknown_run", format!("no session for run {id}"))),
        )
            .into_response(),
        Some(Session::Open(events)) => (
            StatusCode::OK,
            Json(json!({ "run_id": id, "state": "open", "events": events.len() })),
        )
            .into_response(),
        Some(Session::Closing) => {
            (StatusCode::OK, Json(json!({ "run_id": id, "state": "closing" }))).into_response()
        }
        Some(Session::Closed(closed)) => (
            StatusCode::OK,
            Json(json!({
                "run_id": id,
                "state": "closed",
                "events": closed.event_count,
                "result": closed.response,
            })),
        )
            .into_response(),
    }
}

async fn healthz(State(state): State<Arc<ServiceState>>) -> Response {
    match &state.detector {
        Some(detector) => (
            StatusCode::OK,
            Json(json!({ "status": "ok", "detector": detector.kind() })),
        )
            .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "no_bundle" })),
        )
            .into_response(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;

    use crate::detector::{train_detector, DetectorConfig, DetectorKind};
    use crate::event::serialize_event;
    use crate::sim::{generate_run, inject_failure, FailureClass, FailureSpec, SimConfig};

    fn tiny_detector() -> Arc<TrainedDetector> {
        static DETECTOR: OnceLock<Arc<TrainedDetector>> = OnceLock::new();
        DETECTOR
            .get_or_init(|| {
                let sim = SimConfig::default();
                let train: Vec<_> =
                    (0..12).map(|i| generate_run(&sim, i).unwrap()).collect();
                let mut val = Vec::new();
                for i in 0..8 {
                    let run = generate_run(&sim, 100 + i).unwrap();
                    if i % 2 == 0 {
                        val.push(run);
                    } else {
                        let spec = FailureSpec {
                            class: FailureClass::DpiExhaustion,
                            target_agent: 1,
                            intensity: 1.0,
                        };
                        val.push(inject_failure(&run, &spec, sim.rng_seed).unwrap());
                    }
                }
                let mut config = DetectorConfig::desk(DetectorKind::Epi);
                config.epi.hidden_dim = 8;
                config.epi.latent_dim = 4;
                config.epi.epochs = 3;
                config.epi.batch_size = 8;
                Arc::new(train_detector(&config, &train, &val).unwrap())
            })
            .clone()
    }

    fn service(detector: Option<Arc<TrainedDetector>>, config: ServiceConfig) -> Router {
        router(Arc::new(ServiceState::new(detector, config)))
    }

    async fn send(router: &Router, request: Request<Body>) -> (StatusCode, Value) {
        let response = router.clone().oneshot(request).await.unwrap();
        let status = response.status();
        let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    fn post_event(body: String) -> Request<Body> {
        Request::builder()
            .method("POST")
            .uri("/v1/events")
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap()
    }

    fn post_close(id: &str) -> Request<Body> {
        Request::builder()
            .method("POST")
            .uri(format!("/v1/runs/{id}/close"))
            .body(Body::empty())
            .unwrap()
    }

    fn get_path(path: &str) -> Request<Body> {
        Request::builder().method("GET").uri(path).body(Body::empty()).unwrap()
    }

    async fn stream_run(router: &Router, run: &crate::event::RunLog) {
        for event in &run.events {
            let (status, body) = send(router, post_event(serialize_event(event))).await;
            assert_eq!(status, StatusCode::OK, "ingest failed: {body}");
        }
    }

    #[tokio::test]
    async fn healthz_reports_bundle_state() {
        let empty = service(None, ServiceConfig::default());
        let (status, body) = send(&empty, get_path("/v1/healthz")).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        assert_eq!(body["status"], "no_bundle");

        let loaded = service(Some(tiny_detector()), ServiceConfig::default());
        let (status, body) = send(&loaded, get_path("/v1/healthz")).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["status"], "ok");
    }

    #[tokio::test]
    async fn schema_violations_name_the_field_path() {
        let router = service(Some(tiny_detector()), ServiceConfig::default());

        let (status, body) = send(&router, post_event("not json".into())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["path"], "(body)");

        let missing = r#"{"run_id":"r1","timestamp_ms":1,"kind":"LlmCall","agent":{"index":1,"name":"a"},"iteration":1,"input":"x","output":"y","prompt_tokens":1,"completion_tokens":1,"model_version":"m"}"#;
        let (status, body) = send(&router, post_event(missing.into())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["code"], "schema_violation");
        assert_eq!(body["path"], "duration_ms");

        let mistyped = r#"{"run_id":"r1","timestamp_ms":"soon","kind":"ApplicationEnded","output":"x","prompt_tokens_total":1,"completion_tokens_total":1}"#;
        let (status, body) = send(&router, post_event(mistyped.into())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["path"], "timestamp_ms");

        let unknown = r#"{"run_id":"r1","timestamp_ms":1,"kind":"Telemetry"}"#;
        let (status, body) = send(&router, post_event(unknown.into())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["path"], "kind");
    }

    #[tokio::test]
    async fn streamed_close_matches_offline_score_bitwise() {
        let detector = tiny_detector();
        let router = service(Some(detector.clone()), ServiceConfig::default());
        let run = generate_run(&SimConfig::default(), 500).unwrap();

        stream_run(&router, &run).await;
        let (status, body) = send(&router, post_close(&run.run_id)).await;
        assert_eq!(status, StatusCode::OK, "close failed: {body}");

        let offline = detector.score_run(&run).unwrap();
        let online = body["score"].as_f64().unwrap();
        assert_eq!(online.to_bits(), offline.value.to_bits());
        assert!(body["latency_ms"].as_f64().unwrap() >= 0.0);
    }

    #[tokio::test]
    async fn events_after_close_conflict_and_close_is_idempotent() {
        let router = service(Some(tiny_detector()), ServiceConfig::default());
        let run = generate_run(&SimConfig::default(), 501).unwrap();

        stream_run(&router, &run).await;
        let (_, first) = send(&router, post_close(&run.run_id)).await;

        let (status, _) = send(&router, post_event(serialize_event(&run.events[0]))).await;
        assert_eq!(status, StatusCode::CONFLICT);

        let (status, second) = send(&router, post_close(&run.run_id)).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(first, second);
    }

    #[tokio::test]
    async fn closing_an_invalid_session_lists_violations_and_reopens() {
        let router = service(Some(tiny_detector()), ServiceConfig::default());
        let run = generate_run(&SimConfig::default(), 502).unwrap();

        // Stream everything except the final ApplicationEnded.
        for event in &run.events[..run.events.len() - 1] {
            send(&router, post_event(serialize_event(event))).await;
        }
        let (status, body) = send(&router, post_close(&run.run_id)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(body["code"], "invalid_run");
        assert!(!body["violations"].as_array().unwrap().is_empty());

        // The session reopened: appending the missing event fixes the run.
        let last = run.events.last().unwrap();
        let (status, _) = send(&router, post_event(serialize_event(last))).await;
        assert_eq!(status, StatusCode::OK);
        let (status, _) = send(&router, post_close(&run.run_id)).await;
        assert_eq!(status, StatusCode::OK);
    }

    #[tokio::test]
    async fn unknown_runs_return_not_found() {
        let router = service(Some(tiny_detector()), ServiceConfig::default());
        let (status, _) = send(&router, post_close("ghost")).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        let (status, _) = send(&router, get_path("/v1/runs/ghost")).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }

    #[tokio::test]
    async fn status_tracks_session_lifecycle() {
        let router = service(Some(tiny_detector()), ServiceConfig::default());
        let run = generate_run(&SimConfig::default(), 503).unwrap();

        stream_run(&router, &run).await;
        let (status, body) = send(&router, get_path(&format!("/v1/runs/{}", run.run_id))).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["state"], "open");
        assert_eq!(body["events"].as_u64().unwrap() as usize, run.events.len());

        send(&router, post_close(&run.run_id)).await;
        let (_, body) = send(&router, get_path(&format!("/v1/runs/{}", run.run_id))).await;
        assert_eq!(body["state"], "closed");
        assert!(body["result"]["score"].is_f64());
    }

    #[tokio::test]
    async fn bearer_token_guards_everything_but_healthz() {
        let config = ServiceConfig { alerts_path: None, bearer_token: Some("sesame".into()) };
        let router = service(Some(tiny_detector()), config);
        let run = generate_run(&SimConfig::default(), 504).unwrap();

        let (status, _) = send(&router, post_event(serialize_event(&run.events[0]))).await;
        assert_eq!(status, StatusCode::UNAUTHORIZED);
        let (status, _) = send(&router, get_path("/v1/healthz")).await;
        assert_eq!(status, StatusCode::OK);

        let authed = Request::builder()
            .method("POST")
            .uri("/v1/events")
            .header("authorization", "Bearer sesame")
            .body(Body::from(serialize_event(&run.events[0])))
            .unwrap();
        let (status, _) = send(&router, authed).await;
        assert_eq!(status, StatusCode::OK);
    }

    #[tokio::test]
    async fn anomalous_closes_append_alert_records() {
        let dir = tempfile::tempdir().unwrap();
        let alerts = dir.path().join("alerts.jsonl");
        let config = ServiceConfig { alerts_path: Some(alerts.clone()), bearer_token: None };
        let detector = tiny_detector();
        let router = service(Some(detector.clone()), config);

        let sim = SimConfig::default();
        let benign = generate_run(&sim, 505).unwrap();
        let spec = FailureSpec {
            class: FailureClass::DpiExhaustion,
            target_agent: 1,
            intensity: 1.0,
        };
        let anomalous = inject_failure(&generate_run(&sim, 506).unwrap(), &spec, sim.rng_seed).unwrap();
        assert!(detector.classify_run(&anomalous).unwrap().is_anomalous());

        for run in [&benign, &anomalous] {
            stream_run(&router, run).await;
            send(&router, post_close(&run.run_id)).await;
        }

        let text = std::fs::read_to_string(&alerts).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1, "only the anomalous run alerts: {text}");
        let record: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(record["run_id"], anomalous.run_id.as_str());
    }
}
