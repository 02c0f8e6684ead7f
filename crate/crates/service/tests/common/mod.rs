#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use metablend::engine::Engine;
use metablend::studio::Studio;
use metablend_service::api::{router, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn fixtures(name: &str) -> PathBuf {
    workspace().join("fixtures").join(name)
}

/// Offline app over a fixture set, with sequential session ids.
pub fn app(fixture: &str, data_dir: &Path) -> (Router, Arc<AppState>) {
    let engine = Engine::offline(&fixtures(fixture), data_dir).unwrap();
    let counter = std::sync::atomic::AtomicUsize::new(0);
    let state = Arc::new(
        AppState::new(Arc::new(Studio::new(Arc::new(engine))), data_dir)
            .with_ids(move || format!("s{}", counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1)),
    );
    (router(state.clone()), state)
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.bytes)))
    }

    /// Asserts the status and that the body matches the named schema.
    pub fn expect(&self, status: StatusCode, def: &str) -> Value {
        assert_eq!(self.status, status, "body: {}", String::from_utf8_lossy(&self.bytes));
        let v = self.json();
        check_schema(def, &v);
        v
    }

    pub fn error(&self, status: StatusCode, code: &str) -> Value {
        let v = self.expect(status, "ApiError");
        assert_eq!(v["code"], code, "{v}");
        v
    }
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

pub async fn raw(app: &Router, method: &str, uri: &str, body: &'static str) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

fn schema_doc() -> &'static Value {
    static DOC: OnceLock<Value> = OnceLock::new();
    DOC.get_or_init(|| {
        serde_json::from_str(&std::fs::read_to_string(workspace().join("docs/schemas.json")).unwrap()).unwrap()
    })
}

/// Validates `value` against `$defs/<def>` of `docs/schemas.json`.
pub fn check_schema(def: &str, value: &Value) {
    let mut schema = schema_doc().clone();
    assert!(schema["$defs"].get(def).is_some(), "no schema named {def}");
    schema["$ref"] = Value::String(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(
        errors.is_empty(),
        "{def} schema violations:\n{}\n{value:#}",
        errors.join("\n")
    );
}

/// The widest link between different labels, as a UI click would pick it.
pub fn widest_link(diagram: &Value) -> (String, String) {
    let label = |id: &Value| {
        diagram["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .find(|n| n["id"] == *id)
            .unwrap()["label"]
            .as_str()
            .unwrap()
            .to_string()
    };
    let best = diagram["links"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|l| label(&l["source"]) != label(&l["target"]))
        .max_by(|a, b| {
            a["width"]
                .as_f64()
                .unwrap()
                .total_cmp(&b["width"].as_f64().unwrap())
                .then(
                    a["norm_sent"]
                        .as_f64()
                        .unwrap()
                        .total_cmp(&b["norm_sent"].as_f64().unwrap()),
                )
        })
        .unwrap();
    (label(&best["source"]), label(&best["target"]))
}

/// Runs the scripted studio flow the CLI's automatic mode performs and
/// returns the session id.
pub async fn scripted_global_warming(app: &Router) -> String {
    let created = call(
        app,
        "POST",
        "/sessions",
        Some(serde_json::json!({"expression": "global warming"})),
    )
    .await
    .expect(StatusCode::CREATED, "SessionCreated");
    let id = created["id"].as_str().unwrap().to_string();
    let base = format!("/sessions/{id}");
    call(
        app,
        "POST",
        &format!("{base}/concepts"),
        Some(serde_json::json!({"indices": [0, 1]})),
    )
    .await
    .expect(StatusCode::OK, "Selected");
    call(app, "POST", &format!("{base}/theme"), None)
        .await
        .expect(StatusCode::OK, "ThemeInference");
    for concept in ["global", "warming"] {
        call(
            app,
            "POST",
            &format!("{base}/concepts/{concept}/objects"),
            Some(serde_json::json!({"iteration": 1})),
        )
        .await
        .expect(StatusCode::OK, "Suggestions");
    }
    let objects = call(app, "GET", &format!("{base}/analysis/objects"), None)
        .await
        .expect(StatusCode::OK, "AnalysisDiagram");
    let (a, b) = widest_link(&objects);
    let attrs = call(app, "GET", &format!("{base}/analysis/attributes?pair={a},{b}"), None)
        .await
        .expect(StatusCode::OK, "AnalysisDiagram");
    let (x, y) = widest_link(&attrs);
    let pair = serde_json::json!({"object_a": a, "attribute_a": x, "object_b": b, "attribute_b": y});
    let schemes = call(
        app,
        "POST",
        &format!("{base}/schemes"),
        Some(serde_json::json!({"pair": pair, "n": 3})),
    )
    .await
    .expect(StatusCode::OK, "Schemes");
    for i in 0..schemes["schemes"].as_array().unwrap().len() {
        let prompt = call(
            app,
            "POST",
            &format!("{base}/prompts"),
            Some(serde_json::json!({"pair": pair, "scheme_index": i})),
        )
        .await
        .expect(StatusCode::OK, "ImagePrompt");
        call(
            app,
            "POST",
            &format!("{base}/images"),
            Some(serde_json::json!({"prompt_id": prompt["id"]})),
        )
        .await
        .expect(StatusCode::OK, "CanvasItem");
    }
    id
}
