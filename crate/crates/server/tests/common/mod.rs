//! Shared helpers for driving the router in-process.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, Utc};
use http_body_util::BodyExt;
use hypotree::{ApiConfig, AppState};
use serde_json::Value;
use tower::ServiceExt;

pub const BOUNDARY: &str = "hypotree-test-boundary";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn census() -> Vec<u8> {
    std::fs::read(fixtures().join("census.csv")).unwrap()
}

pub fn mock_config(store: &Path) -> ApiConfig {
    let mut cfg = ApiConfig { mock_mode: true, store_root: store.to_owned(), ..ApiConfig::default() };
    cfg.retriever.corpus_dir = Some(fixtures().join("corpus"));
    cfg
}

/// A clock that advances one second per reading from a fixed instant.
pub fn stepping_clock() -> hypotree::state::Clock {
    let start: DateTime<Utc> = "2024-03-01T10:00:00Z".parse().unwrap();
    let ticks = Arc::new(std::sync::atomic::AtomicI64::new(0));
    Arc::new(move || start + Duration::seconds(ticks.fetch_add(1, std::sync::atomic::Ordering::SeqCst)))
}

pub fn app_with(cfg: ApiConfig) -> (Router, Arc<AppState>) {
    let state = Arc::new(AppState::new(cfg).unwrap().with_clock(stepping_clock()));
    (hypotree::router(state.clone()), state)
}

pub fn multipart(fields: &[(&str, Option<&str>, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, file, bytes) in fields {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match file {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: text/csv\r\n\r\n").as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("not json ({e}): {}", String::from_utf8_lossy(&self.body))
        })
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> Reply {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

pub async fn post_empty(app: &Router, uri: &str) -> Reply {
    send(app, Request::post(uri).body(Body::empty()).unwrap()).await
}

pub async fn create_session(app: &Router, id: Option<&str>, intent: &str, csv: &[u8]) -> Reply {
    let mut fields: Vec<(&str, Option<&str>, &[u8])> =
        vec![("intent", None, intent.as_bytes()), ("dataset", Some("census.csv"), csv)];
    if let Some(id) = id {
        fields.push(("session_id", None, id.as_bytes()));
    }
    let req = Request::post("/sessions")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&fields)))
        .unwrap();
    send(app, req).await
}

/// Level-1 node whose title mentions `word`, or the first level-1 node.
pub fn level1_node(created: &Value, word: &str) -> String {
    let nodes = created["tree"]["nodes"].as_array().unwrap();
    let level1: Vec<&Value> = nodes.iter().filter(|n| n["level"] == 1).collect();
    level1
        .iter()
        .find(|n| n["title"].as_str().unwrap().contains(word))
        .or(level1.first())
        .map(|n| n["node_id"].as_str().unwrap().to_owned())
        .unwrap()
}

/// The walk-through: "income inequality" on the census fixture, drill into
/// Education Level, branch twice with user input, backtrack to another
/// level-1 node and generate from it. Returns the session id.
pub async fn p5_walkthrough(app: &Router, id: &str) -> String {
    let created = create_session(app, Some(id), "income inequality", &census()).await;
    assert_eq!(created.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&created.body));
    let created = created.json();
    let edu = level1_node(&created, "Education");
    let base = format!("/sessions/{id}/nodes");

    let hints = get(app, &format!("{base}/{edu}/hints?expand=true")).await;
    assert_eq!(hints.status, StatusCode::OK);
    let first = post_json(app, &format!("{base}/{edu}/branch"), serde_json::json!({"user_input": "Institution prestige"})).await;
    assert_eq!(first.status, StatusCode::OK, "{}", String::from_utf8_lossy(&first.body));
    let child = first.json()["new_nodes"][0]["node_id"].as_str().unwrap().to_owned();

    get(app, &format!("{base}/{child}/hints?expand=true")).await;
    let second = post_json(
        app,
        &format!("{base}/{child}/branch"),
        serde_json::json!({"user_input": "University prestige comes from previous wealth"}),
    )
    .await;
    assert_eq!(second.status, StatusCode::OK);
    let grandchild = second.json()["new_nodes"][1]["node_id"].as_str().unwrap().to_owned();
    get(app, &format!("{base}/{grandchild}/hints?expand=true")).await;
    post_json(app, &format!("{base}/{grandchild}/bookmark"), serde_json::json!({"flag": true})).await;

    // Back up to a different initial hypothesis that was looked at before.
    let other = created["tree"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["level"] == 1)
        .map(|n| n["node_id"].as_str().unwrap().to_owned())
        .find(|n| *n != edu)
        .unwrap();
    get(app, &format!("{base}/{other}/hints")).await;
    get(app, &format!("{base}/{grandchild}/hints")).await;
    get(app, &format!("{base}/{other}/hints?expand=true")).await;
    let third = post_json(app, &format!("{base}/{other}/branch"), serde_json::json!({})).await;
    assert_eq!(third.status, StatusCode::OK);
    id.to_owned()
}

/// Checks `value` against a schema of the subset served at `/schema`.
pub fn conforms(doc: &Value, schema: &Value, value: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/schemas/");
        let target = doc["schemas"].get(name).ok_or_else(|| format!("{at}: unknown schema {name}"))?;
        return conforms(doc, target, value, at);
    }
    if let Some(options) = schema.get("anyOf").and_then(Value::as_array) {
        return if options.iter().any(|o| conforms(doc, o, value, at).is_ok()) {
            Ok(())
        } else {
            Err(format!("{at}: matches no alternative"))
        };
    }
    let types: Vec<&str> = match &schema["type"] {
        Value::String(s) => vec![s.as_str()],
        Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
        _ => return Ok(()),
    };
    let fits = |t: &str| match t {
        "string" => value.is_string(),
        "integer" => value.is_u64() || value.is_i64(),
        "number" => value.is_number(),
        "boolean" => value.is_boolean(),
        "null" => value.is_null(),
        "array" => value.is_array(),
        "object" => value.is_object(),
        _ => false,
    };
    if !types.iter().any(|t| fits(t)) {
        return Err(format!("{at}: expected {types:?}, got {value}"));
    }
    if let (Some(items), Some(values)) = (schema.get("items"), value.as_array()) {
        for (i, v) in values.iter().enumerate() {
            conforms(doc, items, v, &format!("{at}[{i}]"))?;
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema["required"].as_array().into_iter().flatten().filter_map(Value::as_str) {
            if !obj.contains_key(key) {
                return Err(format!("{at}: missing {key}"));
            }
        }
        if let Some(props) = schema["properties"].as_object() {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    conforms(doc, sub, v, &format!("{at}.{key}"))?;
                }
            }
        }
    }
    Ok(())
}

pub fn assert_conforms(doc: &Value, schema_name: &str, value: &Value) {
    let schema = serde_json::json!({"$ref": format!("#/schemas/{schema_name}")});
    if let Err(e) = conforms(doc, &schema, value, schema_name) {
        panic!("{e}");
    }
}
