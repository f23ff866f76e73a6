//! Published payload schemas, served at `/schema`.
//!
//! A small JSON-Schema subset: `type` (a name or a list of names),
//! `required`, `properties`, `items` and `$ref` into `schemas`.

use serde_json::{json, Value};

fn t(name: &str) -> Value {
    json!({"type": name})
}

fn nullable(name: &str) -> Value {
    json!({"type": [name, "null"]})
}

fn r(name: &str) -> Value {
    json!({"$ref": format!("#/schemas/{name}")})
}

fn array_of(item: Value) -> Value {
    json!({"type": "array", "items": item})
}

fn object(props: &[(&str, Value)]) -> Value {
    let required: Vec<&str> = props.iter().map(|(k, _)| *k).collect();
    let properties: serde_json::Map<String, Value> =
        props.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect();
    json!({"type": "object", "required": required, "properties": properties})
}

fn endpoint(method: &str, path: &str, request: Value, response: &str, errors: &[u16]) -> Value {
    json!({"method": method, "path": path, "request": request, "response": r(response), "errors": errors})
}

pub fn schema_document() -> Value {
    let schemas = json!({
        "Error": object(&[("error", t("string")), ("message", t("string"))]),
        "HypothesisNode": object(&[
            ("node_id", t("string")),
            ("parent_id", nullable("string")),
            ("level", t("integer")),
            ("title", t("string")),
            ("hypothesis", t("string")),
            ("visualization", t("string")),
            ("rationale", t("string")),
            ("relatedWork", t("string")),
            ("userInput", t("string")),
            ("bookmarked", t("boolean")),
            ("sibling_index", t("integer")),
        ]),
        "PositionedNode": object(&[
            ("node_id", t("string")),
            ("x", t("number")),
            ("y", t("number")),
            ("level", t("integer")),
        ]),
        "EdgeRoute": object(&[
            ("parent_id", t("string")),
            ("child_id", t("string")),
            ("from", array_of(t("number"))),
            ("to", array_of(t("number"))),
        ]),
        "LayoutConfig": object(&[
            ("viewport_width", t("integer")),
            ("node_width", t("integer")),
            ("node_height", t("integer")),
            ("min_gap", t("integer")),
            ("level_gap", t("integer")),
        ]),
        "LayoutView": object(&[
            ("positions", array_of(r("PositionedNode"))),
            ("edges", array_of(r("EdgeRoute"))),
            ("config", r("LayoutConfig")),
            ("error", nullable("string")),
        ]),
        "Tree": object(&[("root_id", t("string")), ("nodes", array_of(r("HypothesisNode")))]),
        "ColumnProfile": object(&[
            ("name", t("string")),
            ("dtype", t("string")),
            ("unique_count", t("integer")),
            ("null_count", t("integer")),
            ("sample_values", array_of(t("string"))),
        ]),
        "DataSummary": object(&[
            ("name", t("string")),
            ("row_count", t("integer")),
            ("columns", array_of(r("ColumnProfile"))),
        ]),
        "CreatedSession": object(&[
            ("session_id", t("string")),
            ("tree", r("Tree")),
            ("layout", r("LayoutView")),
            ("summary", r("DataSummary")),
        ]),
        "SessionView": object(&[
            ("session_id", t("string")),
            ("intent_text", t("string")),
            ("focus", t("string")),
            ("event_count", t("integer")),
            ("tree", r("Tree")),
            ("layout", r("LayoutView")),
        ]),
        "SessionList": object(&[("sessions", array_of(t("string")))]),
        "BranchResult": object(&[("new_nodes", array_of(r("HypothesisNode"))), ("layout", r("LayoutView"))]),
        "RegenerateResult": object(&[
            ("new_nodes", array_of(r("HypothesisNode"))),
            ("removed_count", t("integer")),
            ("layout", r("LayoutView")),
        ]),
        "ChartSpec": object(&[
            ("chart_type", t("string")),
            ("x_field", t("string")),
            ("y_field", nullable("string")),
            ("aggregate", t("string")),
            ("group_field", nullable("string")),
        ]),
        "Series": object(&[("label", t("string")), ("points", array_of(t("array")))]),
        "ChartPayload": object(&[
            ("spec", r("ChartSpec")),
            ("series", array_of(r("Series"))),
            ("row_basis", t("integer")),
            ("caption", t("string")),
        ]),
        "Snippet": object(&[("source_title", t("string")), ("excerpt", t("string")), ("source_uri", t("string"))]),
        "SupportingText": object(&[("snippets", array_of(r("Snippet"))), ("query", t("string"))]),
        "Hints": object(&[
            ("node_id", t("string")),
            ("chart", json!({"anyOf": [r("ChartPayload"), t("null")]})),
            ("spec_origin", nullable("string")),
            ("text", json!({"anyOf": [r("SupportingText"), t("null")]})),
            ("warnings", array_of(t("string"))),
        ]),
        "Collapsed": object(&[("node_id", t("string")), ("event_id", t("integer"))]),
        "DiagramMetrics": object(&[
            ("node_count", t("integer")),
            ("max_depth", t("integer")),
            ("max_breadth", t("integer")),
            ("nodes_by_level", t("object")),
        ]),
        "ExplorationCounts": object(&[
            ("clicks", t("integer")),
            ("generations", t("integer")),
            ("total_explored", t("integer")),
        ]),
        "BacktrackInstance": object(&[
            ("event_id", t("integer")),
            ("category", t("string")),
            ("from_node", t("string")),
            ("to_node", t("string")),
        ]),
        "BacktrackReport": object(&[
            ("high_level_backtrack_and_generate", t("integer")),
            ("high_level_backtrack_only", t("integer")),
            ("other_backtrack", t("integer")),
            ("total", t("integer")),
            ("instances", array_of(r("BacktrackInstance"))),
        ]),
        "EngagementReport": object(&[
            ("initial_expansions", t("integer")),
            ("re_expansions", t("integer")),
            ("total", t("integer")),
        ]),
        "BookmarkEntry": object(&[
            ("participant", t("string")),
            ("title", t("string")),
            ("description", t("string")),
            ("level", t("integer")),
        ]),
        "SessionReport": object(&[
            ("session_id", t("string")),
            ("diagram", r("DiagramMetrics")),
            ("exploration", r("ExplorationCounts")),
            ("backtracks", r("BacktrackReport")),
            ("engagement", r("EngagementReport")),
            ("bookmarks", array_of(r("BookmarkEntry"))),
        ]),
    });
    let multipart = json!({
        "content_type": "multipart/form-data",
        "fields": {"dataset": "file", "intent": "string", "session_id": "string, optional"},
    });
    let generate = json!({"content_type": "application/json", "body": {"user_input": "string, optional"}});
    let none = Value::Null;
    json!({
        "title": "hypotree API",
        "version": env!("CARGO_PKG_VERSION"),
        "endpoints": [
            endpoint("POST", "/sessions", multipart, "CreatedSession", &[400, 409, 502]),
            endpoint("GET", "/sessions", none.clone(), "SessionList", &[]),
            endpoint("GET", "/sessions/{id}", none.clone(), "SessionView", &[404]),
            endpoint("POST", "/sessions/{id}/nodes/{node_id}/branch", generate.clone(), "BranchResult", &[400, 404, 409, 502]),
            endpoint("POST", "/sessions/{id}/nodes/{node_id}/regenerate", generate, "RegenerateResult", &[404, 409, 502]),
            endpoint("GET", "/sessions/{id}/nodes/{node_id}/hints", json!({"query": {"expand": "boolean, optional"}}), "Hints", &[400, 404]),
            endpoint("POST", "/sessions/{id}/nodes/{node_id}/collapse", none.clone(), "Collapsed", &[404]),
            endpoint("POST", "/sessions/{id}/nodes/{node_id}/bookmark", json!({"content_type": "application/json", "body": {"flag": "boolean"}}), "HypothesisNode", &[400, 404]),
            endpoint("GET", "/sessions/{id}/analytics", none, "SessionReport", &[404, 500]),
        ],
        "error": r("Error"),
        "schemas": schemas,
    })
}
