//! Remote provider and retriever against a local fake HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use hypotree_core::generation::{build_initial_prompt, generate, GenerationError, ProviderConfig};
use hypotree_core::hints::{fetch_supporting_text, RetrieverConfig, RetrieverMode};
use hypotree_core::model::{DiagramTree, DraftSource, HypothesisDraft};

/// Serves one canned (status, body) per connection and records requests.
fn fake_server(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(format!("{head}{}", String::from_utf8_lossy(&buf)));
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

#[test]
fn provider_retries_transient_failures() {
    std::env::set_var("HYPOTREE_FAKE_KEY", "sk-test");
    let content = serde_json::json!({"choices": [{"message": {"content": "[]"}}]}).to_string();
    let (url, seen) = fake_server(vec![(503, "{}".into()), (200, content)]);
    let mut cfg = ProviderConfig::remote(&url, "HYPOTREE_FAKE_KEY");
    cfg.max_retries = 2;
    let bundle = build_initial_prompt("summary", "data analyst", 5);
    assert_eq!(generate(&cfg, &bundle).unwrap(), "[]");
    let requests = seen.lock().unwrap();
    assert_eq!(requests.len(), 2);
    let req = requests[1].to_ascii_lowercase();
    assert!(req.contains("authorization: bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(requests[1].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "gpt-4o");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "assistant");
    assert_eq!(body["messages"][1]["content"], bundle.assembled);
}

#[test]
fn provider_gives_up_after_retries() {
    std::env::set_var("HYPOTREE_FAKE_KEY2", "k");
    let (url, seen) = fake_server(vec![(500, "{}".into()), (500, "{}".into())]);
    let mut cfg = ProviderConfig::remote(&url, "HYPOTREE_FAKE_KEY2");
    cfg.max_retries = 1;
    let err = generate(&cfg, &build_initial_prompt("s", "p", 5)).unwrap_err();
    assert!(matches!(err, GenerationError::ProviderUnavailable(_)), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn missing_key_fails_before_network() {
    let cfg = ProviderConfig::remote("http://127.0.0.1:9/never", "HYPOTREE_SURELY_UNSET_VAR");
    assert_eq!(
        generate(&cfg, &build_initial_prompt("s", "p", 5)).unwrap_err(),
        GenerationError::AuthMissing("HYPOTREE_SURELY_UNSET_VAR".into())
    );
}

#[test]
fn remote_retriever_returns_capped_passages() {
    let passages: Vec<_> = (0..5)
        .map(|i| serde_json::json!({"title": format!("T{i}"), "text": "x".repeat(1000), "uri": format!("u{i}")}))
        .collect();
    let (url, seen) = fake_server(vec![(200, serde_json::json!({"passages": passages}).to_string())]);
    let cfg = RetrieverConfig {
        mode: RetrieverMode::Remote,
        endpoint_url: Some(url),
        top_k: 3,
        ..RetrieverConfig::default()
    };
    let mut tree = DiagramTree::new("i");
    let root = tree.root_id().clone();
    let d = HypothesisDraft {
        title: "Family Wealth".into(),
        hypothesis_text: "There is a link.".into(),
        visualization_idea: "v".into(),
        rationale: "r".into(),
        related_work: String::new(),
        source_kind: DraftSource::Branch,
    };
    let id = tree.add_children(&root, &[d], None).unwrap().remove(0);
    let text = fetch_supporting_text(tree.get(&id).unwrap(), &cfg, None).unwrap();
    assert_eq!(text.snippets.len(), 3);
    assert!(text.snippets.iter().all(|s| s.excerpt.chars().count() == 400));
    assert_eq!(text.query, "Family Wealth There is a link.");
    let req = seen.lock().unwrap()[0].clone();
    let body: serde_json::Value = serde_json::from_str(req.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body, serde_json::json!({"query": "Family Wealth There is a link.", "top_k": 3}));
}
