//! Text-generation providers: a remote chat-completion endpoint and a
//! deterministic offline mock.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::model::{BRANCH_HYPOTHESES, INITIAL_HYPOTHESES};

use super::prompts::{ChatRequest, PromptBundle, RequestKind};
use super::GenerationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env_name: Option<String>,
    pub model_name: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Dot path to the generated text in the response body; numeric
    /// segments index arrays.
    pub response_path: String,
    pub temperature: Option<f64>,
    /// Artificial delay for the mock, in milliseconds.
    pub mock_latency_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            mode: ProviderMode::Mock,
            endpoint_url: None,
            api_key_env_name: None,
            model_name: "gpt-4o".into(),
            timeout_secs: 60,
            max_retries: 2,
            response_path: "choices.0.message.content".into(),
            temperature: None,
            mock_latency_ms: 0,
        }
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self::default()
    }

    pub fn remote(endpoint_url: &str, api_key_env_name: &str) -> Self {
        Self {
            mode: ProviderMode::Remote,
            endpoint_url: Some(endpoint_url.to_owned()),
            api_key_env_name: Some(api_key_env_name.to_owned()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.mode == ProviderMode::Remote
            && (self.endpoint_url.is_none() || self.api_key_env_name.is_none())
        {
            return Err(GenerationError::InvalidConfig(
                "remote mode needs endpoint_url and api_key_env_name".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that can answer a [`ChatRequest`] with raw text.
pub trait TextGenerator: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerationError>;
}

impl TextGenerator for ProviderConfig {
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerationError> {
        self.validate()?;
        match self.mode {
            ProviderMode::Mock => {
                if self.mock_latency_ms > 0 {
                    std::thread::sleep(Duration::from_millis(self.mock_latency_ms));
                }
                Ok(mock_response(request))
            }
            ProviderMode::Remote => remote_complete(self, request),
        }
    }
}

/// Sends an assembled hypothesis prompt to the configured provider.
pub fn generate(provider: &ProviderConfig, bundle: &PromptBundle) -> Result<String, GenerationError> {
    provider.complete(&bundle.request())
}

fn resolve_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(value, |v, seg| match seg.parse::<usize>() {
        Ok(i) => v.get(i),
        Err(_) => v.get(seg),
    })
}

fn remote_complete(cfg: &ProviderConfig, request: &ChatRequest) -> Result<String, GenerationError> {
    let env_name = cfg.api_key_env_name.as_deref().unwrap_or_default();
    let key = std::env::var(env_name)
        .ok()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| GenerationError::AuthMissing(env_name.to_owned()))?;
    let url = cfg.endpoint_url.as_deref().unwrap_or_default();

    let mut body = json!({
        "model": cfg.model_name,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "assistant", "content": request.content},
        ],
    });
    if let Some(t) = cfg.temperature {
        body["temperature"] = json!(t);
    }

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
        .build()
        .into();

    let mut attempt = 0;
    loop {
        let outcome = agent
            .post(url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body);
        let err = match outcome {
            Ok(mut resp) => {
                let value: Value = resp
                    .body_mut()
                    .read_json()
                    .map_err(|e| GenerationError::MalformedResponse(format!("provider body: {e}")))?;
                return resolve_path(&value, &cfg.response_path)
                    .and_then(Value::as_str)
                    .map(str::to_owned)
                    .ok_or_else(|| {
                        GenerationError::MalformedResponse(format!(
                            "no text at {:?} in provider response",
                            cfg.response_path
                        ))
                    });
            }
            Err(e) => e,
        };
        let transient = match &err {
            ureq::Error::StatusCode(code) => *code == 429 || *code >= 500,
            ureq::Error::Timeout(_) => {
                if attempt >= cfg.max_retries {
                    return Err(GenerationError::Timeout(cfg.timeout_secs));
                }
                true
            }
            ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
            | ureq::Error::Protocol(_) => true,
            _ => false,
        };
        if !transient || attempt >= cfg.max_retries {
            // Never include the key; ureq errors do not carry headers.
            return Err(GenerationError::ProviderUnavailable(err.to_string()));
        }
        let backoff = Duration::from_millis(200u64 << attempt.min(6));
        tracing::warn!(attempt, ?backoff, error = %err, "provider call failed, retrying");
        std::thread::sleep(backoff);
        attempt += 1;
    }
}

// ---------------------------------------------------------------------------
// Mock provider

fn seed_of(request: &ChatRequest) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(request.system.as_bytes());
    hasher.update([0]);
    hasher.update(request.content.as_bytes());
    for c in &request.columns {
        hasher.update([0]);
        hasher.update(c.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// "education_level" → "Education Level".
fn display_name(column: &str) -> String {
    column
        .split(|c: char| c == '_' || c == '-' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<String>>()
        .join(" ")
}

fn pick(columns: &[String], seed: u64, i: usize) -> &str {
    &columns[(seed as usize).wrapping_add(i) % columns.len()]
}

const INITIAL_TEMPLATES: [(&str, &str); 5] = [
    ("{Y} is highly correlated to {X}.", "scatterplot of {x} and {y}"),
    ("{Y} differs systematically across {X}.", "bar chart of mean {y} by {x}"),
    ("Changes in {X} track changes in {Y}.", "line chart of {y} over {x}"),
    ("The spread of {Y} widens at higher {X}.", "box plot of {y} by {x}"),
    ("{X} is a leading indicator of {Y}.", "scatterplot of {x} and {y}"),
];

const BRANCH_TEMPLATES: [(&str, &str, &str); 3] = [
    (
        "{T} Interaction",
        "There is a stronger association between {X} and {Y} when {T} is taken into account.",
        "scatterplot of {x} and {y}",
    ),
    (
        "{X} Gap",
        "There is a widening gap in {Y} across levels of {X} among cases related to {T}.",
        "bar chart of mean {y} by {x}",
    ),
    (
        "{X} Threshold",
        "There is a threshold in {X} above which {Y} changes sharply, refining {T}.",
        "histogram of {x}",
    ),
];

fn fill(template: &str, x: &str, y: &str, t: &str) -> String {
    template
        .replace("{X}", &display_name(x))
        .replace("{Y}", &display_name(y))
        .replace("{x}", x)
        .replace("{y}", y)
        .replace("{T}", t)
}

fn fallback_columns(columns: &[String]) -> Vec<String> {
    if columns.is_empty() {
        vec!["outcome".into(), "factor".into()]
    } else if columns.len() == 1 {
        vec![columns[0].clone(), columns[0].clone()]
    } else {
        columns.to_vec()
    }
}

/// Deterministic response derived from a hash of the request. Always
/// satisfies the parser contract for the request kind.
pub fn mock_response(request: &ChatRequest) -> String {
    let seed = seed_of(request);
    let columns = fallback_columns(&request.columns);
    match request.kind {
        RequestKind::InitialHypotheses => {
            let y = intent_column(&request.content, &columns).unwrap_or_else(|| pick(&columns, seed, 0));
            let others: Vec<&String> = columns.iter().filter(|c| c.as_str() != y).collect();
            let items: Vec<Value> = (0..INITIAL_HYPOTHESES)
                .map(|i| {
                    let x = others
                        .get((seed as usize / 7).wrapping_add(i) % others.len().max(1))
                        .map_or(y, |s| s.as_str());
                    let (hyp, viz) = INITIAL_TEMPLATES[(seed as usize).wrapping_add(i) % INITIAL_TEMPLATES.len()];
                    json!({
                        "index": i,
                        "hypothesis": format!("[{}]: {}", display_name(x), fill(hyp, x, y, "")),
                        "visualization": fill(viz, x, y, ""),
                        "rationale": format!("Uses the fields {x} and {y} to show whether {} explains variation in {}.", x, y),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("json")
        }
        RequestKind::BranchHypotheses => {
            let topic = branch_topic(request.topic.as_deref(), &request.content);
            let items: Vec<Value> = (0..BRANCH_HYPOTHESES)
                .map(|i| {
                    let x = pick(&columns, seed, 2 * i);
                    let mut y = pick(&columns, seed, 2 * i + 1);
                    if y == x {
                        y = pick(&columns, seed, 2 * i + 2);
                    }
                    let (title, hyp, viz) = BRANCH_TEMPLATES[i];
                    json!({
                        "title": fill(title, x, y, &topic),
                        "hypothesis": fill(hyp, x, y, &topic),
                        "relatedWork": format!("Previous studies have shown that {} and {} are related.", display_name(x).to_lowercase(), display_name(y).to_lowercase()),
                        "visualization": fill(viz, x, y, &topic),
                        "rationale": format!("Comparing {x} against {y} isolates the refinement."),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&items).expect("json")
        }
        RequestKind::ChartSpec => mock_chart_spec(request),
    }
}

/// The column sharing the most tokens with the persona named in an initial
/// prompt, so "data analyst interested in income inequality" targets
/// `income`. Ties go to the earlier column.
fn intent_column<'a>(content: &str, columns: &'a [String]) -> Option<&'a str> {
    let persona = content
        .split("PERSPECTIVE of a ")
        .nth(1)?
        .split(" persona")
        .next()?;
    let wanted: std::collections::BTreeSet<String> = crate::hints::tokens(persona).into_iter().collect();
    columns
        .iter()
        .map(|c| (crate::hints::column_overlap(c, &wanted), c))
        .filter(|(score, _)| *score > 0)
        .fold(None, |best: Option<(usize, &String)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .map(|(_, c)| c.as_str())
}

/// Short topic phrase for branch templates: the first two words of the
/// selected title, or of a title recovered from the prompt text.
fn branch_topic(topic: Option<&str>, content: &str) -> String {
    let title = match topic {
        Some(t) => t.to_owned(),
        None => {
            let after = content.strip_prefix("Based on the hypothesis ").unwrap_or(content);
            super::parse::extract_title(after)
        }
    };
    let words: Vec<&str> = title.split_whitespace().take(2).collect();
    if words.is_empty() {
        "the selected hypothesis".into()
    } else {
        words.join(" ")
    }
}

fn mock_chart_spec(request: &ChatRequest) -> String {
    let idea = request
        .content
        .split("Visualization idea: ")
        .nth(1)
        .and_then(|s| s.split("\n\n").next())
        .unwrap_or_default()
        .to_lowercase();
    let mut mentioned: Vec<(usize, &String)> = request
        .columns
        .iter()
        .filter_map(|c| idea.find(&c.to_lowercase()).map(|pos| (pos, c)))
        .collect();
    mentioned.sort();
    let chart = ["histogram", "scatter", "line", "box", "bar"]
        .into_iter()
        .find(|k| idea.contains(k))
        .unwrap_or("bar");
    let x = mentioned.first().map(|(_, c)| c.as_str());
    let y = mentioned.get(1).map(|(_, c)| c.as_str());
    let aggregate = match chart {
        "bar" if idea.contains("count") || y.is_none() => "count",
        "bar" => "mean",
        "line" if y.is_some() => "mean",
        _ => "none",
    };
    // "bar chart of mean income by education" names y before x.
    let (x, y) = if chart == "bar" || chart == "box" || chart == "line" {
        match (x, y) {
            (Some(a), Some(b)) if idea.contains(" by ") || idea.contains(" over ") => (Some(b), Some(a)),
            other => other,
        }
    } else {
        (x, y)
    };
    let y = if chart == "histogram" { None } else { y };
    json!({
        "chart_type": chart,
        "x_field": x,
        "y_field": y,
        "aggregate": aggregate,
        "group_field": null,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::parse::{parse_branch_response, parse_initial_response};
    use crate::generation::prompts::{build_branch_prompt, initial_prompt};
    use crate::model::{DiagramTree, HypothesisDraft, DraftSource};

    fn cols() -> Vec<String> {
        ["age", "education_level", "income", "occupation"].map(String::from).to_vec()
    }

    #[test]
    fn mock_is_deterministic_and_parses() {
        let bundle = initial_prompt("dataset: x", "data analyst").with_columns(cols());
        let a = generate(&ProviderConfig::mock(), &bundle).unwrap();
        let b = generate(&ProviderConfig::mock(), &bundle).unwrap();
        assert_eq!(a, b);
        let drafts = parse_initial_response(&a).unwrap();
        assert_eq!(drafts.len(), 5);
        for d in &drafts {
            assert!(cols().iter().any(|c| d.visualization_idea.contains(c.as_str())));
        }
    }

    #[test]
    fn mock_branch_parses() {
        let mut tree = DiagramTree::new("intent");
        let root = tree.root_id().clone();
        let d = HypothesisDraft {
            title: "Education Level".into(),
            hypothesis_text: "[Education Level]: Income is highly correlated to education level.".into(),
            visualization_idea: "v".into(),
            rationale: "r".into(),
            related_work: String::new(),
            source_kind: DraftSource::Initial,
        };
        let ids = tree.add_children(&root, &[d], None).unwrap();
        let node = tree.get(&ids[0]).unwrap();
        for input in [None, Some("steer")] {
            let bundle = build_branch_prompt(node, input).unwrap().with_columns(cols());
            let raw = generate(&ProviderConfig::mock(), &bundle).unwrap();
            let drafts = parse_branch_response(&raw).unwrap();
            assert_eq!(drafts.len(), 3);
            assert!(drafts[0].title.starts_with("Education Level"));
        }
    }

    #[test]
    fn mock_without_columns_still_parses() {
        let bundle = initial_prompt("dataset: x", "data analyst");
        parse_initial_response(&generate(&ProviderConfig::mock(), &bundle).unwrap()).unwrap();
    }

    #[test]
    fn remote_without_key_fails_before_network() {
        let cfg = ProviderConfig::remote("http://127.0.0.1:9/never", "HYPOTREE_TEST_UNSET_KEY_VAR");
        let bundle = initial_prompt("s", "p");
        assert_eq!(
            generate(&cfg, &bundle).unwrap_err(),
            GenerationError::AuthMissing("HYPOTREE_TEST_UNSET_KEY_VAR".into())
        );
    }

    #[test]
    fn remote_requires_endpoint() {
        let cfg = ProviderConfig { mode: ProviderMode::Remote, ..ProviderConfig::default() };
        assert!(matches!(cfg.validate(), Err(GenerationError::InvalidConfig(_))));
    }

    #[test]
    fn response_path_resolution() {
        let v = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(resolve_path(&v, "choices.0.message.content"), Some(&json!("hi")));
        assert_eq!(resolve_path(&v, "choices.3.message"), None);
    }

    #[test]
    fn display_names() {
        assert_eq!(display_name("education_level"), "Education Level");
        assert_eq!(display_name("income"), "Income");
    }
}
