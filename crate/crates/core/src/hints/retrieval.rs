//! Supporting text for a hypothesis: a remote retrieval endpoint or an
//! offline keyword-ranked corpus of plain-text files.
//!
//! Offline scoring: a document's score is the sum of `ln(1 + N / df)` over
//! the distinct query tokens it shares, where `N` is the corpus size and `df`
//! the number of documents containing the token. Documents scoring zero are
//! never returned.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::HypothesisNode;

use super::tokens;

pub const MAX_SNIPPETS: usize = 3;
pub const EXCERPT_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub source_title: String,
    pub excerpt: String,
    pub source_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportingText {
    pub snippets: Vec<Snippet>,
    pub query: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverMode {
    Offline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrieverConfig {
    pub mode: RetrieverMode,
    pub corpus_dir: Option<PathBuf>,
    pub endpoint_url: Option<String>,
    pub top_k: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            mode: RetrieverMode::Offline,
            corpus_dir: None,
            endpoint_url: None,
            top_k: MAX_SNIPPETS,
            timeout_secs: 10,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("retriever unavailable: {0}")]
    RetrieverUnavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub title: String,
    pub text: String,
    pub uri: String,
    tokens: BTreeSet<String>,
}

impl Document {
    pub fn new(title: &str, text: &str, uri: &str) -> Self {
        Self {
            title: title.to_owned(),
            text: text.to_owned(),
            uri: uri.to_owned(),
            tokens: tokens(text).into_iter().collect(),
        }
    }
}

/// An in-memory offline corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    df: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in &docs {
            for t in &d.tokens {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        Self { docs, df }
    }

    /// Loads every `*.txt` file of `dir`; the file stem is the title.
    /// Unreadable or non-UTF-8 files are skipped.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let docs = paths
            .iter()
            .filter_map(|p| {
                let text = std::fs::read_to_string(p).ok()?;
                let title = p.file_stem()?.to_string_lossy().into_owned();
                let uri = format!("file://{}", p.display());
                Some(Document::new(&title, &text, &uri))
            })
            .collect();
        Ok(Self::new(docs))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn idf(&self, token: &str) -> f64 {
        match self.df.get(token) {
            Some(&df) if df > 0 => (1.0 + self.docs.len() as f64 / df as f64).ln(),
            _ => 0.0,
        }
    }

    /// Per-document scores for a query, in corpus order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q: BTreeSet<String> = tokens(query).into_iter().collect();
        self.docs
            .iter()
            .map(|d| q.intersection(&d.tokens).map(|t| self.idf(t)).sum())
            .collect()
    }

    /// Top `k` positively scored documents; ties keep corpus order.
    pub fn search(&self, query: &str, k: usize) -> Vec<Snippet> {
        let q: BTreeSet<String> = tokens(query).into_iter().collect();
        let mut ranked: Vec<(f64, usize)> = self
            .scores(query)
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .map(|(i, s)| (s, i))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        ranked
            .into_iter()
            .take(k.min(MAX_SNIPPETS))
            .filter_map(|(_, i)| {
                let doc = &self.docs[i];
                let best = q
                    .intersection(&doc.tokens)
                    .max_by(|a, b| self.idf(a).total_cmp(&self.idf(b)).then(b.cmp(a)))?;
                let excerpt = excerpt_around(&doc.text, best);
                (!excerpt.is_empty()).then(|| Snippet {
                    source_title: doc.title.clone(),
                    excerpt,
                    source_uri: doc.uri.clone(),
                })
            })
            .collect()
    }
}

/// The first `EXCERPT_CHARS` characters of `text` that include the first
/// occurrence of `token`.
pub fn excerpt_around(text: &str, token: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = text.to_lowercase().chars().collect();
    let needle: Vec<char> = token.chars().collect();
    let start = if lower.len() == chars.len() {
        lower
            .windows(needle.len().max(1))
            .position(|w| w == needle.as_slice())
            .map(|pos| if pos + needle.len() <= EXCERPT_CHARS { 0 } else { pos })
            .unwrap_or(0)
    } else {
        0
    };
    chars[start..].iter().take(EXCERPT_CHARS).collect::<String>().trim().to_owned()
}

pub fn query_for(node: &HypothesisNode) -> String {
    format!("{} {}", node.title, node.hypothesis_text)
}

/// Retrieves supporting text for `node`. An offline config without a corpus
/// yields no snippets.
pub fn fetch_supporting_text(
    node: &HypothesisNode,
    cfg: &RetrieverConfig,
    corpus: Option<&Corpus>,
) -> Result<SupportingText, RetrievalError> {
    let query = query_for(node);
    let snippets = match cfg.mode {
        RetrieverMode::Offline => corpus.map(|c| c.search(&query, cfg.top_k)).unwrap_or_default(),
        RetrieverMode::Remote => remote_search(cfg, &query)?,
    };
    Ok(SupportingText { snippets, query })
}

fn remote_search(cfg: &RetrieverConfig, query: &str) -> Result<Vec<Snippet>, RetrievalError> {
    let url = cfg
        .endpoint_url
        .as_deref()
        .ok_or_else(|| RetrievalError::RetrieverUnavailable("no endpoint_url configured".into()))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
        .build()
        .into();
    let body = json!({"query": query, "top_k": cfg.top_k});
    let mut attempt = 0;
    let value: Value = loop {
        match agent.post(url).send_json(&body) {
            Ok(mut resp) => {
                break resp
                    .body_mut()
                    .read_json()
                    .map_err(|e| RetrievalError::RetrieverUnavailable(format!("bad body: {e}")))?
            }
            Err(e) if attempt < cfg.max_retries => {
                tracing::warn!(attempt, error = %e, "retrieval call failed, retrying");
                std::thread::sleep(Duration::from_millis(100u64 << attempt.min(6)));
                attempt += 1;
            }
            Err(e) => return Err(RetrievalError::RetrieverUnavailable(e.to_string())),
        }
    };
    let passages = value
        .get("passages")
        .and_then(Value::as_array)
        .ok_or_else(|| RetrievalError::RetrieverUnavailable("response has no passages".into()))?;
    Ok(passages
        .iter()
        .filter_map(|p| {
            let text = p.get("text")?.as_str()?;
            let excerpt: String = text.chars().take(EXCERPT_CHARS).collect::<String>().trim().to_owned();
            (!excerpt.is_empty()).then(|| Snippet {
                source_title: p.get("title").and_then(Value::as_str).unwrap_or_default().to_owned(),
                excerpt,
                source_uri: p.get("uri").and_then(Value::as_str).unwrap_or_default().to_owned(),
            })
        })
        .take(cfg.top_k.min(MAX_SNIPPETS))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        Corpus::new(vec![
            Document::new("Wages", "Average income varies by region and industry.", "a"),
            Document::new("Schooling", "Education raises lifetime income for most workers.", "b"),
            Document::new("Weather", "Rainfall patterns shift with the seasons.", "c"),
        ])
    }

    #[test]
    fn document_sharing_both_terms_ranks_first() {
        let hits = corpus().search("income and education", 3);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].source_title, "Schooling");
    }

    #[test]
    fn zero_overlap_is_empty() {
        assert!(corpus().search("volcano eruption", 3).is_empty());
    }

    #[test]
    fn idf_formula() {
        let c = corpus();
        assert!((c.idf("income") - (1.0f64 + 3.0 / 2.0).ln()).abs() < 1e-12);
        assert_eq!(c.idf("nothing"), 0.0);
    }

    #[test]
    fn excerpt_contains_late_token() {
        let text = format!("{} education matters", "x ".repeat(300));
        let ex = excerpt_around(&text, "education");
        assert!(ex.starts_with("education"));
        assert!(ex.chars().count() <= EXCERPT_CHARS);
        let short = excerpt_around("Education first.", "education");
        assert_eq!(short, "Education first.");
    }

    #[test]
    fn unreachable_remote_is_unavailable() {
        let cfg = RetrieverConfig {
            mode: RetrieverMode::Remote,
            endpoint_url: Some("http://127.0.0.1:9/retrieve".into()),
            max_retries: 0,
            timeout_secs: 1,
            ..RetrieverConfig::default()
        };
        let node = crate::model::DiagramTree::new("x").root().clone();
        assert!(matches!(
            fetch_supporting_text(&node, &cfg, None),
            Err(RetrievalError::RetrieverUnavailable(_))
        ));
    }
}
