//! Information hints for a clicked node: a chart computed from the dataset
//! and retrieved supporting text.

mod chart;
mod derive;
mod retrieval;

use std::collections::HashMap;
use std::sync::Mutex;

pub use chart::{
    compute_payload, median, sturges_bins, Aggregate, ChartPayload, ChartSpec, ChartType, ChartValue,
    Series, SpecDatasetMismatch, SpecError, SCATTER_POINT_CAP,
};
pub use derive::{best_column_pair, column_overlap, derive_spec, fallback_spec, DeriveError, SpecOrigin};
pub use retrieval::{
    excerpt_around, fetch_supporting_text, query_for, Corpus, Document, RetrievalError, RetrieverConfig,
    RetrieverMode, Snippet, SupportingText, EXCERPT_CHARS, MAX_SNIPPETS,
};

use crate::model::NodeId;

/// Words too common to carry retrieval or column-matching signal.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on", "or",
    "than", "that", "the", "this", "to", "with",
];

/// Lowercased alphanumeric runs, without stopwords.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// Chart payloads and derived specs per node. The dataset is immutable for a
/// session, so entries never go stale.
#[derive(Debug, Default)]
pub struct HintCache {
    specs: Mutex<HashMap<NodeId, (ChartSpec, SpecOrigin)>>,
    payloads: Mutex<HashMap<(NodeId, ChartSpec), ChartPayload>>,
}

impl HintCache {
    pub fn spec(&self, node: &NodeId) -> Option<(ChartSpec, SpecOrigin)> {
        self.specs.lock().expect("hint cache poisoned").get(node).cloned()
    }

    pub fn put_spec(&self, node: &NodeId, spec: ChartSpec, origin: SpecOrigin) {
        self.specs.lock().expect("hint cache poisoned").insert(node.clone(), (spec, origin));
    }

    pub fn payload(&self, node: &NodeId, spec: &ChartSpec) -> Option<ChartPayload> {
        self.payloads
            .lock()
            .expect("hint cache poisoned")
            .get(&(node.clone(), spec.clone()))
            .cloned()
    }

    pub fn put_payload(&self, node: &NodeId, payload: ChartPayload) {
        self.payloads
            .lock()
            .expect("hint cache poisoned")
            .insert((node.clone(), payload.spec.clone()), payload);
    }

    pub fn len(&self) -> usize {
        self.payloads.lock().expect("hint cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_split_and_drop_stopwords() {
        assert_eq!(tokens("Income_by Education-Level, the 2nd"), vec!["income", "education", "level", "2nd"]);
    }
}
