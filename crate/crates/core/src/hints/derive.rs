//! Mapping a node's visualization idea onto a [`ChartSpec`].

use std::collections::BTreeSet;

use crate::dataset::{summary_text, DataSummary, Dtype};
use crate::generation::{chart_spec_request, strip_code_fence, TextGenerator};
use crate::model::HypothesisNode;

use super::chart::{Aggregate, ChartSpec, ChartType};
use super::tokens;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error("the intent node has no visualization idea")]
    RootHasNoChart,
    #[error("no column name shares a token with the visualization idea")]
    NoMappableColumns,
}

/// How a spec was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecOrigin {
    Provider,
    Corrected,
    Fallback,
}

fn parse_spec(raw: &str) -> Result<ChartSpec, String> {
    serde_json::from_str(strip_code_fence(raw)).map_err(|e| format!("not a chart spec: {e}"))
}

/// Asks the generator for a spec, re-asks once with the validation error,
/// then falls back to token overlap between column names and the node text.
pub fn derive_spec(
    node: &HypothesisNode,
    summary: &DataSummary,
    generator: &dyn TextGenerator,
) -> Result<(ChartSpec, SpecOrigin), DeriveError> {
    if node.is_root() {
        return Err(DeriveError::RootHasNoChart);
    }
    let idea = node.visualization_idea.trim();
    if idea.is_empty() {
        return Err(DeriveError::NoMappableColumns);
    }
    let text = summary_text(summary);
    let mut feedback: Option<String> = None;
    for origin in [SpecOrigin::Provider, SpecOrigin::Corrected] {
        let request = chart_spec_request(idea, &text, summary.column_names(), feedback.as_deref());
        let problem = match generator.complete(&request) {
            Ok(raw) => match parse_spec(&raw) {
                Ok(spec) => match spec.validate(summary) {
                    Ok(()) => return Ok((spec, origin)),
                    Err(e) => e.to_string(),
                },
                Err(e) => e,
            },
            Err(e) => {
                tracing::warn!(error = %e, "chart spec request failed");
                break;
            }
        };
        feedback = Some(problem);
    }
    let spec = fallback_spec(&format!("{idea} {}", node.hypothesis_text), summary)?;
    Ok((spec, SpecOrigin::Fallback))
}

/// Number of distinct tokens of `column` that occur in `text_tokens`.
pub fn column_overlap(column: &str, text_tokens: &BTreeSet<String>) -> usize {
    tokens(column).into_iter().collect::<BTreeSet<_>>().intersection(text_tokens).count()
}

/// The two columns with the highest overlap scores, in column order. Ties
/// prefer earlier columns.
pub fn best_column_pair(text: &str, columns: &[String]) -> Option<(usize, usize)> {
    let text_tokens: BTreeSet<String> = tokens(text).into_iter().collect();
    let mut scored: Vec<(usize, usize)> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (column_overlap(c, &text_tokens), i))
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    match scored.as_slice() {
        [] | [(0, _), ..] => None,
        [(_, only)] => Some((*only, *only)),
        [(_, a), (_, b), ..] => Some(((*a).min(*b), (*a).max(*b))),
    }
}

/// Scatter when both columns are numeric, mean bar when one is, count bar
/// otherwise.
pub fn fallback_spec(text: &str, summary: &DataSummary) -> Result<ChartSpec, DeriveError> {
    let names = summary.column_names();
    let (i, j) = best_column_pair(text, &names).ok_or(DeriveError::NoMappableColumns)?;
    let numeric = |k: usize| summary.columns[k].dtype == Dtype::Numeric;
    let (a, b) = (names[i].clone(), names[j].clone());
    let spec = if i != j && numeric(i) && numeric(j) {
        ChartSpec { chart_type: ChartType::Scatter, x_field: a, y_field: Some(b), aggregate: Aggregate::None, group_field: None }
    } else if i != j && numeric(i) != numeric(j) {
        let (x, y) = if numeric(j) { (a, b) } else { (b, a) };
        ChartSpec { chart_type: ChartType::Bar, x_field: x, y_field: Some(y), aggregate: Aggregate::Mean, group_field: None }
    } else {
        ChartSpec { chart_type: ChartType::Bar, x_field: a, y_field: None, aggregate: Aggregate::Count, group_field: None }
    };
    debug_assert!(spec.validate(summary).is_ok());
    Ok(spec)
}
