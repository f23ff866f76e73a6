//! Hypothesis generation: prompt assembly, provider transport and response
//! parsing.

mod parse;
mod prompts;
mod provider;

pub use parse::{extract_title, parse_branch_response, parse_initial_response, strip_code_fence};
pub use prompts::{
    build_branch_prompt, build_initial_prompt, chart_spec_request, initial_prompt, ChatRequest,
    PromptBundle, RequestKind, BRANCH_FORMAT_INSTRUCTIONS, DEFAULT_PERSONA,
    INITIAL_FORMAT_INSTRUCTIONS, SYSTEM_INSTRUCTIONS,
};
pub use provider::{generate, mock_response, ProviderConfig, ProviderMode, TextGenerator};

pub use crate::model::{DraftSource, HypothesisDraft};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("expected {expected} hypotheses, got {actual}")]
    WrongCardinality { expected: usize, actual: usize },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("API key variable {0} is not set")]
    AuthMissing(String),
    #[error("provider timed out after {0}s")]
    Timeout(u64),
    #[error("the intent node has no hypothesis to branch from")]
    RootNotBranchablePromptless,
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

/// Prompts, calls and parses the five initial hypotheses of a session.
pub fn initial_hypotheses(
    generator: &dyn TextGenerator,
    summary_text: &str,
    persona: &str,
    columns: Vec<String>,
) -> Result<Vec<HypothesisDraft>, GenerationError> {
    let bundle = initial_prompt(summary_text, persona).with_columns(columns);
    parse_initial_response(&generator.complete(&bundle.request())?)
}

/// Prompts, calls and parses three hypotheses branching off `selected`.
pub fn branch_hypotheses(
    generator: &dyn TextGenerator,
    selected: &crate::model::HypothesisNode,
    user_input: Option<&str>,
    columns: Vec<String>,
) -> Result<Vec<HypothesisDraft>, GenerationError> {
    let bundle = build_branch_prompt(selected, user_input)?.with_columns(columns);
    parse_branch_response(&generator.complete(&bundle.request())?)
}
