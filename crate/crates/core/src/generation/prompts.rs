//! Prompt templates and assembly.

use serde::{Deserialize, Serialize};

use crate::model::{HypothesisNode, BRANCH_HYPOTHESES, INITIAL_HYPOTHESES};

use super::GenerationError;

pub const DEFAULT_PERSONA: &str = "data analyst";

pub const SYSTEM_INSTRUCTIONS: &str = "You are an experienced data analyst who can generate a given number of insightful Hypothesis about data, when given a summary of the data, and a specified persona. The VISUALIZATIONS YOU RECOMMEND MUST FOLLOW VISUALIZATION BEST PRACTICES (e.g., must use bar charts instead of pie charts for comparing quantities) AND BE MEANINGFUL (e.g., plot longitude and latitude on maps where appropriate). They must also be relevant to the specified persona. Each goal must include a hypothesis with a title (in [], and the title don't need include the target variable, just include the new variable in the hypothesis), a visualization (THE VISUALIZATION MUST REFERENCE THE EXACT COLUMN FIELDS FROM THE SUMMARY), and a rationale (JUSTIFICATION FOR WHICH dataset FIELDS ARE USED and what we will learn from the visualization).";

pub const INITIAL_FORMAT_INSTRUCTIONS: &str = r#"THE OUTPUT MUST BE A CODE SNIPPET OF A VALID LIST OF JSON OBJECTS. IT MUST USE THE FOLLOWING FORMAT:
[
    { "index": 0,  "hypothesis": "[new variable X]: Y is highly correlated to X.", 
      "visualization": "scatterplot of X and Y", 
      "rationale": "This tells about "} ..
]
THE OUTPUT SHOULD ONLY USE THE JSON FORMAT ABOVE."#;

pub const BRANCH_FORMAT_INSTRUCTIONS: &str = r#"{
  "title": "short new variable X (no more than two words)",
  "hypothesis": "There is a...",
  "relatedWork": "Previous studies have shown that...",
  "visualization": "Description of visualization idea",
  "rationale": "Rationale for the visualization"
}"#;

pub const CHART_SPEC_SYSTEM: &str = "You map a visualization idea onto a declarative chart specification over the columns of a dataset. Use only the exact column names listed.";

pub const CHART_SPEC_FORMAT: &str = r#"Respond with one JSON object and nothing else:
{"chart_type": "bar|line|scatter|histogram|box", "x_field": "<column>", "y_field": "<column or null>", "aggregate": "none|count|mean|median|sum", "group_field": "<column or null>"}"#;

/// What a request asks the generator for. Carried alongside the prompt so
/// the mock provider can answer in the right shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    InitialHypotheses,
    BranchHypotheses,
    ChartSpec,
}

/// A single chat-style generation request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub kind: RequestKind,
    pub system: String,
    pub content: String,
    /// Dataset column names in scope. Not sent to remote providers.
    pub columns: Vec<String>,
    /// Title of the hypothesis being branched from. Not sent to remote
    /// providers.
    pub topic: Option<String>,
}

/// An assembled hypothesis-generation prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: RequestKind,
    pub system_text: String,
    pub user_text: String,
    pub format_text: String,
    pub assembled: String,
    pub n: usize,
    pub persona: String,
    pub columns: Vec<String>,
    pub topic: Option<String>,
}

impl PromptBundle {
    pub fn with_columns(mut self, columns: Vec<String>) -> Self {
        self.columns = columns;
        self
    }

    pub fn request(&self) -> ChatRequest {
        ChatRequest {
            kind: self.kind,
            system: self.system_text.clone(),
            content: self.assembled.clone(),
            columns: self.columns.clone(),
            topic: self.topic.clone(),
        }
    }
}

/// Prompt for the first set of hypotheses of a session.
pub fn build_initial_prompt(summary_text: &str, persona: &str, n: usize) -> PromptBundle {
    let user_text = format!(
        "The number of Hypothesis to generate is {n}. The goals should be based on the data summary below, {summary_text}. The generated Hypothesis SHOULD BE FOCUSED ON THE INTERESTS AND PERSPECTIVE of a {persona} persona, who is interested in complex, insightful goals about the data."
    );
    let format_text = INITIAL_FORMAT_INSTRUCTIONS.to_owned();
    let assembled =
        format!("{user_text}\n\n {format_text} \n\n. The generated {n} goals are: \n ");
    PromptBundle {
        kind: RequestKind::InitialHypotheses,
        system_text: SYSTEM_INSTRUCTIONS.to_owned(),
        user_text,
        format_text,
        assembled,
        n,
        persona: persona.to_owned(),
        columns: Vec::new(),
        topic: None,
    }
}

/// Default-sized initial prompt.
pub fn initial_prompt(summary_text: &str, persona: &str) -> PromptBundle {
    build_initial_prompt(summary_text, persona, INITIAL_HYPOTHESES)
}

/// Prompt for three hypotheses branching off `selected`, optionally steered
/// by free text from the user.
pub fn build_branch_prompt(
    selected: &HypothesisNode,
    user_input: Option<&str>,
) -> Result<PromptBundle, GenerationError> {
    if selected.is_root() {
        return Err(GenerationError::RootNotBranchablePromptless);
    }
    let n = BRANCH_HYPOTHESES;
    let steering = match user_input.map(str::trim).filter(|s| !s.is_empty()) {
        Some(input) => format!(" and the user input {input}"),
        None => String::new(),
    };
    let user_text = format!(
        "Based on the hypothesis {}{steering}, generate {n} new and more insightful hypotheses based on the given hypothesis. Format the output as a JSON array with the following structure for each hypothesis:",
        selected.hypothesis_text
    );
    let format_text = BRANCH_FORMAT_INSTRUCTIONS.to_owned();
    let assembled = format!("{user_text}\n{format_text}");
    Ok(PromptBundle {
        kind: RequestKind::BranchHypotheses,
        system_text: SYSTEM_INSTRUCTIONS.to_owned(),
        user_text,
        format_text,
        assembled,
        n,
        persona: DEFAULT_PERSONA.to_owned(),
        columns: Vec::new(),
        topic: Some(selected.title.clone()),
    })
}

/// Request asking the generator to turn a visualization idea into a chart
/// spec. `feedback` carries the validation error of a previous attempt.
pub fn chart_spec_request(
    idea: &str,
    summary_text: &str,
    columns: Vec<String>,
    feedback: Option<&str>,
) -> ChatRequest {
    let mut content = format!(
        "Data summary:\n{summary_text}\n\nVisualization idea: {idea}\n\n{CHART_SPEC_FORMAT}"
    );
    if let Some(problem) = feedback {
        content.push_str(&format!(
            "\n\nYour previous answer was rejected: {problem}. Correct it."
        ));
    }
    ChatRequest {
        kind: RequestKind::ChartSpec,
        system: CHART_SPEC_SYSTEM.to_owned(),
        content,
        columns,
        topic: None,
    }
}
