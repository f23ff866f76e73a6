//! Response parsing: JSON list of hypotheses into drafts.

use serde_json::{Map, Value};

use crate::model::{DraftSource, HypothesisDraft, BRANCH_HYPOTHESES, INITIAL_HYPOTHESES};

use super::GenerationError;

const FALLBACK_TITLE_WORDS: usize = 4;

/// Removes a surrounding Markdown code fence (with optional language tag).
pub fn strip_code_fence(raw: &str) -> &str {
    let trimmed = raw.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // Drop the info string (e.g. "json") up to the first newline.
    let body = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => rest,
    };
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

fn parse_array(raw: &str) -> Result<Vec<Value>, GenerationError> {
    let body = strip_code_fence(raw);
    match serde_json::from_str::<Value>(body) {
        Ok(Value::Array(items)) => Ok(items),
        Ok(other) => Err(GenerationError::MalformedResponse(format!(
            "expected a JSON array, got {}",
            kind_name(&other)
        ))),
        Err(e) => Err(GenerationError::MalformedResponse(format!("invalid JSON: {e}"))),
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn text_field<'a>(obj: &'a Map<String, Value>, key: &str, at: usize) -> Result<&'a str, GenerationError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(GenerationError::MalformedResponse(format!(
            "element {at}: key {key:?} is not a string"
        ))),
        None => Err(GenerationError::MalformedResponse(format!(
            "element {at}: missing key {key:?}"
        ))),
    }
}

fn object_at(item: &Value, at: usize) -> Result<&Map<String, Value>, GenerationError> {
    item.as_object().ok_or_else(|| {
        GenerationError::MalformedResponse(format!("element {at} is {}, not an object", kind_name(item)))
    })
}

fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Title from a leading `[...]` prefix, else the first words of the text.
pub fn extract_title(hypothesis: &str) -> String {
    let trimmed = hypothesis.trim_start();
    if let Some(rest) = trimmed.strip_prefix('[') {
        if let Some(end) = rest.find(']') {
            let title = rest[..end].trim();
            if !title.is_empty() {
                return title.to_owned();
            }
            let after = rest[end + 1..].trim_start_matches(':');
            return first_words(after, FALLBACK_TITLE_WORDS);
        }
    }
    first_words(trimmed, FALLBACK_TITLE_WORDS)
}

fn check_cardinality(items: &[Value], expected: usize) -> Result<(), GenerationError> {
    if items.len() != expected {
        return Err(GenerationError::WrongCardinality { expected, actual: items.len() });
    }
    Ok(())
}

fn non_empty(text: &str, at: usize) -> Result<(), GenerationError> {
    if text.trim().is_empty() {
        return Err(GenerationError::MalformedResponse(format!(
            "element {at}: empty hypothesis"
        )));
    }
    Ok(())
}

/// Parses the initial-generation format: exactly five objects carrying
/// `index`, `hypothesis`, `visualization` and `rationale`, returned sorted by
/// `index`.
pub fn parse_initial_response(raw: &str) -> Result<Vec<HypothesisDraft>, GenerationError> {
    let items = parse_array(raw)?;
    check_cardinality(&items, INITIAL_HYPOTHESES)?;
    let mut indexed = Vec::with_capacity(items.len());
    for (at, item) in items.iter().enumerate() {
        let obj = object_at(item, at)?;
        let index = match obj.get("index") {
            Some(v) => v.as_i64().ok_or_else(|| {
                GenerationError::MalformedResponse(format!("element {at}: key \"index\" is not an integer"))
            })?,
            None => {
                return Err(GenerationError::MalformedResponse(format!(
                    "element {at}: missing key \"index\""
                )))
            }
        };
        let hypothesis = text_field(obj, "hypothesis", at)?;
        let visualization = text_field(obj, "visualization", at)?;
        let rationale = text_field(obj, "rationale", at)?;
        non_empty(hypothesis, at)?;
        indexed.push((
            index,
            HypothesisDraft {
                title: extract_title(hypothesis),
                hypothesis_text: hypothesis.to_owned(),
                visualization_idea: visualization.to_owned(),
                rationale: rationale.to_owned(),
                related_work: String::new(),
                source_kind: DraftSource::Initial,
            },
        ));
    }
    indexed.sort_by_key(|(index, _)| *index);
    Ok(indexed.into_iter().map(|(_, d)| d).collect())
}

/// Parses the branch format: exactly three objects with `title`,
/// `hypothesis`, `relatedWork`, `visualization` and `rationale`.
pub fn parse_branch_response(raw: &str) -> Result<Vec<HypothesisDraft>, GenerationError> {
    let items = parse_array(raw)?;
    check_cardinality(&items, BRANCH_HYPOTHESES)?;
    items
        .iter()
        .enumerate()
        .map(|(at, item)| {
            let obj = object_at(item, at)?;
            let title = text_field(obj, "title", at)?;
            let hypothesis = text_field(obj, "hypothesis", at)?;
            let related = text_field(obj, "relatedWork", at)?;
            let visualization = text_field(obj, "visualization", at)?;
            let rationale = text_field(obj, "rationale", at)?;
            non_empty(hypothesis, at)?;
            let title = match title.trim() {
                "" => extract_title(hypothesis),
                t => t.to_owned(),
            };
            Ok(HypothesisDraft {
                title,
                hypothesis_text: hypothesis.to_owned(),
                visualization_idea: visualization.to_owned(),
                rationale: rationale.to_owned(),
                related_work: related.to_owned(),
                source_kind: DraftSource::Branch,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn initial_fixture() -> String {
        let titles = ["Education Level", "Occupation", "Age Group", "Marital Status", "Region"];
        let items: Vec<String> = titles
            .iter()
            .enumerate()
            .rev()
            .map(|(i, t)| {
                format!(
                    r#"{{"index":{i},"hypothesis":"[{t}]: Income is highly correlated to {t}.","visualization":"bar chart of income by {t}","rationale":"Shows how {t} relates to income."}}"#
                )
            })
            .collect();
        format!("[{}]", items.join(","))
    }

    #[test]
    fn initial_parse_extracts_titles_and_sorts() {
        let drafts = parse_initial_response(&initial_fixture()).unwrap();
        assert_eq!(drafts.len(), 5);
        assert_eq!(drafts[0].title, "Education Level");
        assert_eq!(drafts[0].hypothesis_text, "[Education Level]: Income is highly correlated to Education Level.");
        assert!(drafts.iter().all(|d| d.related_work.is_empty()));
    }

    #[test]
    fn fenced_and_unfenced_parse_identically() {
        let raw = initial_fixture();
        let fenced = format!("```json\n{raw}\n```");
        assert_eq!(parse_initial_response(&fenced).unwrap(), parse_initial_response(&raw).unwrap());
        let bare_fence = format!("```\n{raw}\n```\n");
        assert_eq!(parse_initial_response(&bare_fence).unwrap(), parse_initial_response(&raw).unwrap());
    }

    #[test]
    fn empty_array_is_wrong_cardinality() {
        assert_eq!(
            parse_initial_response("[]").unwrap_err(),
            GenerationError::WrongCardinality { expected: 5, actual: 0 }
        );
    }

    #[test]
    fn title_fallback_uses_first_four_words() {
        assert_eq!(extract_title("Income rises with age in most regions"), "Income rises with age");
        assert_eq!(extract_title("[ Region ]: x"), "Region");
        assert_eq!(extract_title("[]: Income rises with age a lot"), "Income rises with age");
    }

    fn branch_item(title: &str) -> String {
        format!(
            r#"{{"title":"{title}","hypothesis":"There is a link with {title}.","relatedWork":"Previous studies have shown that {title} matters.","visualization":"scatterplot of a and b","rationale":"Rationale for {title}"}}"#
        )
    }

    #[test]
    fn branch_parse_keeps_related_work() {
        let raw = format!("[{},{},{}]", branch_item("A"), branch_item("B"), branch_item("C"));
        let drafts = parse_branch_response(&raw).unwrap();
        assert_eq!(drafts.len(), 3);
        assert_eq!(drafts[1].related_work, "Previous studies have shown that B matters.");
        assert_eq!(drafts[2].source_kind, DraftSource::Branch);
    }

    #[test]
    fn branch_parse_errors() {
        let four = format!(
            "[{},{},{},{}]",
            branch_item("A"),
            branch_item("B"),
            branch_item("C"),
            branch_item("D")
        );
        assert_eq!(
            parse_branch_response(&four).unwrap_err(),
            GenerationError::WrongCardinality { expected: 3, actual: 4 }
        );
        let missing = format!(
            "[{},{},{}]",
            branch_item("A"),
            branch_item("B"),
            r#"{"title":"C","hypothesis":"h","relatedWork":"r","visualization":"v"}"#
        );
        match parse_branch_response(&missing).unwrap_err() {
            GenerationError::MalformedResponse(msg) => assert!(msg.contains("rationale"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_branch_response(r#"{"title":"x"}"#),
            Err(GenerationError::MalformedResponse(_))
        ));
    }
}
