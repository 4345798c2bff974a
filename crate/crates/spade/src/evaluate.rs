//! Evaluates assertion specs over labeled examples, producing the result
//! matrix. Every evaluation error — unresolvable field reference, invalid
//! regex, gateway failure, ambiguous judge reply — maps to a failed cell (0)
//! and an issue entry for the run report; nothing aborts the matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spade_core::history::segment_sentences;
use spade_core::{
    AssertionSpec, CandidateSet, ExampleRun, ExampleSet, JsonShape, OperandItem, OperandSource,
    ResultMatrix,
};

use crate::gateway::Gateway;

/// One evaluation error, mapped to a failed cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalIssue {
    pub assertion_id: String,
    pub example_id: String,
    pub detail: String,
}

/// Evaluates one spec on one example: 1 = pass, 0 = failure flagged. Errors
/// are appended to `issues` and count as 0 per the error→failure convention.
pub fn evaluate_assertion(
    spec: &AssertionSpec,
    example: &ExampleRun,
    gateway: &Gateway,
    issues: &mut Vec<String>,
) -> u8 {
    match eval(spec, example, gateway, issues) {
        true => 1,
        false => 0,
    }
}

fn eval(
    spec: &AssertionSpec,
    example: &ExampleRun,
    gateway: &Gateway,
    issues: &mut Vec<String>,
) -> bool {
    match spec {
        AssertionSpec::ContainsAll { items } => items
            .iter()
            .all(|item| check_contains(item, example, issues).unwrap_or(false)),
        AssertionSpec::ContainsAny { items } => items
            .iter()
            .any(|item| check_contains(item, example, issues).unwrap_or(false)),
        AssertionSpec::ExcludesAll { items } => items
            .iter()
            .all(|item| match check_contains(item, example, issues) {
                Some(present) => !present,
                None => false, // unresolvable operand: error → failure
            }),
        AssertionSpec::StartsWith { prefix } => {
            let Some(needle) = resolve(prefix, example, issues) else {
                return false;
            };
            let trimmed = example.response.trim_start();
            if prefix.case_insensitive {
                trimmed.to_lowercase().starts_with(&needle.to_lowercase())
            } else {
                trimmed.starts_with(needle.as_str())
            }
        }
        AssertionSpec::RegexMatch { pattern } => match regex::Regex::new(pattern) {
            Ok(re) => re.is_match(&example.response),
            Err(e) => {
                issues.push(format!("invalid regex {pattern:?}: {e}"));
                false
            }
        },
        AssertionSpec::WordCount { min, max } => {
            within(example.response.split_whitespace().count() as u64, *min, *max)
        }
        AssertionSpec::SentenceCount { min, max } => {
            within(segment_sentences(&example.response).len() as u64, *min, *max)
        }
        AssertionSpec::JsonParseable { shape } => match parse_json(&example.response) {
            Some(value) => shape_matches(&value, *shape),
            None => false, // unparseable response is a plain failure, not an error
        },
        AssertionSpec::JsonListMinLen { min_len } => match parse_json(&example.response) {
            Some(serde_json::Value::Array(items)) => items.len() as u64 >= *min_len,
            _ => false,
        },
        AssertionSpec::JsonRequiredKeys { keys } => match parse_json(&example.response) {
            Some(serde_json::Value::Object(map)) => keys.iter().all(|k| map.contains_key(k)),
            _ => false,
        },
        AssertionSpec::LlmQuestion { questions } => {
            for question in questions {
                match gateway.ask_boolean(&example.formatted_prompt, &example.response, question)
                {
                    Ok(true) => continue,
                    Ok(false) => return false,
                    Err(e) => {
                        issues.push(format!("judge call failed: {e}"));
                        return false;
                    }
                }
            }
            true
        }
        AssertionSpec::AllOf { children } => children
            .iter()
            .all(|child| eval(child, example, gateway, issues)),
        AssertionSpec::AnyOf { children } => children
            .iter()
            .any(|child| eval(child, example, gateway, issues)),
    }
}

/// Resolves an operand to its text: literals as-is, field references from
/// the example's input record. `None` (plus an issue) when the field is
/// missing.
fn resolve(item: &OperandItem, example: &ExampleRun, issues: &mut Vec<String>) -> Option<String> {
    match &item.source {
        OperandSource::Literal(literal) => Some(literal.clone()),
        OperandSource::Field(field) => match example.input.get(field) {
            Some(value) => Some(value.clone()),
            None => {
                issues.push(format!("field reference {field:?} not in example input"));
                None
            }
        },
    }
}

/// Whether the response contains the operand, honoring the case-fold flag.
/// `None` when the operand could not be resolved.
fn check_contains(
    item: &OperandItem,
    example: &ExampleRun,
    issues: &mut Vec<String>,
) -> Option<bool> {
    let needle = resolve(item, example, issues)?;
    Some(if item.case_insensitive {
        example
            .response
            .to_lowercase()
            .contains(&needle.to_lowercase())
    } else {
        example.response.contains(&needle)
    })
}

fn within(count: u64, min: Option<u64>, max: Option<u64>) -> bool {
    min.map_or(true, |lo| count >= lo) && max.map_or(true, |hi| count <= hi)
}

fn parse_json(text: &str) -> Option<serde_json::Value> {
    serde_json::from_str(text).ok()
}

fn shape_matches(value: &serde_json::Value, shape: JsonShape) -> bool {
    match shape {
        JsonShape::Any => true,
        JsonShape::Object => value.is_object(),
        JsonShape::List => value.is_array(),
    }
}

/// Evaluates every candidate on every example. Cells are independent and
/// evaluated in parallel; assembly is position-addressed, so thread schedule
/// never affects the outcome. Issues come back sorted for determinism.
pub fn build_result_matrix(
    candidates: &CandidateSet,
    examples: &ExampleSet,
    gateway: &Gateway,
) -> (ResultMatrix, Vec<EvalIssue>) {
    assert!(!candidates.candidates().is_empty(), "no candidates to evaluate");
    assert!(!examples.is_empty(), "no examples to evaluate on");

    let rows: Vec<(Vec<u8>, Vec<EvalIssue>)> = examples
        .examples()
        .par_iter()
        .map(|example| {
            let mut row = Vec::with_capacity(candidates.candidates().len());
            let mut row_issues = Vec::new();
            for candidate in candidates.candidates() {
                let mut cell_issues = Vec::new();
                let bit = evaluate_assertion(&candidate.spec, example, gateway, &mut cell_issues);
                row.push(bit);
                row_issues.extend(cell_issues.into_iter().map(|detail| EvalIssue {
                    assertion_id: candidate.id.clone(),
                    example_id: example.id.clone(),
                    detail,
                }));
            }
            (row, row_issues)
        })
        .collect();

    let mut cells = Vec::with_capacity(rows.len());
    let mut issues = Vec::new();
    for (row, row_issues) in rows {
        cells.push(row);
        issues.extend(row_issues);
    }
    issues.sort_by(|a, b| {
        (&a.example_id, &a.assertion_id, &a.detail).cmp(&(&b.example_id, &b.assertion_id, &b.detail))
    });

    let matrix = ResultMatrix::new(
        examples.ids().to_vec(),
        candidates.ids(),
        cells,
    )
    .expect("evaluation produces a well-formed matrix");
    (matrix, issues)
}
