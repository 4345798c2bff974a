//! The assertion rule DSL: machine-checkable predicates over a pipeline
//! response, plus an LLM-question escape hatch for qualitative criteria.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Composite rules may nest at most this many levels deep.
pub const MAX_COMPOSITE_DEPTH: usize = 3;
/// An `LlmQuestion` rule carries one or two questions, evaluated as a
/// conjunction.
pub const MAX_LLM_QUESTIONS: usize = 2;

/// Where an operand string comes from: a literal, or a named field of the
/// example's input record, resolved at evaluation time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperandSource {
    Literal(String),
    Field(String),
}

/// One operand of a string-matching rule. With `case_insensitive` set, both
/// the operand and the response are lowercased before comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperandItem {
    #[serde(flatten)]
    pub source: OperandSource,
    #[serde(default, skip_serializing_if = "is_false")]
    pub case_insensitive: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl OperandItem {
    pub fn literal(text: &str) -> Self {
        OperandItem {
            source: OperandSource::Literal(text.to_string()),
            case_insensitive: false,
        }
    }

    pub fn literal_ci(text: &str) -> Self {
        OperandItem {
            source: OperandSource::Literal(text.to_string()),
            case_insensitive: true,
        }
    }

    pub fn field(name: &str) -> Self {
        OperandItem {
            source: OperandSource::Field(name.to_string()),
            case_insensitive: false,
        }
    }

    pub fn field_ci(name: &str) -> Self {
        OperandItem {
            source: OperandSource::Field(name.to_string()),
            case_insensitive: true,
        }
    }
}

/// Required JSON shape for [`AssertionSpec::JsonParseable`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JsonShape {
    #[default]
    Any,
    Object,
    List,
}

/// A candidate assertion's executable rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssertionSpec {
    /// Response contains every operand.
    ContainsAll { items: Vec<OperandItem> },
    /// Response contains at least one operand.
    ContainsAny { items: Vec<OperandItem> },
    /// Response contains none of the operands.
    ExcludesAll { items: Vec<OperandItem> },
    /// Response begins with the operand after leading whitespace is trimmed.
    StartsWith { prefix: OperandItem },
    /// Response matches the regular expression.
    RegexMatch { pattern: String },
    /// Whitespace-delimited word count lies within the bounds.
    WordCount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<u64>,
    },
    /// Sentence count, per the history segmenter, lies within the bounds.
    SentenceCount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<u64>,
    },
    /// Response parses as JSON of the given shape.
    JsonParseable {
        #[serde(default)]
        shape: JsonShape,
    },
    /// Response parses as a JSON list with at least `min_len` elements.
    JsonListMinLen { min_len: u64 },
    /// Response parses as a JSON object containing every listed key.
    JsonRequiredKeys { keys: Vec<String> },
    /// Conjunction of yes/no questions put to a judge LLM.
    LlmQuestion { questions: Vec<String> },
    /// Every child must pass. Children evaluate left to right and
    /// short-circuit on the first failure.
    AllOf { children: Vec<AssertionSpec> },
    /// At least one child must pass. Children evaluate left to right and
    /// short-circuit on the first success.
    AnyOf { children: Vec<AssertionSpec> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecError {
    EmptyOperands { kind: &'static str },
    EmptyOperandText { kind: &'static str },
    EmptyPattern,
    MissingBounds { kind: &'static str },
    ReversedBounds { kind: &'static str, min: u64, max: u64 },
    QuestionCount { found: usize },
    EmptyQuestion,
    EmptyChildren { kind: &'static str },
    TooDeep { depth: usize },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::EmptyOperands { kind } => write!(f, "{kind} needs at least one operand"),
            SpecError::EmptyOperandText { kind } => {
                write!(f, "{kind} has an empty literal or field name")
            }
            SpecError::EmptyPattern => write!(f, "regex_match pattern is empty"),
            SpecError::MissingBounds { kind } => {
                write!(f, "{kind} needs a min bound, a max bound, or both")
            }
            SpecError::ReversedBounds { kind, min, max } => {
                write!(f, "{kind} bounds are reversed: min {min} > max {max}")
            }
            SpecError::QuestionCount { found } => write!(
                f,
                "llm_question takes 1..={MAX_LLM_QUESTIONS} questions, found {found}"
            ),
            SpecError::EmptyQuestion => write!(f, "llm_question has an empty question"),
            SpecError::EmptyChildren { kind } => write!(f, "{kind} needs at least one child"),
            SpecError::TooDeep { depth } => write!(
                f,
                "composite rules nest {depth} levels deep, limit is {MAX_COMPOSITE_DEPTH}"
            ),
        }
    }
}

impl core::error::Error for SpecError {}

impl AssertionSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AssertionSpec::ContainsAll { .. } => "contains_all",
            AssertionSpec::ContainsAny { .. } => "contains_any",
            AssertionSpec::ExcludesAll { .. } => "excludes_all",
            AssertionSpec::StartsWith { .. } => "starts_with",
            AssertionSpec::RegexMatch { .. } => "regex_match",
            AssertionSpec::WordCount { .. } => "word_count",
            AssertionSpec::SentenceCount { .. } => "sentence_count",
            AssertionSpec::JsonParseable { .. } => "json_parseable",
            AssertionSpec::JsonListMinLen { .. } => "json_list_min_len",
            AssertionSpec::JsonRequiredKeys { .. } => "json_required_keys",
            AssertionSpec::LlmQuestion { .. } => "llm_question",
            AssertionSpec::AllOf { .. } => "all_of",
            AssertionSpec::AnyOf { .. } => "any_of",
        }
    }

    /// Checks operand arity, bound ordering, question counts, and composite
    /// nesting depth.
    pub fn validate(&self) -> Result<(), SpecError> {
        self.validate_at(1)
    }

    fn validate_at(&self, depth: usize) -> Result<(), SpecError> {
        let kind = self.kind_name();
        match self {
            AssertionSpec::ContainsAll { items }
            | AssertionSpec::ContainsAny { items }
            | AssertionSpec::ExcludesAll { items } => {
                if items.is_empty() {
                    return Err(SpecError::EmptyOperands { kind });
                }
                for item in items {
                    validate_item(kind, item)?;
                }
                Ok(())
            }
            AssertionSpec::StartsWith { prefix } => validate_item(kind, prefix),
            AssertionSpec::RegexMatch { pattern } => {
                if pattern.is_empty() {
                    return Err(SpecError::EmptyPattern);
                }
                Ok(())
            }
            AssertionSpec::WordCount { min, max } | AssertionSpec::SentenceCount { min, max } => {
                match (min, max) {
                    (None, None) => Err(SpecError::MissingBounds { kind }),
                    (Some(lo), Some(hi)) if lo > hi => Err(SpecError::ReversedBounds {
                        kind,
                        min: *lo,
                        max: *hi,
                    }),
                    _ => Ok(()),
                }
            }
            AssertionSpec::JsonParseable { .. } | AssertionSpec::JsonListMinLen { .. } => Ok(()),
            AssertionSpec::JsonRequiredKeys { keys } => {
                if keys.is_empty() {
                    return Err(SpecError::EmptyOperands { kind });
                }
                if keys.iter().any(|k| k.is_empty()) {
                    return Err(SpecError::EmptyOperandText { kind });
                }
                Ok(())
            }
            AssertionSpec::LlmQuestion { questions } => {
                if questions.is_empty() || questions.len() > MAX_LLM_QUESTIONS {
                    return Err(SpecError::QuestionCount {
                        found: questions.len(),
                    });
                }
                if questions.iter().any(|q| q.trim().is_empty()) {
                    return Err(SpecError::EmptyQuestion);
                }
                Ok(())
            }
            AssertionSpec::AllOf { children } | AssertionSpec::AnyOf { children } => {
                if depth > MAX_COMPOSITE_DEPTH {
                    return Err(SpecError::TooDeep { depth });
                }
                if children.is_empty() {
                    return Err(SpecError::EmptyChildren { kind });
                }
                for child in children {
                    child.validate_at(depth + 1)?;
                }
                Ok(())
            }
        }
    }
}

fn validate_item(kind: &'static str, item: &OperandItem) -> Result<(), SpecError> {
    let text = match &item.source {
        OperandSource::Literal(s) => s,
        OperandSource::Field(s) => s,
    };
    if text.is_empty() {
        return Err(SpecError::EmptyOperandText { kind });
    }
    Ok(())
}
