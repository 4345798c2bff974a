//! Labeled pipeline runs: the input record, the formatted prompt that was
//! sent, the response that came back, and a human good/bad label.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Human verdict on a pipeline response. Serialized as `1` (good) or `0`
/// (bad).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Bad,
    Good,
}

impl Label {
    pub fn is_good(self) -> bool {
        matches!(self, Label::Good)
    }

    pub fn is_bad(self) -> bool {
        matches!(self, Label::Bad)
    }
}

impl TryFrom<u8> for Label {
    type Error = ExampleError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::Bad),
            1 => Ok(Label::Good),
            other => Err(ExampleError::BadLabel { found: other }),
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::Bad => 0,
            Label::Good => 1,
        }
    }
}

/// One recorded pipeline run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRun {
    pub id: String,
    /// Raw input fields, keyed by field name. Rules may reference these via
    /// field operands.
    pub input: BTreeMap<String, String>,
    /// The prompt template with the input substituted in.
    pub formatted_prompt: String,
    pub response: String,
    pub label: Label,
}

/// An ordered collection of runs with unique ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleSet {
    examples: Vec<ExampleRun>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExampleError {
    BadLabel { found: u8 },
    DuplicateId { id: String },
}

impl fmt::Display for ExampleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleError::BadLabel { found } => {
                write!(f, "label must be 0 or 1, found {found}")
            }
            ExampleError::DuplicateId { id } => write!(f, "duplicate example id {id:?}"),
        }
    }
}

impl core::error::Error for ExampleError {}

impl ExampleSet {
    pub fn new(examples: Vec<ExampleRun>) -> Result<Self, ExampleError> {
        for (i, ex) in examples.iter().enumerate() {
            if examples[..i].iter().any(|prev| prev.id == ex.id) {
                return Err(ExampleError::DuplicateId { id: ex.id.clone() });
            }
        }
        Ok(ExampleSet { examples })
    }

    pub fn examples(&self) -> &[ExampleRun] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|ex| ex.label).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.examples.iter().map(|ex| ex.id.clone()).collect()
    }

    /// The run to show the rule synthesizer: the first good-labeled run, or
    /// the first run of any label when none are labeled good.
    pub fn sample_for_synthesis(&self) -> Option<&ExampleRun> {
        self.examples
            .iter()
            .find(|ex| ex.label.is_good())
            .or_else(|| self.examples.first())
    }
}
