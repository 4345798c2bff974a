//! The fixed vocabulary of prompt-delta categories, the criterion concepts a
//! categorizer emits, and the candidate assertions synthesized from them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{AssertionSpec, SpecError};
use crate::history::PromptDelta;

/// The ten delta classes. Free-text labels from a categorizer are folded
/// into these via [`map_category_label`]; nothing else escapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CategoryName {
    ResponseFormat,
    ExampleDemonstration,
    PromptClarification,
    WorkflowDescription,
    DataIntegration,
    Count,
    Inclusion,
    Exclusion,
    Qualitative,
    Other,
}

pub const ALL_CATEGORY_NAMES: [CategoryName; 10] = [
    CategoryName::ResponseFormat,
    CategoryName::ExampleDemonstration,
    CategoryName::PromptClarification,
    CategoryName::WorkflowDescription,
    CategoryName::DataIntegration,
    CategoryName::Count,
    CategoryName::Inclusion,
    CategoryName::Exclusion,
    CategoryName::Qualitative,
    CategoryName::Other,
];

impl CategoryName {
    pub fn as_str(self) -> &'static str {
        match self {
            CategoryName::ResponseFormat => "RESPONSE_FORMAT",
            CategoryName::ExampleDemonstration => "EXAMPLE_DEMONSTRATION",
            CategoryName::PromptClarification => "PROMPT_CLARIFICATION",
            CategoryName::WorkflowDescription => "WORKFLOW_DESCRIPTION",
            CategoryName::DataIntegration => "DATA_INTEGRATION",
            CategoryName::Count => "COUNT",
            CategoryName::Inclusion => "INCLUSION",
            CategoryName::Exclusion => "EXCLUSION",
            CategoryName::Qualitative => "QUALITATIVE",
            CategoryName::Other => "OTHER",
        }
    }

    /// The group this name belongs to. `Other` has no intrinsic group and
    /// defaults to content-based.
    pub fn canonical_group(self) -> CategoryGroup {
        match self {
            CategoryName::ResponseFormat | CategoryName::ExampleDemonstration => {
                CategoryGroup::Structural
            }
            _ => CategoryGroup::ContentBased,
        }
    }
}

/// Whether a category constrains the shape of the response or its content.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CategoryGroup {
    Structural,
    ContentBased,
}

/// A category name paired with its group. Every name except `Other` is
/// pinned to its canonical group; `Other` may carry either.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DeltaCategoryRepr", into = "DeltaCategoryRepr")]
pub struct DeltaCategory {
    name: CategoryName,
    group: CategoryGroup,
}

#[derive(Serialize, Deserialize)]
struct DeltaCategoryRepr {
    name: CategoryName,
    group: CategoryGroup,
}

impl From<DeltaCategory> for DeltaCategoryRepr {
    fn from(cat: DeltaCategory) -> Self {
        DeltaCategoryRepr {
            name: cat.name,
            group: cat.group,
        }
    }
}

impl TryFrom<DeltaCategoryRepr> for DeltaCategory {
    type Error = TaxonomyError;

    fn try_from(repr: DeltaCategoryRepr) -> Result<Self, Self::Error> {
        if repr.name != CategoryName::Other && repr.group != repr.name.canonical_group() {
            return Err(TaxonomyError::GroupMismatch { name: repr.name });
        }
        Ok(DeltaCategory {
            name: repr.name,
            group: repr.group,
        })
    }
}

impl DeltaCategory {
    /// A category in its canonical group (`Other` lands content-based).
    pub fn of(name: CategoryName) -> Self {
        DeltaCategory {
            name,
            group: name.canonical_group(),
        }
    }

    /// An `Other` category explicitly marked structural.
    pub fn other_structural() -> Self {
        DeltaCategory {
            name: CategoryName::Other,
            group: CategoryGroup::Structural,
        }
    }

    pub fn name(&self) -> CategoryName {
        self.name
    }

    pub fn group(&self) -> CategoryGroup {
        self.group
    }
}

/// Folds a free-text category label into the fixed vocabulary. Recognizes
/// both the label set used by the categorization prompt ("Presentation
/// Format", "Count", ...) and the taxonomy's own names ("Response Format
/// Instruction", "Quantity Instruction", ...). Anything unrecognized lands
/// in `Other`.
pub fn map_category_label(label: &str) -> CategoryName {
    let mut normalized = String::new();
    for ch in label.chars() {
        if ch.is_alphanumeric() {
            normalized.extend(ch.to_lowercase());
        } else if !normalized.ends_with(' ') {
            normalized.push(' ');
        }
    }
    let normalized = normalized.trim();
    match normalized {
        "presentation format"
        | "response format"
        | "response format instruction"
        | "format"
        | "output format" => CategoryName::ResponseFormat,
        "example demonstration" | "demonstration" | "examples" => {
            CategoryName::ExampleDemonstration
        }
        "prompt clarification" | "clarification" => CategoryName::PromptClarification,
        "workflow description" | "workflow" => CategoryName::WorkflowDescription,
        "data integration" | "data placeholders" => CategoryName::DataIntegration,
        "count" | "quantity instruction" | "quantity" => CategoryName::Count,
        "inclusion" | "inclusion instruction" => CategoryName::Inclusion,
        "exclusion" | "exclusion instruction" => CategoryName::Exclusion,
        "qualitative assessment" | "qualitative criteria" | "qualitative" => {
            CategoryName::Qualitative
        }
        _ => CategoryName::Other,
    }
}

/// One natural-language check extracted from a prompt delta.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionConcept {
    pub concept: String,
    pub category: DeltaCategory,
    /// The phrase in the delta that triggered this concept.
    pub source: String,
    pub delta_version: u32,
}

impl CriterionConcept {
    pub fn new(
        concept: &str,
        category: DeltaCategory,
        source: &str,
        delta_version: u32,
    ) -> Result<Self, TaxonomyError> {
        if concept.trim().is_empty() {
            return Err(TaxonomyError::EmptyConcept);
        }
        if source.trim().is_empty() {
            return Err(TaxonomyError::EmptySource);
        }
        Ok(CriterionConcept {
            concept: concept.to_string(),
            category,
            source: source.to_string(),
            delta_version,
        })
    }

    /// True when the claimed source phrase actually appears in the delta it
    /// was extracted from. Unsourced concepts are kept but flagged.
    pub fn is_sourced(&self, delta: &PromptDelta) -> bool {
        delta
            .entries
            .iter()
            .any(|entry| entry.sentence.contains(&self.source))
    }
}

/// A synthesized assertion: an executable spec tied back to the concept and
/// prompt version it came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAssertion {
    pub id: String,
    pub delta_version: u32,
    pub concept: String,
    pub category: DeltaCategory,
    pub spec: AssertionSpec,
}

/// The multiset union of candidates across all deltas. Structurally
/// identical specs may appear more than once under distinct ids;
/// de-duplication is the selection stage's job.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    candidates: Vec<CandidateAssertion>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaxonomyError {
    EmptyConcept,
    EmptySource,
    GroupMismatch { name: CategoryName },
    DuplicateId { id: String },
    InvalidSpec { id: String, error: SpecError },
}

impl fmt::Display for TaxonomyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxonomyError::EmptyConcept => write!(f, "concept text is empty"),
            TaxonomyError::EmptySource => write!(f, "source phrase is empty"),
            TaxonomyError::GroupMismatch { name } => write!(
                f,
                "category {} must carry its canonical group",
                name.as_str()
            ),
            TaxonomyError::DuplicateId { id } => {
                write!(f, "duplicate candidate id {id:?}")
            }
            TaxonomyError::InvalidSpec { id, error } => {
                write!(f, "candidate {id:?} has an invalid spec: {error}")
            }
        }
    }
}

impl core::error::Error for TaxonomyError {}

impl CandidateSet {
    pub fn new(candidates: Vec<CandidateAssertion>) -> Result<Self, TaxonomyError> {
        for (i, cand) in candidates.iter().enumerate() {
            if candidates[..i].iter().any(|prev| prev.id == cand.id) {
                return Err(TaxonomyError::DuplicateId {
                    id: cand.id.clone(),
                });
            }
            cand.spec
                .validate()
                .map_err(|error| TaxonomyError::InvalidSpec {
                    id: cand.id.clone(),
                    error,
                })?;
        }
        Ok(CandidateSet { candidates })
    }

    pub fn candidates(&self) -> &[CandidateAssertion] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.candidates.iter().map(|c| c.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&CandidateAssertion> {
        self.candidates.iter().find(|c| c.id == id)
    }

    /// Candidate counts per category name, in fixed vocabulary order,
    /// including zero rows.
    pub fn category_tally(&self) -> Vec<(CategoryName, usize)> {
        ALL_CATEGORY_NAMES
            .iter()
            .map(|&name| {
                let count = self
                    .candidates
                    .iter()
                    .filter(|c| c.category.name() == name)
                    .count();
                (name, count)
            })
            .collect()
    }
}

const ID_SLUG_MAX: usize = 24;

/// Builds the stable candidate identifier `a<version>_<ordinal>_<slug>`,
/// where the slug is a kebab-cased prefix of the concept text.
pub fn candidate_id(delta_version: u32, ordinal: usize, concept: &str) -> String {
    let mut slug = String::new();
    for ch in concept.chars() {
        if slug.len() >= ID_SLUG_MAX {
            break;
        }
        if ch.is_ascii_alphanumeric() {
            slug.push(ch.to_ascii_lowercase());
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    let slug = slug.trim_matches('-');
    let slug = if slug.is_empty() { "spec" } else { slug };
    let mut id = String::new();
    fmt::Write::write_fmt(&mut id, format_args!("a{delta_version}_{ordinal}_{slug}"))
        .expect("writing to a String cannot fail");
    id
}
