//! The two-step candidate generation: categorize each prompt delta into
//! taxonomy-aligned assertion criteria, then synthesize executable assertion
//! specs for those criteria. Both steps go through the gateway, so replay
//! mode makes the whole stage deterministic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spade_core::taxonomy::{candidate_id, map_category_label, DeltaCategory};
use spade_core::{
    AssertionSpec, CandidateAssertion, CandidateSet, CriterionConcept, ExampleRun, PromptDelta,
    PromptVersionHistory, TaxonomyError,
};

use crate::gateway::{Gateway, GatewayError, LlmRequest};
use crate::prompts;

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("delta {from}->{to} has no entries; nothing to categorize")]
    DegenerateDelta { from: u32, to: u32 },
    #[error("could not extract JSON from the {stage} reply: {detail}")]
    Parse { stage: &'static str, detail: String },
    #[error("zero valid assertion specs were produced across all deltas")]
    EmptyCandidateSet(GenerationReport),
    #[error("candidate assembly failed: {0}")]
    Assembly(TaxonomyError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Extracts a JSON value from an LLM reply: the first ```json fenced block,
/// or failing that the first parseable top-level array/object in the text.
pub fn parse_fenced_json(text: &str) -> Result<serde_json::Value, GenerateError> {
    if let Some(fence_start) = text.find("```json") {
        let body_start = fence_start + "```json".len();
        if let Some(fence_len) = text[body_start..].find("```") {
            let body = text[body_start..body_start + fence_len].trim();
            if let Ok(value) = serde_json::from_str(body) {
                return Ok(value);
            }
        }
    }
    for (offset, ch) in text.char_indices() {
        if ch != '[' && ch != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[offset..])
            .into_iter::<serde_json::Value>();
        if let Some(Ok(value)) = stream.next() {
            if value.is_array() || value.is_object() {
                return Ok(value);
            }
        }
    }
    Err(GenerateError::Parse {
        stage: "json extraction",
        detail: "no fenced block or top-level JSON array/object found".into(),
    })
}

/// Issues a generation request and parses the fenced JSON out of the reply,
/// retrying once with an explicit reformat instruction (the amended text is
/// a fresh cache key, so replay caches stay coherent).
fn complete_and_parse(
    gateway: &Gateway,
    request: &LlmRequest,
    stage: &'static str,
) -> Result<(serde_json::Value, bool), GenerateError> {
    let reply = gateway.complete(request)?;
    match parse_fenced_json(&reply.text) {
        Ok(value) => Ok((value, false)),
        Err(_) => {
            let mut retry = request.clone();
            retry.user_text.push_str(prompts::REFORMAT_RETRY_SUFFIX);
            let second = gateway.complete(&retry)?;
            match parse_fenced_json(&second.text) {
                Ok(value) => Ok((value, true)),
                Err(GenerateError::Parse { detail, .. }) => {
                    Err(GenerateError::Parse { stage, detail })
                }
                Err(other) => Err(other),
            }
        }
    }
}

#[derive(Deserialize)]
struct RawConcept {
    concept: String,
    category: String,
    source: String,
}

/// Categorizes one delta into criterion concepts. Unmappable category labels
/// land in the catch-all category rather than being dropped; entries with
/// empty concept or source text are skipped.
pub fn categorize_delta(
    delta: &PromptDelta,
    gateway: &Gateway,
    temperature: f64,
) -> Result<Vec<CriterionConcept>, GenerateError> {
    if delta.entries.is_empty() {
        return Err(GenerateError::DegenerateDelta {
            from: delta.from_version,
            to: delta.to_version,
        });
    }
    let request = prompts::categorize_request(&delta.tagged_lines(), temperature);
    let (value, _) = complete_and_parse(gateway, &request, "categorization")?;
    let raw: Vec<RawConcept> =
        serde_json::from_value(value).map_err(|e| GenerateError::Parse {
            stage: "categorization",
            detail: format!("reply is not a list of concept objects: {e}"),
        })?;
    let mut concepts = Vec::new();
    for item in raw {
        let name = map_category_label(&item.category);
        match CriterionConcept::new(
            &item.concept,
            DeltaCategory::of(name),
            &item.source,
            delta.to_version,
        ) {
            Ok(concept) => concepts.push(concept),
            Err(_) => continue, // empty concept/source: skip the entry
        }
    }
    Ok(concepts)
}

#[derive(Deserialize)]
struct RawSpec {
    concept_index: usize,
    spec: serde_json::Value,
}

/// One synthesized spec, linked back to the concept it checks.
pub struct SynthesizedSpec {
    pub concept_index: usize,
    pub spec: AssertionSpec,
}

/// Outcome of one synthesis call: the valid specs plus skip notes for the
/// report.
pub struct SynthesisOutcome {
    pub specs: Vec<SynthesizedSpec>,
    pub invalid: Vec<String>,
    pub retried: bool,
}

/// Synthesizes assertion specs for the concepts of one delta. Invalid specs
/// are skipped (recorded in the outcome), never fatal for the batch.
pub fn synthesize_assertions(
    concepts: &[CriterionConcept],
    final_prompt_text: &str,
    sample: &ExampleRun,
    gateway: &Gateway,
    temperature: f64,
) -> Result<SynthesisOutcome, GenerateError> {
    assert!(!concepts.is_empty(), "synthesis requires at least one concept");
    assert!(
        !sample.response.is_empty(),
        "synthesis sample must carry a response"
    );
    let concepts_json = serde_json::to_string_pretty(
        &concepts
            .iter()
            .map(|c| {
                serde_json::json!({
                    "concept": c.concept,
                    "category": c.category.name().as_str(),
                    "source": c.source,
                })
            })
            .collect::<Vec<_>>(),
    )
    .expect("concepts serialize");
    let sample_example =
        serde_json::to_string(&sample.input).expect("example input serializes");
    let request = prompts::synthesize_request(
        final_prompt_text,
        &sample_example,
        &sample.response,
        &concepts_json,
        temperature,
    );
    let (value, retried) = complete_and_parse(gateway, &request, "synthesis")?;
    let raw: Vec<RawSpec> = serde_json::from_value(value).map_err(|e| GenerateError::Parse {
        stage: "synthesis",
        detail: format!("reply is not a list of concept_index/spec objects: {e}"),
    })?;
    let mut outcome = SynthesisOutcome {
        specs: Vec::new(),
        invalid: Vec::new(),
        retried,
    };
    for (position, item) in raw.into_iter().enumerate() {
        if item.concept_index >= concepts.len() {
            outcome.invalid.push(format!(
                "entry {position}: concept_index {} out of range",
                item.concept_index
            ));
            continue;
        }
        let spec: AssertionSpec = match serde_json::from_value(item.spec) {
            Ok(spec) => spec,
            Err(e) => {
                outcome.invalid.push(format!("entry {position}: {e}"));
                continue;
            }
        };
        if let Err(e) = spec.validate() {
            outcome.invalid.push(format!("entry {position}: {e}"));
            continue;
        }
        outcome.specs.push(SynthesizedSpec {
            concept_index: item.concept_index,
            spec,
        });
    }
    Ok(outcome)
}

/// Per-delta generation outcome, for the run report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaOutcome {
    pub to_version: u32,
    pub concepts: usize,
    pub specs: usize,
    /// Concepts whose source phrase is not a substring of any delta entry
    /// (kept, but flagged).
    pub unsourced: Vec<String>,
    pub invalid_specs: Vec<String>,
    pub parse_retried: bool,
    /// Present when the whole delta was skipped after a failure.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GenerationReport {
    pub deltas: Vec<DeltaOutcome>,
}

impl GenerationReport {
    pub fn skipped_deltas(&self) -> usize {
        self.deltas.iter().filter(|d| d.skipped.is_some()).count()
    }
}

/// Runs categorize + synthesize over every delta of the history and returns
/// the combined candidate set. Deltas are processed in parallel; assembly
/// order is by version regardless of completion order. A failing delta is
/// skipped and recorded, not fatal — unless the final set ends up empty.
pub fn generate_candidates(
    history: &PromptVersionHistory,
    sample: &ExampleRun,
    gateway: &Gateway,
    temperature: f64,
) -> Result<(CandidateSet, GenerationReport), GenerateError> {
    let final_prompt = history.latest().text.clone();
    let deltas: Vec<PromptDelta> = history
        .deltas()
        .into_iter()
        .filter(|d| !d.is_empty())
        .collect();

    let per_delta: Vec<(Vec<CandidateAssertion>, DeltaOutcome)> = deltas
        .par_iter()
        .map(|delta| generate_for_delta(delta, &final_prompt, sample, gateway, temperature))
        .collect();

    let mut candidates = Vec::new();
    let mut report = GenerationReport::default();
    for (mut list, outcome) in per_delta {
        candidates.append(&mut list);
        report.deltas.push(outcome);
    }
    if candidates.is_empty() {
        return Err(GenerateError::EmptyCandidateSet(report));
    }
    let set = CandidateSet::new(candidates).map_err(GenerateError::Assembly)?;
    Ok((set, report))
}

fn generate_for_delta(
    delta: &PromptDelta,
    final_prompt: &str,
    sample: &ExampleRun,
    gateway: &Gateway,
    temperature: f64,
) -> (Vec<CandidateAssertion>, DeltaOutcome) {
    let mut outcome = DeltaOutcome {
        to_version: delta.to_version,
        concepts: 0,
        specs: 0,
        unsourced: Vec::new(),
        invalid_specs: Vec::new(),
        parse_retried: false,
        skipped: None,
    };
    let concepts = match categorize_delta(delta, gateway, temperature) {
        Ok(concepts) => concepts,
        Err(e) => {
            outcome.skipped = Some(format!("categorization failed: {e}"));
            return (Vec::new(), outcome);
        }
    };
    outcome.concepts = concepts.len();
    outcome.unsourced = concepts
        .iter()
        .filter(|c| !c.is_sourced(delta))
        .map(|c| c.concept.clone())
        .collect();
    if concepts.is_empty() {
        outcome.skipped = Some("no concepts returned".into());
        return (Vec::new(), outcome);
    }
    let synthesis = match synthesize_assertions(&concepts, final_prompt, sample, gateway, temperature)
    {
        Ok(s) => s,
        Err(e) => {
            outcome.skipped = Some(format!("synthesis failed: {e}"));
            return (Vec::new(), outcome);
        }
    };
    outcome.parse_retried = synthesis.retried;
    outcome.invalid_specs = synthesis.invalid;
    outcome.specs = synthesis.specs.len();

    let candidates = synthesis
        .specs
        .into_iter()
        .enumerate()
        .map(|(ordinal, item)| {
            let concept = &concepts[item.concept_index];
            CandidateAssertion {
                id: candidate_id(delta.to_version, ordinal, &concept.concept),
                delta_version: delta.to_version,
                concept: concept.concept.clone(),
                category: concept.category,
                spec: item.spec,
            }
        })
        .collect();
    (candidates, outcome)
}
