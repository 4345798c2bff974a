//! Assembles the subsumption matrix from three sources: exact structural
//! rules over the DSL (proofs), LLM judgment over everything else (audited
//! and refutable), and transitive closure over the union.

use serde::{Deserialize, Serialize};

use spade_core::subsume::{dsl_subsumes, ffr_skip_set, prune_pair_by_examples};
use spade_core::{
    AssertionSpec, CandidateSet, Label, OperandItem, OperandSource, Provenance, ResultMatrix,
    SubsumptionMatrix,
};

use crate::gateway::{Gateway, GatewayError};
use crate::generate::parse_fenced_json;
use crate::prompts;

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error("candidate ids do not match the result matrix's assertion ids")]
    Misaligned,
    #[error("matrix construction: {0}")]
    Core(spade_core::SubsumeError),
}

/// One refuted LLM-proposed pair, with its witness row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefutedPair {
    pub subsumer: String,
    pub subsumed: String,
    /// Example where the subsumer passes and the subsumed fails — direct
    /// evidence the implication cannot hold.
    pub witness_example: String,
}

/// Everything the run report needs to audit how K was built.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SubsumeReport {
    pub dsl_cells: usize,
    pub llm_proposed: usize,
    pub llm_kept: usize,
    pub llm_duplicates_of_dsl: usize,
    pub llm_skipped_ffr: usize,
    pub llm_dropped_unknown: usize,
    pub llm_dropped_self: usize,
    pub llm_refuted: Vec<RefutedPair>,
    pub transitive_cells: usize,
    /// Present when the LLM step was skipped or failed; K is DSL-only.
    pub degraded: Option<String>,
    /// Internal consistency alarms: a structural rule contradicted by the
    /// result matrix points at an evaluation bug, not a bad rule.
    pub alarms: Vec<String>,
}

/// Renders one spec as the readable rule text shown to the LLM in place of
/// function code.
pub fn render_spec_description(spec: &AssertionSpec) -> String {
    fn operand(item: &OperandItem) -> String {
        let base = match &item.source {
            OperandSource::Literal(text) => format!("{text:?}"),
            OperandSource::Field(name) => format!("the example's {name:?} field"),
        };
        if item.case_insensitive {
            format!("{base} (case-insensitive)")
        } else {
            base
        }
    }
    fn operands(items: &[OperandItem]) -> String {
        items.iter().map(operand).collect::<Vec<_>>().join(", ")
    }
    fn bounds(min: &Option<u64>, max: &Option<u64>) -> String {
        match (min, max) {
            (Some(lo), Some(hi)) => format!("between {lo} and {hi}"),
            (Some(lo), None) => format!("at least {lo}"),
            (None, Some(hi)) => format!("at most {hi}"),
            (None, None) => "unbounded".into(),
        }
    }
    match spec {
        AssertionSpec::ContainsAll { items } => {
            format!("the response contains all of: {}", operands(items))
        }
        AssertionSpec::ContainsAny { items } => {
            format!("the response contains at least one of: {}", operands(items))
        }
        AssertionSpec::ExcludesAll { items } => {
            format!("the response contains none of: {}", operands(items))
        }
        AssertionSpec::StartsWith { prefix } => {
            format!("the response starts with {}", operand(prefix))
        }
        AssertionSpec::RegexMatch { pattern } => {
            format!("the response matches the regular expression {pattern:?}")
        }
        AssertionSpec::WordCount { min, max } => {
            format!("the response's word count is {}", bounds(min, max))
        }
        AssertionSpec::SentenceCount { min, max } => {
            format!("the response's sentence count is {}", bounds(min, max))
        }
        AssertionSpec::JsonParseable { shape } => format!(
            "the response parses as JSON ({})",
            match shape {
                spade_core::JsonShape::Any => "any shape",
                spade_core::JsonShape::Object => "an object",
                spade_core::JsonShape::List => "a list",
            }
        ),
        AssertionSpec::JsonListMinLen { min_len } => {
            format!("the response parses as a JSON list with at least {min_len} elements")
        }
        AssertionSpec::JsonRequiredKeys { keys } => {
            format!("the response parses as a JSON object with keys {keys:?}")
        }
        AssertionSpec::LlmQuestion { questions } => format!(
            "an expert LLM answers yes to: {}",
            questions
                .iter()
                .map(|q| format!("{q:?}"))
                .collect::<Vec<_>>()
                .join(" and ")
        ),
        AssertionSpec::AllOf { children } => format!(
            "all of [{}]",
            children
                .iter()
                .map(render_spec_description)
                .collect::<Vec<_>>()
                .join("; ")
        ),
        AssertionSpec::AnyOf { children } => format!(
            "any of [{}]",
            children
                .iter()
                .map(render_spec_description)
                .collect::<Vec<_>>()
                .join("; ")
        ),
    }
}

/// Outcome of the two-call LLM subsumption query.
pub struct LlmPairs {
    /// Well-formed, non-self pairs, exactly as the LLM named them. Resolving
    /// the names against the candidate set is the caller's concern: only the
    /// caller knows the full set (this function may see a filtered one).
    pub pairs: Vec<(String, String)>,
    /// Entries that were not two-element string arrays.
    pub dropped_malformed: usize,
    pub dropped_self: usize,
    /// Present when the calls failed and the result degraded to empty.
    pub degraded: Option<String>,
}

/// Asks the LLM which candidates imply which, in exactly two calls: one
/// free-text listing over all (eligible) specs, one formatting pass. Failure
/// of either call degrades to an empty pair list — never an error — so K
/// falls back to structural rules alone.
pub fn llm_subsumption_pairs(candidates: &CandidateSet, gateway: &Gateway) -> LlmPairs {
    assert!(
        candidates.candidates().len() >= 2,
        "subsumption query needs at least two candidates"
    );
    let blob = candidates
        .candidates()
        .iter()
        .map(|c| format!("- {}: passes iff {}", c.id, render_spec_description(&c.spec)))
        .collect::<Vec<_>>()
        .join("\n");

    let mut result = LlmPairs {
        pairs: Vec::new(),
        dropped_malformed: 0,
        dropped_self: 0,
        degraded: None,
    };

    let listing = match gateway.complete(&prompts::subsume_list_request(&blob)) {
        Ok(reply) => reply.text,
        Err(e) => {
            result.degraded = Some(describe_gateway_failure("listing call", &e));
            return result;
        }
    };
    let format_request = prompts::subsume_format_request(&listing);
    let value = match gateway.complete(&format_request) {
        Ok(reply) => match parse_fenced_json(&reply.text) {
            Ok(value) => Some(value),
            Err(_) => {
                // One reformat retry with an amended request (fresh cache key).
                let mut retry = format_request.clone();
                retry.user_text.push_str(prompts::REFORMAT_RETRY_SUFFIX);
                match gateway.complete(&retry) {
                    Ok(second) => parse_fenced_json(&second.text).ok(),
                    Err(_) => None,
                }
            }
        },
        Err(e) => {
            result.degraded = Some(describe_gateway_failure("formatting call", &e));
            return result;
        }
    };
    let Some(serde_json::Value::Array(entries)) = value else {
        result.degraded = Some("formatting reply had no parseable JSON pair list".into());
        return result;
    };

    for entry in entries {
        let Some(pair) = as_pair(&entry) else {
            result.dropped_malformed += 1;
            continue;
        };
        if pair.0 == pair.1 {
            result.dropped_self += 1;
            continue;
        }
        result.pairs.push(pair);
    }
    result
}

fn as_pair(entry: &serde_json::Value) -> Option<(String, String)> {
    let items = entry.as_array()?;
    if items.len() != 2 {
        return None;
    }
    Some((items[0].as_str()?.to_string(), items[1].as_str()?.to_string()))
}

fn describe_gateway_failure(stage: &str, error: &GatewayError) -> String {
    format!("subsumption {stage} failed ({error}); K degraded to structural rules only")
}

/// Builds the full subsumption matrix: structural rules, then LLM pairs over
/// candidates whose single false-failure rate is below τ, example-based
/// refutation of the LLM pairs, and finally transitive closure.
pub fn build_subsumption_matrix(
    candidates: &CandidateSet,
    matrix: &ResultMatrix,
    labels: &[Label],
    tau: f64,
    gateway: Option<&Gateway>,
) -> Result<(SubsumptionMatrix, SubsumeReport), AssembleError> {
    if candidates.ids() != matrix.assertion_ids() {
        return Err(AssembleError::Misaligned);
    }
    let list = candidates.candidates();
    let mut k = SubsumptionMatrix::identity(candidates.ids()).map_err(AssembleError::Core)?;
    let mut report = SubsumeReport::default();

    // Structural rules: sound implications decided from the specs alone.
    for (i, a) in list.iter().enumerate() {
        for (j, b) in list.iter().enumerate() {
            if i != j && dsl_subsumes(&a.spec, &b.spec) {
                k.set(i, j, Provenance::DslRule);
                report.dsl_cells += 1;
                // A structural proof contradicted by observed results means
                // the evaluation engine and the rules disagree — alarm.
                if prune_pair_by_examples(&a.id, &b.id, matrix)
                    .map_err(AssembleError::Core)?
                {
                    report.alarms.push(format!(
                        "structural rule {} => {} contradicted by the result matrix",
                        a.id, b.id
                    ));
                }
            }
        }
    }

    // LLM judgment, restricted to candidates worth paying for.
    let skip = ffr_skip_set(matrix, labels, tau);
    let eligible: Vec<_> = list.iter().filter(|c| !skip.contains(&c.id)).cloned().collect();
    match (gateway, eligible.len() >= 2) {
        (Some(gateway), true) => {
            let eligible_set =
                CandidateSet::new(eligible).expect("filtered candidates stay valid");
            let llm = llm_subsumption_pairs(&eligible_set, gateway);
            report.degraded = llm.degraded;
            report.llm_dropped_unknown = llm.dropped_malformed;
            report.llm_dropped_self = llm.dropped_self;
            for (subsumer, subsumed) in llm.pairs {
                // Names that resolve to nothing in the full candidate set
                // are hallucinated; names that resolve but were withheld for
                // their false-failure rate stay out of K as a cost hygiene.
                let (Some(i), Some(j)) = (k.index_of(&subsumer), k.index_of(&subsumed)) else {
                    report.llm_dropped_unknown += 1;
                    continue;
                };
                if skip.contains(&subsumer) || skip.contains(&subsumed) {
                    report.llm_skipped_ffr += 1;
                    continue;
                }
                report.llm_proposed += 1;
                if k.subsumes(i, j) {
                    report.llm_duplicates_of_dsl += 1;
                    continue;
                }
                if prune_pair_by_examples(&subsumer, &subsumed, matrix)
                    .map_err(AssembleError::Core)?
                {
                    let witness = find_witness(matrix, i, j)
                        .expect("refutation implies a witness row");
                    report.llm_refuted.push(RefutedPair {
                        subsumer,
                        subsumed,
                        witness_example: matrix.example_ids()[witness].clone(),
                    });
                    continue;
                }
                k.set(i, j, Provenance::Llm);
                report.llm_kept += 1;
            }
        }
        (Some(_), false) => {
            report.degraded = Some(format!(
                "fewer than two candidates below the FFR threshold ({} skipped); \
                 K built from structural rules only",
                skip.len()
            ));
        }
        (None, _) => {
            report.degraded =
                Some("no gateway configured; K built from structural rules only".into());
        }
    }

    let before = k.provenance().len();
    k.transitive_closure();
    report.transitive_cells = k.provenance().len() - before;
    Ok((k, report))
}

fn find_witness(matrix: &ResultMatrix, subsumer: usize, subsumed: usize) -> Option<usize> {
    (0..matrix.n_examples()).find(|&row| matrix.passes(row, subsumer) && !matrix.passes(row, subsumed))
}
