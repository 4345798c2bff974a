//! Std companion to `spade-core`: the LLM gateway, candidate generation,
//! assertion evaluation, subsumption-matrix assembly, file formats, and the
//! command-line driver.
//!
//! The pipeline reads a prompt version history and a labeled example set,
//! mines candidate assertions from the history's sentence-level deltas (two
//! LLM steps: categorize, then synthesize), evaluates every candidate on
//! every example into a result matrix, derives a subsumption matrix from
//! structural rules plus LLM judgment, and finally selects a small accurate
//! subset by exact optimization.

pub mod cli;
pub mod evaluate;
pub mod files;
pub mod gateway;
pub mod generate;
pub mod prompts;
pub mod report;
pub mod subsume;

pub use evaluate::{build_result_matrix, evaluate_assertion, EvalIssue};
pub use gateway::{
    Gateway, GatewayError, HttpTransport, LlmRequest, LlmResponse, Mode, RequestKind, Transport,
};
pub use generate::{
    categorize_delta, generate_candidates, parse_fenced_json, synthesize_assertions,
    DeltaOutcome, GenerateError, GenerationReport,
};
pub use files::{FileError, SelectionFile};
pub use report::{audited_metrics, provenance_summary, ModeMetrics, RunReport};
pub use subsume::{
    build_subsumption_matrix, llm_subsumption_pairs, render_spec_description, AssembleError,
    RefutedPair, SubsumeReport,
};
