//! Core algorithms for distilling data-quality assertions out of prompt
//! version histories.
//!
//! The pipeline this crate backs works in two phases: candidate assertions
//! are mined from the sentence-level deltas between consecutive prompt
//! versions, then a small, accurate, high-coverage subset is picked by exact
//! optimization over observed pass/fail results.
//!
//! Everything here is pure and deterministic: no IO, no clocks, no threads.
//! The companion `spade` crate layers file formats, the LLM gateway, and the
//! command-line driver on top.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod bits;

pub mod dsl;
pub mod example;
pub mod graph;
pub mod history;
pub mod matrix;
pub mod select;
pub mod subsume;
pub mod taxonomy;

pub use dsl::{AssertionSpec, JsonShape, OperandItem, OperandSource, SpecError};
pub use example::{ExampleError, ExampleRun, ExampleSet, Label};
pub use history::{
    apply_delta, compute_delta, segment_sentences, DeltaEntry, DeltaTag, HistoryError,
    PromptDelta, PromptTemplate, PromptVersionHistory,
};
pub use matrix::{set_coverage, set_ffr, single_ffr, MatrixError, ResultMatrix};
pub use select::{
    brute_force_oracle, excluded_not_subsumed, max_coverage_at_tau, solve_baseline, solve_cov,
    solve_no_examples, solve_sub, IlpEncoding, IlpPoint, RunToCompletion, SelectError,
    SelectionConfig, SelectionDiagnostics, SelectionMode, SelectionResult, SelectionStatus,
    StopProbe,
};
pub use subsume::{
    dsl_subsumes, ffr_skip_set, prune_pair_by_examples, Provenance, SubsumeError,
    SubsumptionMatrix,
};
pub use taxonomy::{
    candidate_id, map_category_label, CandidateAssertion, CandidateSet, CategoryGroup,
    CategoryName, CriterionConcept, DeltaCategory, TaxonomyError,
};
