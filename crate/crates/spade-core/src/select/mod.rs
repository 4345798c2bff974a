//! Exact solvers for the four assertion-selection problems: minimum
//! cardinality under coverage/FFR constraints, the subsumption-aware
//! objective |F′| + |G|, the single-assertion FFR filter baseline, and the
//! no-examples case solved over the subsumption digraph.
//!
//! All auxiliary ILP variables are functions of the selection vector x (see
//! [`IlpEncoding`]), so the solvers run an exact bounded search over
//! x ∈ {0,1}^m instead of shelling out to an ILP package. Optimality is
//! certified by the exhaustive oracle in tests.

mod encoding;
mod oracle;
mod search;

pub use encoding::{IlpEncoding, IlpPoint};
pub use oracle::brute_force_oracle;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::example::Label;
use crate::graph::Condensation;
use crate::matrix::{set_coverage, set_ffr, ResultMatrix};
use crate::subsume::SubsumptionMatrix;

/// Which selection problem to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SelectionMode {
    Cov,
    Sub,
    Baseline,
    NoExamples,
}

/// How a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SelectionStatus {
    Optimal,
    Infeasible,
    TimeLimit,
}

/// Extra information attached to a result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    /// Best coverage any FFR-feasible subset can reach; populated when a
    /// solve comes back infeasible so callers can retune alpha.
    pub max_coverage_at_tau: Option<f64>,
}

/// Outcome of a selection solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub status: SelectionStatus,
    /// Chosen assertion ids, ascending. Empty on infeasibility.
    pub selected: Vec<String>,
    /// G: assertions neither selected nor subsumed by a selected one,
    /// ascending. Empty in modes without subsumption input.
    pub excluded_not_subsumed: Vec<String>,
    pub coverage: f64,
    pub ffr: f64,
    /// Mode-specific objective value: |F′| for COV/BASELINE, |F′| + |G| for
    /// SUB/NO_EXAMPLES. Zero on infeasibility.
    pub objective: u64,
    pub diagnostics: SelectionDiagnostics,
}

/// Thresholds, mode, and budget for a solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub alpha: f64,
    pub tau: f64,
    pub mode: SelectionMode,
    pub time_limit_secs: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.6,
            tau: 0.25,
            mode: SelectionMode::Sub,
            time_limit_secs: 60,
        }
    }
}

impl SelectionConfig {
    pub fn validated(self) -> Result<Self, SelectError> {
        check_threshold("alpha", self.alpha)?;
        check_threshold("tau", self.tau)?;
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectError {
    DimensionMismatch { labels: usize, rows: usize },
    Misaligned,
    BadThreshold { name: &'static str, value: f64 },
    TooLarge { m: usize },
    MissingSubsumption,
    UnknownAssertion { id: String },
}

impl fmt::Display for SelectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectError::DimensionMismatch { labels, rows } => {
                write!(f, "{labels} labels for a matrix with {rows} rows")
            }
            SelectError::Misaligned => write!(
                f,
                "subsumption matrix ids do not match result matrix assertion ids"
            ),
            SelectError::BadThreshold { name, value } => {
                write!(f, "{name} must lie in [0, 1], got {value}")
            }
            SelectError::TooLarge { m } => {
                write!(f, "exhaustive oracle capped at 20 assertions, got {m}")
            }
            SelectError::MissingSubsumption => {
                write!(f, "this mode requires a subsumption matrix")
            }
            SelectError::UnknownAssertion { id } => write!(f, "unknown assertion id {id:?}"),
        }
    }
}

impl core::error::Error for SelectError {}

/// Cooperative cancellation for long solves. Implementations must be cheap;
/// the solvers poll every few hundred search nodes.
pub trait StopProbe {
    fn should_stop(&self) -> bool;
}

/// A probe that never fires.
pub struct RunToCompletion;

impl StopProbe for RunToCompletion {
    fn should_stop(&self) -> bool {
        false
    }
}

/// Smallest integer ≥ `x`, with a 1e-9 guard so float artifacts like
/// `0.6 * 5 = 3.0000000000000004` do not inflate the requirement.
pub(crate) fn ceil_eps(x: f64) -> u64 {
    let y = x - 1e-9;
    if y <= 0.0 {
        return 0;
    }
    let t = y as u64;
    if (t as f64) < y {
        t + 1
    } else {
        t
    }
}

/// Largest integer ≤ `x`, with a 1e-9 guard in the other direction.
pub(crate) fn floor_eps(x: f64) -> u64 {
    let y = x + 1e-9;
    if y <= 0.0 {
        return 0;
    }
    y as u64
}

fn check_threshold(name: &'static str, value: f64) -> Result<(), SelectError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SelectError::BadThreshold { name, value })
    }
}

fn check_dimensions(matrix: &ResultMatrix, labels: &[Label]) -> Result<(), SelectError> {
    if labels.len() != matrix.n_examples() {
        return Err(SelectError::DimensionMismatch {
            labels: labels.len(),
            rows: matrix.n_examples(),
        });
    }
    Ok(())
}

fn check_alignment(matrix: &ResultMatrix, k: &SubsumptionMatrix) -> Result<(), SelectError> {
    if k.assertion_ids() != matrix.assertion_ids() {
        return Err(SelectError::Misaligned);
    }
    Ok(())
}

/// G: ids in `k` that are neither in `selected_ids` nor subsumed by a
/// member of it. Ascending order.
pub fn excluded_not_subsumed(
    k: &SubsumptionMatrix,
    selected_ids: &[String],
) -> Result<Vec<String>, SelectError> {
    let mut selected_idx = Vec::with_capacity(selected_ids.len());
    for id in selected_ids {
        let idx = k
            .index_of(id)
            .ok_or_else(|| SelectError::UnknownAssertion { id: id.clone() })?;
        selected_idx.push(idx);
    }
    let mut g: Vec<String> = (0..k.len())
        .filter(|&j| {
            !selected_idx.contains(&j)
                && !selected_idx.iter().any(|&i| i != j && k.subsumes(i, j))
        })
        .map(|j| k.assertion_ids()[j].clone())
        .collect();
    g.sort_unstable();
    Ok(g)
}

/// Exact maximum coverage reachable by any subset whose FFR stays at or
/// under `tau`. 1.0 when there are no bad examples.
pub fn max_coverage_at_tau(matrix: &ResultMatrix, labels: &[Label], tau: f64) -> f64 {
    debug_assert!(labels.len() == matrix.n_examples());
    let instance = search::Instance::build(matrix, labels, 0.0, tau);
    instance.max_coverage_fraction()
}

/// Minimum-cardinality selection meeting the coverage and FFR thresholds.
/// Ties are broken by the lexicographically smallest sorted id list.
pub fn solve_cov(
    matrix: &ResultMatrix,
    labels: &[Label],
    alpha: f64,
    tau: f64,
    probe: &dyn StopProbe,
) -> Result<SelectionResult, SelectError> {
    check_dimensions(matrix, labels)?;
    check_threshold("alpha", alpha)?;
    check_threshold("tau", tau)?;
    let instance = search::Instance::build(matrix, labels, alpha, tau);
    let outcome = instance.solve_cov(probe);
    Ok(finish(matrix, labels, None, outcome, |sel, _| sel.len() as u64))
}

/// Selection minimizing |F′| + |G| under the same thresholds, where G is
/// everything neither selected nor subsumed by a selected assertion. Same
/// tie-break.
pub fn solve_sub(
    matrix: &ResultMatrix,
    labels: &[Label],
    k: &SubsumptionMatrix,
    alpha: f64,
    tau: f64,
    probe: &dyn StopProbe,
) -> Result<SelectionResult, SelectError> {
    check_dimensions(matrix, labels)?;
    check_alignment(matrix, k)?;
    check_threshold("alpha", alpha)?;
    check_threshold("tau", tau)?;
    let instance = search::Instance::build(matrix, labels, alpha, tau);
    let outcome = instance.solve_sub(k, probe);
    Ok(finish(matrix, labels, Some(k), outcome, |sel, g| {
        (sel.len() + g.len()) as u64
    }))
}

/// The flat filter: keep every assertion whose own FFR is at or under
/// `tau`. Not an optimization — the reported set-level FFR may exceed
/// `tau`, which is exactly what this baseline is for comparing against.
pub fn solve_baseline(
    matrix: &ResultMatrix,
    labels: &[Label],
    tau: f64,
) -> Result<SelectionResult, SelectError> {
    check_dimensions(matrix, labels)?;
    check_threshold("tau", tau)?;
    let n_good = labels.iter().filter(|l| l.is_good()).count();
    let budget = tau * n_good as f64 + 1e-9;
    let mut cols: Vec<usize> = (0..matrix.n_assertions())
        .filter(|&j| {
            let misfires = (0..matrix.n_examples())
                .filter(|&i| labels[i].is_good() && !matrix.passes(i, j))
                .count();
            misfires as f64 <= budget
        })
        .collect();
    cols.sort_by(|&a, &b| matrix.assertion_ids()[a].cmp(&matrix.assertion_ids()[b]));
    let selected: Vec<String> = cols
        .iter()
        .map(|&j| matrix.assertion_ids()[j].clone())
        .collect();
    Ok(SelectionResult {
        status: SelectionStatus::Optimal,
        objective: selected.len() as u64,
        coverage: set_coverage(matrix, labels, &cols),
        ffr: set_ffr(matrix, labels, &cols),
        selected,
        excluded_not_subsumed: Vec::new(),
        diagnostics: SelectionDiagnostics::default(),
    })
}

/// The no-examples case: treat K's off-diagonal cells as a digraph,
/// condense strongly connected components, and select the lexicographically
/// smallest member of every source component. Everything else is reachable
/// from (hence subsumed by, K being transitively closed) a selection.
pub fn solve_no_examples(k: &SubsumptionMatrix) -> SelectionResult {
    let m = k.len();
    let mut adj = alloc::vec![Vec::new(); m];
    for i in 0..m {
        for j in 0..m {
            if i != j && k.subsumes(i, j) {
                adj[i].push(j);
            }
        }
    }
    let cond = Condensation::of(&adj);
    let mut selected: Vec<String> = cond
        .source_components()
        .into_iter()
        .map(|c| {
            cond.components[c]
                .iter()
                .map(|&node| k.assertion_ids()[node].clone())
                .min()
                .expect("components are non-empty")
        })
        .collect();
    selected.sort_unstable();
    let excluded_not_subsumed =
        excluded_not_subsumed(k, &selected).expect("selected ids come from k");
    SelectionResult {
        status: SelectionStatus::Optimal,
        objective: (selected.len() + excluded_not_subsumed.len()) as u64,
        // No examples: coverage and FFR are vacuous.
        coverage: 1.0,
        ffr: 0.0,
        selected,
        excluded_not_subsumed,
        diagnostics: SelectionDiagnostics::default(),
    }
}

/// Assembles a `SelectionResult` from a search outcome, recomputing the
/// reported metrics from the matrix so they cannot drift from the search's
/// internal bookkeeping.
fn finish(
    matrix: &ResultMatrix,
    labels: &[Label],
    k: Option<&SubsumptionMatrix>,
    outcome: search::Outcome,
    objective: impl Fn(&[String], &[String]) -> u64,
) -> SelectionResult {
    match outcome {
        search::Outcome::Solved { columns, stopped } => {
            let selected: Vec<String> = columns
                .iter()
                .map(|&j| matrix.assertion_ids()[j].clone())
                .collect();
            let g = match k {
                Some(k) => excluded_not_subsumed(k, &selected)
                    .expect("selected ids come from the aligned matrix"),
                None => Vec::new(),
            };
            SelectionResult {
                status: if stopped {
                    SelectionStatus::TimeLimit
                } else {
                    SelectionStatus::Optimal
                },
                objective: objective(&selected, &g),
                coverage: set_coverage(matrix, labels, &columns),
                ffr: set_ffr(matrix, labels, &columns),
                selected,
                excluded_not_subsumed: g,
                diagnostics: SelectionDiagnostics::default(),
            }
        }
        search::Outcome::Infeasible { max_coverage } => SelectionResult {
            status: SelectionStatus::Infeasible,
            selected: Vec::new(),
            excluded_not_subsumed: Vec::new(),
            coverage: 0.0,
            ffr: 0.0,
            objective: 0,
            diagnostics: SelectionDiagnostics {
                max_coverage_at_tau: Some(max_coverage),
            },
        },
        search::Outcome::Stopped => SelectionResult {
            status: SelectionStatus::TimeLimit,
            selected: Vec::new(),
            excluded_not_subsumed: Vec::new(),
            coverage: 0.0,
            ffr: 0.0,
            objective: 0,
            diagnostics: SelectionDiagnostics::default(),
        },
    }
}
