//! Exhaustive reference solver: enumerates every subset and applies the
//! metric definitions directly, with none of the search machinery. Exists
//! to certify the optimized solvers in tests.

use alloc::string::String;
use alloc::vec::Vec;

use crate::example::Label;
use crate::matrix::ResultMatrix;
use crate::subsume::SubsumptionMatrix;

use super::{
    check_dimensions, check_threshold, SelectError, SelectionDiagnostics, SelectionMode,
    SelectionResult, SelectionStatus,
};

const ORACLE_MAX_ASSERTIONS: usize = 20;

/// Solves any mode by brute force (2^m subsets for COV/SUB) with the same
/// boundary conventions and tie-break as the real solvers.
pub fn brute_force_oracle(
    matrix: &ResultMatrix,
    labels: &[Label],
    k: Option<&SubsumptionMatrix>,
    alpha: f64,
    tau: f64,
    mode: SelectionMode,
) -> Result<SelectionResult, SelectError> {
    check_dimensions(matrix, labels)?;
    check_threshold("alpha", alpha)?;
    check_threshold("tau", tau)?;
    let m = matrix.n_assertions();
    if m > ORACLE_MAX_ASSERTIONS {
        return Err(SelectError::TooLarge { m });
    }
    if let Some(k) = k {
        if k.assertion_ids() != matrix.assertion_ids() {
            return Err(SelectError::Misaligned);
        }
    }
    match mode {
        SelectionMode::Cov => enumerate(matrix, labels, None, alpha, tau, false),
        SelectionMode::Sub => {
            let k = k.ok_or(SelectError::MissingSubsumption)?;
            enumerate(matrix, labels, Some(k), alpha, tau, true)
        }
        SelectionMode::Baseline => Ok(baseline(matrix, labels, tau)),
        SelectionMode::NoExamples => {
            let k = k.ok_or(SelectError::MissingSubsumption)?;
            Ok(no_examples_by_reachability(k))
        }
    }
}

fn enumerate(
    matrix: &ResultMatrix,
    labels: &[Label],
    k: Option<&SubsumptionMatrix>,
    alpha: f64,
    tau: f64,
    sub_objective: bool,
) -> Result<SelectionResult, SelectError> {
    let m = matrix.n_assertions();
    let n = matrix.n_examples();
    let n_bad = labels.iter().filter(|l| l.is_bad()).count();
    let n_good = n - n_bad;

    let mut best: Option<(u64, Vec<String>, Vec<usize>, usize, usize)> = None;
    let mut best_cov_at_tau = 0usize;

    for mask in 0u32..1u32 << m {
        let selected: Vec<usize> = (0..m).filter(|j| mask >> j & 1 == 1).collect();
        let mut flagged_bad = 0usize;
        let mut flagged_good = 0usize;
        for i in 0..n {
            let flagged = selected.iter().any(|&j| !matrix.passes(i, j));
            if flagged {
                match labels[i] {
                    Label::Bad => flagged_bad += 1,
                    Label::Good => flagged_good += 1,
                }
            }
        }
        let ffr_ok = flagged_good as f64 <= tau * n_good as f64 + 1e-9;
        if ffr_ok && flagged_bad > best_cov_at_tau {
            best_cov_at_tau = flagged_bad;
        }
        let cov_ok = flagged_bad as f64 + 1e-9 >= alpha * n_bad as f64;
        if !(ffr_ok && cov_ok) {
            continue;
        }
        let objective = if sub_objective {
            let k = k.expect("SUB enumeration requires K");
            let g = g_size(k, &selected);
            (selected.len() + g) as u64
        } else {
            selected.len() as u64
        };
        let mut ids: Vec<String> = selected
            .iter()
            .map(|&j| matrix.assertion_ids()[j].clone())
            .collect();
        ids.sort_unstable();
        let better = match &best {
            None => true,
            Some((bo, bi, ..)) => objective < *bo || (objective == *bo && ids < *bi),
        };
        if better {
            best = Some((objective, ids, selected, flagged_bad, flagged_good));
        }
    }

    Ok(match best {
        Some((objective, ids, selected, flagged_bad, flagged_good)) => {
            let excluded_not_subsumed = match (sub_objective, k) {
                (true, Some(k)) => {
                    let mut g: Vec<String> = (0..m)
                        .filter(|&j| {
                            !selected.contains(&j)
                                && !selected.iter().any(|&i| i != j && k.subsumes(i, j))
                        })
                        .map(|j| matrix.assertion_ids()[j].clone())
                        .collect();
                    g.sort_unstable();
                    g
                }
                _ => Vec::new(),
            };
            SelectionResult {
                status: SelectionStatus::Optimal,
                selected: ids,
                excluded_not_subsumed,
                coverage: fraction_or(flagged_bad, n_bad, 1.0),
                ffr: fraction_or(flagged_good, n_good, 0.0),
                objective,
                diagnostics: SelectionDiagnostics::default(),
            }
        }
        None => SelectionResult {
            status: SelectionStatus::Infeasible,
            selected: Vec::new(),
            excluded_not_subsumed: Vec::new(),
            coverage: 0.0,
            ffr: 0.0,
            objective: 0,
            diagnostics: SelectionDiagnostics {
                max_coverage_at_tau: Some(fraction_or(best_cov_at_tau, n_bad, 1.0)),
            },
        },
    })
}

fn g_size(k: &SubsumptionMatrix, selected: &[usize]) -> usize {
    (0..k.len())
        .filter(|&j| {
            !selected.contains(&j) && !selected.iter().any(|&i| i != j && k.subsumes(i, j))
        })
        .count()
}

fn fraction_or(numerator: usize, denominator: usize, vacuous: f64) -> f64 {
    if denominator == 0 {
        vacuous
    } else {
        numerator as f64 / denominator as f64
    }
}

fn baseline(matrix: &ResultMatrix, labels: &[Label], tau: f64) -> SelectionResult {
    let n_good = labels.iter().filter(|l| l.is_good()).count();
    let mut cols: Vec<usize> = (0..matrix.n_assertions())
        .filter(|&j| {
            let misfires = (0..matrix.n_examples())
                .filter(|&i| labels[i].is_good() && !matrix.passes(i, j))
                .count();
            misfires as f64 <= tau * n_good as f64 + 1e-9
        })
        .collect();
    cols.sort_by(|&a, &b| matrix.assertion_ids()[a].cmp(&matrix.assertion_ids()[b]));

    let mut flagged_bad = 0usize;
    let mut flagged_good = 0usize;
    for i in 0..matrix.n_examples() {
        if cols.iter().any(|&j| !matrix.passes(i, j)) {
            match labels[i] {
                Label::Bad => flagged_bad += 1,
                Label::Good => flagged_good += 1,
            }
        }
    }
    let n_bad = labels.len() - n_good;
    SelectionResult {
        status: SelectionStatus::Optimal,
        objective: cols.len() as u64,
        coverage: fraction_or(flagged_bad, n_bad, 1.0),
        ffr: fraction_or(flagged_good, n_good, 0.0),
        selected: cols
            .iter()
            .map(|&j| matrix.assertion_ids()[j].clone())
            .collect(),
        excluded_not_subsumed: Vec::new(),
        diagnostics: SelectionDiagnostics::default(),
    }
}

/// Independent construction for the no-examples case: mutual-reachability
/// components from per-node searches, then one minimum-id representative
/// per component with no incoming cross edge.
fn no_examples_by_reachability(k: &SubsumptionMatrix) -> SelectionResult {
    let m = k.len();
    let reach: Vec<Vec<bool>> = (0..m)
        .map(|start| {
            let mut seen = alloc::vec![false; m];
            let mut stack = alloc::vec![start];
            while let Some(v) = stack.pop() {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                for w in 0..m {
                    if v != w && k.subsumes(v, w) && !seen[w] {
                        stack.push(w);
                    }
                }
            }
            seen
        })
        .collect();

    let mut component = alloc::vec![usize::MAX; m];
    let mut next = 0usize;
    for v in 0..m {
        if component[v] != usize::MAX {
            continue;
        }
        component[v] = next;
        for w in v + 1..m {
            if reach[v][w] && reach[w][v] {
                component[w] = next;
            }
        }
        next += 1;
    }

    let mut has_incoming = alloc::vec![false; next];
    for u in 0..m {
        for w in 0..m {
            if u != w && k.subsumes(u, w) && component[u] != component[w] {
                has_incoming[component[w]] = true;
            }
        }
    }

    let mut selected: Vec<String> = (0..next)
        .filter(|&c| !has_incoming[c])
        .map(|c| {
            (0..m)
                .filter(|&v| component[v] == c)
                .map(|v| k.assertion_ids()[v].clone())
                .min()
                .expect("components are non-empty")
        })
        .collect();
    selected.sort_unstable();

    let selected_idx: Vec<usize> = selected
        .iter()
        .map(|id| k.index_of(id).expect("ids come from k"))
        .collect();
    let mut g: Vec<String> = (0..m)
        .filter(|&j| {
            !selected_idx.contains(&j) && !selected_idx.iter().any(|&i| i != j && k.subsumes(i, j))
        })
        .map(|j| k.assertion_ids()[j].clone())
        .collect();
    g.sort_unstable();

    SelectionResult {
        status: SelectionStatus::Optimal,
        objective: (selected.len() + g.len()) as u64,
        coverage: 1.0,
        ffr: 0.0,
        selected,
        excluded_not_subsumed: g,
        diagnostics: SelectionDiagnostics::default(),
    }
}
