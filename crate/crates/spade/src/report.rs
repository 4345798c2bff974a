//! The end-of-run report: stage timings, per-delta generation outcomes, the
//! evaluation error log, the subsumption audit trail, and the headline
//! metrics — each independently recomputable from the artifact files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use spade_core::{
    excluded_not_subsumed, set_coverage, set_ffr, Label, ResultMatrix, SelectionMode,
    SelectionStatus, SubsumptionMatrix,
};

use crate::evaluate::EvalIssue;
use crate::files::SelectionFile;
use crate::generate::GenerationReport;
use crate::subsume::SubsumeReport;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    /// True when the stage was satisfied by a pre-existing artifact file.
    pub resumed: bool,
}

/// The four headline numbers for one solved mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub mode: SelectionMode,
    /// |F′| / m.
    pub fraction_selected: f64,
    /// |G| / m — excluded assertions no selected one accounts for.
    pub fraction_excluded_not_subsumed: f64,
    pub ffr: f64,
    pub coverage: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageTiming>,
    pub generation: Option<GenerationReport>,
    pub evaluation_issues: Vec<EvalIssue>,
    pub subsumption: Option<SubsumeReport>,
    /// Off-diagonal K cells by provenance kind.
    pub provenance_summary: BTreeMap<String, usize>,
    pub metrics: Vec<ModeMetrics>,
}

impl RunReport {
    pub fn record_stage(&mut self, stage: &str, seconds: f64, resumed: bool) {
        self.stages.push(StageTiming {
            stage: stage.into(),
            seconds,
            resumed,
        });
    }
}

/// Counts K's off-diagonal cells by provenance kind.
pub fn provenance_summary(k: &SubsumptionMatrix) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for (&(i, j), prov) in k.provenance() {
        if i != j {
            let key = serde_json::to_value(prov)
                .expect("provenance serializes to a string")
                .as_str()
                .expect("provenance serializes to a string")
                .to_string();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Recomputes the headline metrics straight from the artifacts and checks
/// them against what the selection file claims. Any disagreement is a bug
/// upstream, reported as an error string naming the offending number.
pub fn audited_metrics(
    selection: &SelectionFile,
    matrix: Option<(&ResultMatrix, &[Label])>,
    k: Option<&SubsumptionMatrix>,
) -> Result<ModeMetrics, String> {
    let result = &selection.result;
    let m = match (matrix, k) {
        (Some((matrix, _)), _) => matrix.n_assertions(),
        (None, Some(k)) => k.len(),
        (None, None) => return Err("no artifact to recompute metrics from".into()),
    };

    if let (Some(k), SelectionStatus::Optimal) = (k, result.status) {
        let g = excluded_not_subsumed(k, &result.selected).map_err(|e| e.to_string())?;
        if g != result.excluded_not_subsumed {
            return Err(format!(
                "excluded_not_subsumed mismatch: file says {:?}, K says {:?}",
                result.excluded_not_subsumed, g
            ));
        }
    }

    let expected_objective = match selection.mode {
        SelectionMode::Cov | SelectionMode::Baseline => result.selected.len() as u64,
        SelectionMode::Sub | SelectionMode::NoExamples => {
            (result.selected.len() + result.excluded_not_subsumed.len()) as u64
        }
    };
    if result.status == SelectionStatus::Optimal && result.objective != expected_objective {
        return Err(format!(
            "objective mismatch: file says {}, recomputation says {}",
            result.objective, expected_objective
        ));
    }

    let (coverage, ffr) = match (matrix, selection.mode) {
        // Without labeled examples the metrics are vacuous by definition;
        // there is nothing to recompute against.
        (_, SelectionMode::NoExamples) | (None, _) => (result.coverage, result.ffr),
        (Some((matrix, labels)), _) => {
            let mut cols = Vec::with_capacity(result.selected.len());
            for id in &result.selected {
                cols.push(
                    matrix
                        .column_index(id)
                        .ok_or_else(|| format!("selected id {id:?} is not in the matrix"))?,
                );
            }
            let coverage = set_coverage(matrix, labels, &cols);
            let ffr = set_ffr(matrix, labels, &cols);
            if result.status == SelectionStatus::Optimal {
                if (coverage - result.coverage).abs() > 1e-12 {
                    return Err(format!(
                        "coverage mismatch: file says {}, recomputation says {coverage}",
                        result.coverage
                    ));
                }
                if (ffr - result.ffr).abs() > 1e-12 {
                    return Err(format!(
                        "ffr mismatch: file says {}, recomputation says {ffr}",
                        result.ffr
                    ));
                }
            }
            (coverage, ffr)
        }
    };

    Ok(ModeMetrics {
        mode: selection.mode,
        fraction_selected: result.selected.len() as f64 / m.max(1) as f64,
        fraction_excluded_not_subsumed: result.excluded_not_subsumed.len() as f64
            / m.max(1) as f64,
        ffr,
        coverage,
    })
}
