//! The subsumption matrix K: which single assertions imply which others,
//! assembled from exact DSL rules plus externally supplied (LLM) judgments,
//! then transitively closed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{AssertionSpec, JsonShape, OperandItem};
use crate::example::Label;
use crate::matrix::{ResultMatrix, single_ffr};

/// How a K cell was established. Exact rule matches are proofs; LLM
/// judgments are best-effort; transitive cells inherit from closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    DslRule,
    Llm,
    Transitive,
}

/// Square binary matrix over assertion ids: `cell(i, j) = 1` iff assertion
/// `i` passing guarantees assertion `j` passes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsumptionMatrix {
    assertion_ids: Vec<String>,
    cells: Vec<Vec<u8>>,
    provenance: BTreeMap<(usize, usize), Provenance>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubsumeError {
    UnknownAssertion { id: String },
    DuplicateId { id: String },
    RowCount { expected: usize, found: usize },
    RowLen { row: usize, expected: usize, found: usize },
    CellValue { row: usize, col: usize, found: u8 },
    DiagonalZero { index: usize },
    ProvenanceMismatch { row: usize, col: usize },
}

impl fmt::Display for SubsumeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsumeError::UnknownAssertion { id } => {
                write!(f, "unknown assertion id {id:?}")
            }
            SubsumeError::DuplicateId { id } => write!(f, "duplicate assertion id {id:?}"),
            SubsumeError::RowCount { expected, found } => {
                write!(f, "expected {expected} rows, found {found}")
            }
            SubsumeError::RowLen {
                row,
                expected,
                found,
            } => write!(f, "row {row} has {found} cells, expected {expected}"),
            SubsumeError::CellValue { row, col, found } => {
                write!(f, "cell [{row}][{col}] must be 0 or 1, found {found}")
            }
            SubsumeError::DiagonalZero { index } => {
                write!(f, "diagonal cell [{index}][{index}] must be 1")
            }
            SubsumeError::ProvenanceMismatch { row, col } => {
                write!(f, "provenance recorded for unset cell [{row}][{col}]")
            }
        }
    }
}

impl core::error::Error for SubsumeError {}

impl SubsumptionMatrix {
    /// The identity matrix: every assertion subsumes itself and nothing
    /// else. Diagonal cells carry rule provenance (reflexivity is exact).
    pub fn identity(assertion_ids: Vec<String>) -> Result<Self, SubsumeError> {
        let m = assertion_ids.len();
        for (i, id) in assertion_ids.iter().enumerate() {
            if assertion_ids[..i].iter().any(|prev| prev == id) {
                return Err(SubsumeError::DuplicateId { id: id.clone() });
            }
        }
        let mut cells = vec![vec![0u8; m]; m];
        let mut provenance = BTreeMap::new();
        for i in 0..m {
            cells[i][i] = 1;
            provenance.insert((i, i), Provenance::DslRule);
        }
        Ok(SubsumptionMatrix {
            assertion_ids,
            cells,
            provenance,
        })
    }

    /// Validates shape, binary cells, a set diagonal, id uniqueness, and
    /// that provenance entries point at set cells. Transitive closedness is
    /// deliberately not enforced here so callers can inspect raw matrices.
    pub fn new(
        assertion_ids: Vec<String>,
        cells: Vec<Vec<u8>>,
        provenance: BTreeMap<(usize, usize), Provenance>,
    ) -> Result<Self, SubsumeError> {
        let m = assertion_ids.len();
        for (i, id) in assertion_ids.iter().enumerate() {
            if assertion_ids[..i].iter().any(|prev| prev == id) {
                return Err(SubsumeError::DuplicateId { id: id.clone() });
            }
        }
        if cells.len() != m {
            return Err(SubsumeError::RowCount {
                expected: m,
                found: cells.len(),
            });
        }
        for (row, cols) in cells.iter().enumerate() {
            if cols.len() != m {
                return Err(SubsumeError::RowLen {
                    row,
                    expected: m,
                    found: cols.len(),
                });
            }
            for (col, &value) in cols.iter().enumerate() {
                if value > 1 {
                    return Err(SubsumeError::CellValue {
                        row,
                        col,
                        found: value,
                    });
                }
            }
        }
        for i in 0..m {
            if cells[i][i] != 1 {
                return Err(SubsumeError::DiagonalZero { index: i });
            }
        }
        for &(row, col) in provenance.keys() {
            if row >= m || col >= m || cells[row][col] != 1 {
                return Err(SubsumeError::ProvenanceMismatch { row, col });
            }
        }
        Ok(SubsumptionMatrix {
            assertion_ids,
            cells,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.assertion_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertion_ids.is_empty()
    }

    pub fn assertion_ids(&self) -> &[String] {
        &self.assertion_ids
    }

    pub fn cells(&self) -> &[Vec<u8>] {
        &self.cells
    }

    pub fn provenance(&self) -> &BTreeMap<(usize, usize), Provenance> {
        &self.provenance
    }

    pub fn index_of(&self, assertion_id: &str) -> Option<usize> {
        self.assertion_ids.iter().position(|id| id == assertion_id)
    }

    /// True when assertion `i` subsumes assertion `j`.
    pub fn subsumes(&self, i: usize, j: usize) -> bool {
        self.cells[i][j] == 1
    }

    /// Sets cell `(i, j)`. The first write wins: an already-set cell keeps
    /// its original provenance, so exact rules recorded before LLM pairs
    /// take priority.
    pub fn set(&mut self, i: usize, j: usize, provenance: Provenance) {
        if self.cells[i][j] == 0 {
            self.cells[i][j] = 1;
            self.provenance.insert((i, j), provenance);
        }
    }

    /// Boolean transitive closure in place; newly reachable cells are
    /// marked [`Provenance::Transitive`]. Idempotent.
    pub fn transitive_closure(&mut self) {
        let m = self.len();
        for k in 0..m {
            for i in 0..m {
                if self.cells[i][k] == 0 {
                    continue;
                }
                for j in 0..m {
                    if self.cells[k][j] == 1 {
                        self.set(i, j, Provenance::Transitive);
                    }
                }
            }
        }
    }

    pub fn is_transitively_closed(&self) -> bool {
        let m = self.len();
        for i in 0..m {
            for k in 0..m {
                if self.cells[i][k] == 0 {
                    continue;
                }
                for j in 0..m {
                    if self.cells[k][j] == 1 && self.cells[i][j] == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Exact structural subsumption: does `a` passing guarantee `b` passes?
///
/// Implements a closed list of sound rules and answers `false` everywhere
/// else — sound, not complete. Operand comparisons require identical
/// case-folding flags; no rule crosses folding modes.
pub fn dsl_subsumes(a: &AssertionSpec, b: &AssertionSpec) -> bool {
    if a == b {
        return true;
    }
    match (a, b) {
        // Requiring a superset of operands implies requiring any subset.
        (
            AssertionSpec::ContainsAll { items: wide },
            AssertionSpec::ContainsAll { items: narrow },
        )
        | (
            AssertionSpec::ExcludesAll { items: wide },
            AssertionSpec::ExcludesAll { items: narrow },
        ) => operand_subset(narrow, wide),
        // A tighter count interval implies a looser one.
        (
            AssertionSpec::WordCount { min: amin, max: amax },
            AssertionSpec::WordCount { min: bmin, max: bmax },
        )
        | (
            AssertionSpec::SentenceCount { min: amin, max: amax },
            AssertionSpec::SentenceCount { min: bmin, max: bmax },
        ) => interval_subset(*amin, *amax, *bmin, *bmax),
        (
            AssertionSpec::JsonListMinLen { min_len: ka },
            AssertionSpec::JsonListMinLen { min_len: kb },
        ) => ka >= kb,
        (AssertionSpec::JsonListMinLen { .. }, AssertionSpec::JsonParseable { shape }) => {
            *shape == JsonShape::List
        }
        (
            AssertionSpec::JsonRequiredKeys { keys: wide },
            AssertionSpec::JsonRequiredKeys { keys: narrow },
        ) => narrow.iter().all(|k| wide.contains(k)),
        (AssertionSpec::JsonRequiredKeys { .. }, AssertionSpec::JsonParseable { shape }) => {
            *shape == JsonShape::Object
        }
        // A conjunction implies each of its conjuncts.
        (AssertionSpec::AllOf { children }, _) => children.contains(b),
        // Any spec implies a disjunction listing it.
        (_, AssertionSpec::AnyOf { children }) => children.contains(a),
        _ => false,
    }
}

fn operand_subset(narrow: &[OperandItem], wide: &[OperandItem]) -> bool {
    narrow.iter().all(|item| wide.contains(item))
}

/// Interval containment with `None` meaning unbounded: `[amin, amax]` must
/// lie inside `[bmin, bmax]`.
fn interval_subset(
    amin: Option<u64>,
    amax: Option<u64>,
    bmin: Option<u64>,
    bmax: Option<u64>,
) -> bool {
    let lower_ok = match (bmin, amin) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(b), Some(a)) => a >= b,
    };
    let upper_ok = match (bmax, amax) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(b), Some(a)) => a <= b,
    };
    lower_ok && upper_ok
}

/// True iff the evaluation results refute "`i` subsumes `j`": some example
/// has `i` passing while `j` fails. Takes assertion ids.
pub fn prune_pair_by_examples(
    subsumer: &str,
    subsumed: &str,
    matrix: &ResultMatrix,
) -> Result<bool, SubsumeError> {
    let i = matrix
        .column_index(subsumer)
        .ok_or_else(|| SubsumeError::UnknownAssertion {
            id: String::from(subsumer),
        })?;
    let j = matrix
        .column_index(subsumed)
        .ok_or_else(|| SubsumeError::UnknownAssertion {
            id: String::from(subsumed),
        })?;
    Ok((0..matrix.n_examples()).any(|row| matrix.passes(row, i) && !matrix.passes(row, j)))
}

/// Ids whose single-assertion false-failure rate disqualifies them from
/// paid subsumption checks: FFR at or above `tau`, and flagging at least
/// one good example (an assertion that never misfires is always worth
/// checking, whatever `tau` is).
pub fn ffr_skip_set(matrix: &ResultMatrix, labels: &[Label], tau: f64) -> BTreeSet<String> {
    let n_good = labels.iter().filter(|l| l.is_good()).count();
    let mut skip = BTreeSet::new();
    for j in 0..matrix.n_assertions() {
        let misfires = (0..matrix.n_examples())
            .filter(|&i| labels[i].is_good() && !matrix.passes(i, j))
            .count();
        let at_or_above_tau = misfires as f64 >= tau * n_good as f64 - 1e-9;
        if misfires > 0 && at_or_above_tau {
            skip.insert(matrix.assertion_ids()[j].clone());
        }
    }
    debug_assert!(skip.iter().all(|id| {
        let j = matrix.column_index(id).unwrap();
        single_ffr(matrix, labels, j) > 0.0
    }));
    skip
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::OperandItem;
    use alloc::string::ToString;

    fn contains_all(items: &[&str]) -> AssertionSpec {
        AssertionSpec::ContainsAll {
            items: items.iter().map(|s| OperandItem::literal(s)).collect(),
        }
    }

    fn w_matrix() -> (ResultMatrix, Vec<Label>) {
        let matrix = ResultMatrix::new(
            vec!["e1".into(), "e2".into(), "e3".into(), "e4".into()],
            vec!["f1".into(), "f2".into(), "f3".into()],
            vec![
                vec![0, 1, 0],
                vec![1, 0, 0],
                vec![1, 0, 1],
                vec![1, 1, 1],
            ],
        )
        .unwrap();
        (matrix, vec![Label::Bad, Label::Bad, Label::Good, Label::Good])
    }

    #[test]
    fn identical_specs_subsume_reflexively() {
        let specs = [
            contains_all(&["x"]),
            AssertionSpec::StartsWith {
                prefix: OperandItem::literal("Dear"),
            },
            AssertionSpec::RegexMatch {
                pattern: "^[0-9]+$".into(),
            },
            AssertionSpec::JsonParseable {
                shape: JsonShape::Any,
            },
            AssertionSpec::LlmQuestion {
                questions: vec!["Is it concise?".into()],
            },
        ];
        for spec in &specs {
            assert!(dsl_subsumes(spec, spec));
        }
    }

    #[test]
    fn operand_superset_rules() {
        let five = contains_all(&[
            "Context:",
            "Central Thesis:",
            "Key Points:",
            "Conclusions and Takeaways:",
            "Glossary of Important Terms:",
        ]);
        let one = contains_all(&["Central Thesis:"]);
        assert!(dsl_subsumes(&five, &one));
        assert!(!dsl_subsumes(&one, &five));

        // Folding flags must match exactly.
        let ci = AssertionSpec::ContainsAll {
            items: vec![OperandItem::literal_ci("Central Thesis:")],
        };
        assert!(!dsl_subsumes(&five, &ci));

        let wide_excl = AssertionSpec::ExcludesAll {
            items: vec![OperandItem::literal("race"), OperandItem::literal("age")],
        };
        let narrow_excl = AssertionSpec::ExcludesAll {
            items: vec![OperandItem::literal("race")],
        };
        assert!(dsl_subsumes(&wide_excl, &narrow_excl));
        assert!(!dsl_subsumes(&narrow_excl, &wide_excl));
    }

    #[test]
    fn contains_any_has_no_subset_rule() {
        // ContainsAny(narrow) ⟹ ContainsAny(wide) would be sound, but it is
        // outside the closed rule list and must answer false.
        let narrow = AssertionSpec::ContainsAny {
            items: vec![OperandItem::literal("genre")],
        };
        let wide = AssertionSpec::ContainsAny {
            items: vec![OperandItem::literal("genre"), OperandItem::literal("cast")],
        };
        assert!(!dsl_subsumes(&narrow, &wide));
        assert!(!dsl_subsumes(&wide, &narrow));
    }

    #[test]
    fn count_interval_containment() {
        let tight = AssertionSpec::WordCount {
            min: Some(10),
            max: Some(50),
        };
        let loose = AssertionSpec::WordCount {
            min: Some(5),
            max: Some(100),
        };
        assert!(dsl_subsumes(&tight, &loose));
        assert!(!dsl_subsumes(&loose, &tight));

        let capped = AssertionSpec::WordCount {
            min: None,
            max: Some(100),
        };
        let capped_higher = AssertionSpec::WordCount {
            min: None,
            max: Some(150),
        };
        assert!(dsl_subsumes(&capped, &capped_higher));
        assert!(!dsl_subsumes(&capped_higher, &capped));
        // A bounded-above interval does not fit inside a bounded-below one.
        let floor = AssertionSpec::WordCount {
            min: Some(1),
            max: None,
        };
        assert!(!dsl_subsumes(&capped, &floor));
        // Word bounds say nothing about sentences.
        let sentences = AssertionSpec::SentenceCount {
            min: None,
            max: Some(100),
        };
        assert!(!dsl_subsumes(&capped, &sentences));
    }

    #[test]
    fn json_rules() {
        let min2 = AssertionSpec::JsonListMinLen { min_len: 2 };
        let min1 = AssertionSpec::JsonListMinLen { min_len: 1 };
        let list = AssertionSpec::JsonParseable {
            shape: JsonShape::List,
        };
        let any = AssertionSpec::JsonParseable {
            shape: JsonShape::Any,
        };
        let object = AssertionSpec::JsonParseable {
            shape: JsonShape::Object,
        };
        assert!(dsl_subsumes(&min2, &min1));
        assert!(!dsl_subsumes(&min1, &min2));
        assert!(dsl_subsumes(&min2, &list));
        assert!(dsl_subsumes(&AssertionSpec::JsonListMinLen { min_len: 0 }, &list));
        // Outside the closed rule list.
        assert!(!dsl_subsumes(&min2, &any));
        assert!(!dsl_subsumes(&list, &any));

        let keys_ab = AssertionSpec::JsonRequiredKeys {
            keys: vec!["a".into(), "b".into()],
        };
        let keys_a = AssertionSpec::JsonRequiredKeys {
            keys: vec!["a".into()],
        };
        assert!(dsl_subsumes(&keys_ab, &keys_a));
        assert!(!dsl_subsumes(&keys_a, &keys_ab));
        assert!(dsl_subsumes(&keys_ab, &object));
        assert!(dsl_subsumes(&keys_a, &object));
        assert!(!dsl_subsumes(&keys_ab, &list));
    }

    #[test]
    fn composite_rules() {
        let child_a = contains_all(&["genre"]);
        let child_b = AssertionSpec::WordCount {
            min: None,
            max: Some(100),
        };
        let conj = AssertionSpec::AllOf {
            children: vec![child_a.clone(), child_b.clone()],
        };
        assert!(dsl_subsumes(&conj, &child_a));
        assert!(dsl_subsumes(&conj, &child_b));
        assert!(!dsl_subsumes(&conj, &contains_all(&["cast"])));
        assert!(!dsl_subsumes(&child_a, &conj));

        let disj = AssertionSpec::AnyOf {
            children: vec![child_a.clone(), child_b.clone()],
        };
        assert!(dsl_subsumes(&child_a, &disj));
        assert!(dsl_subsumes(&child_b, &disj));
        assert!(!dsl_subsumes(&disj, &child_a));
        assert!(!dsl_subsumes(&contains_all(&["cast"]), &disj));
    }

    #[test]
    fn refutation_scans_rows() {
        let m = ResultMatrix::new(
            vec!["e1".into(), "e2".into()],
            vec!["i".into(), "j".into(), "k".into()],
            vec![vec![1, 1, 0], vec![1, 0, 1]],
        )
        .unwrap();
        // i passes row 2 where j fails: refuted.
        assert_eq!(prune_pair_by_examples("i", "j", &m), Ok(true));
        // k only passes where i passes... k passes row 2, i passes row 2.
        assert_eq!(prune_pair_by_examples("k", "i", &m), Ok(false));
        assert_eq!(
            prune_pair_by_examples("i", "missing", &m),
            Err(SubsumeError::UnknownAssertion {
                id: "missing".to_string()
            })
        );
    }

    #[test]
    fn refutation_on_w() {
        let (m, _) = w_matrix();
        // f3 never passes where f1 fails.
        assert_eq!(prune_pair_by_examples("f3", "f1", &m), Ok(false));
        // f1 passes e2 where f3 fails.
        assert_eq!(prune_pair_by_examples("f1", "f3", &m), Ok(true));
    }

    #[test]
    fn ffr_skip_set_boundaries() {
        let (m, y) = w_matrix();
        let skip = ffr_skip_set(&m, &y, 0.25);
        assert_eq!(skip.into_iter().collect::<Vec<_>>(), vec!["f2".to_string()]);
        // tau = 0: anything flagging even one good example is skipped.
        let skip0 = ffr_skip_set(&m, &y, 0.0);
        assert_eq!(skip0.into_iter().collect::<Vec<_>>(), vec!["f2".to_string()]);
        // tau = 1: only always-misfiring assertions (FFR exactly 1).
        assert!(ffr_skip_set(&m, &y, 1.0).is_empty());
        let all_misfire = ResultMatrix::new(
            vec!["e1".into(), "e2".into()],
            vec!["f1".into()],
            vec![vec![0], vec![0]],
        )
        .unwrap();
        let skip1 = ffr_skip_set(&all_misfire, &[Label::Good, Label::Good], 1.0);
        assert_eq!(skip1.into_iter().collect::<Vec<_>>(), vec!["f1".to_string()]);
    }

    #[test]
    fn closure_adds_transitive_cells_with_provenance() {
        let mut k = SubsumptionMatrix::identity(vec![
            "a".to_string(),
            "b".to_string(),
            "c".to_string(),
        ])
        .unwrap();
        k.set(0, 1, Provenance::DslRule);
        k.set(1, 2, Provenance::Llm);
        assert!(!k.is_transitively_closed());
        k.transitive_closure();
        assert!(k.subsumes(0, 2));
        assert_eq!(k.provenance().get(&(0, 2)), Some(&Provenance::Transitive));
        assert!(k.is_transitively_closed());
        let before = k.clone();
        k.transitive_closure();
        assert_eq!(k, before);
    }

    #[test]
    fn closure_matches_reachability_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC105);
        for _ in 0..50 {
            let m = 10usize;
            let ids: Vec<String> = (0..m).map(|i| alloc::format!("f{i}")).collect();
            let mut k = SubsumptionMatrix::identity(ids).unwrap();
            let mut adj = vec![vec![false; m]; m];
            for i in 0..m {
                adj[i][i] = true;
                for j in 0..m {
                    if i != j && rng.gen_bool(0.15) {
                        adj[i][j] = true;
                        k.set(i, j, Provenance::Llm);
                    }
                }
            }
            k.transitive_closure();
            // Oracle: depth-first reachability per node.
            for start in 0..m {
                let mut seen = vec![false; m];
                let mut stack = vec![start];
                while let Some(node) = stack.pop() {
                    if seen[node] {
                        continue;
                    }
                    seen[node] = true;
                    for (next, &edge) in adj[node].iter().enumerate() {
                        if edge && !seen[next] {
                            stack.push(next);
                        }
                    }
                }
                for j in 0..m {
                    assert_eq!(k.subsumes(start, j), seen[j], "cell ({start},{j})");
                }
            }
        }
    }

    #[test]
    fn matrix_validation() {
        let err = SubsumptionMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1, 0], vec![0, 0]],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, SubsumeError::DiagonalZero { index: 1 });

        let mut prov = BTreeMap::new();
        prov.insert((0, 1), Provenance::Llm);
        let err = SubsumptionMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![1, 0], vec![0, 1]],
            prov,
        )
        .unwrap_err();
        assert_eq!(err, SubsumeError::ProvenanceMismatch { row: 0, col: 1 });

        let first_write = {
            let mut k =
                SubsumptionMatrix::identity(vec!["a".to_string(), "b".to_string()]).unwrap();
            k.set(0, 1, Provenance::DslRule);
            k.set(0, 1, Provenance::Llm);
            k
        };
        assert_eq!(
            first_write.provenance().get(&(0, 1)),
            Some(&Provenance::DslRule)
        );
    }
}
