//! The pass/fail result matrix and the two metrics the selector optimizes:
//! coverage of bad responses and the false-failure rate on good responses.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::example::Label;

/// Evaluation results: one row per example, one column per candidate
/// assertion, cell value 1 when the assertion passes on that example's
/// response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultMatrix {
    example_ids: Vec<String>,
    assertion_ids: Vec<String>,
    cells: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatrixError {
    RowCount { expected: usize, found: usize },
    RowLen { row: usize, expected: usize, found: usize },
    CellValue { row: usize, col: usize, found: u8 },
    DuplicateExampleId { id: String },
    DuplicateAssertionId { id: String },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::RowCount { expected, found } => {
                write!(f, "expected {expected} rows, found {found}")
            }
            MatrixError::RowLen {
                row,
                expected,
                found,
            } => write!(f, "row {row} has {found} cells, expected {expected}"),
            MatrixError::CellValue { row, col, found } => {
                write!(f, "cell [{row}][{col}] must be 0 or 1, found {found}")
            }
            MatrixError::DuplicateExampleId { id } => {
                write!(f, "duplicate example id {id:?}")
            }
            MatrixError::DuplicateAssertionId { id } => {
                write!(f, "duplicate assertion id {id:?}")
            }
        }
    }
}

impl core::error::Error for MatrixError {}

impl ResultMatrix {
    pub fn new(
        example_ids: Vec<String>,
        assertion_ids: Vec<String>,
        cells: Vec<Vec<u8>>,
    ) -> Result<Self, MatrixError> {
        if cells.len() != example_ids.len() {
            return Err(MatrixError::RowCount {
                expected: example_ids.len(),
                found: cells.len(),
            });
        }
        for (row, cols) in cells.iter().enumerate() {
            if cols.len() != assertion_ids.len() {
                return Err(MatrixError::RowLen {
                    row,
                    expected: assertion_ids.len(),
                    found: cols.len(),
                });
            }
            for (col, &value) in cols.iter().enumerate() {
                if value > 1 {
                    return Err(MatrixError::CellValue {
                        row,
                        col,
                        found: value,
                    });
                }
            }
        }
        for (i, id) in example_ids.iter().enumerate() {
            if example_ids[..i].iter().any(|prev| prev == id) {
                return Err(MatrixError::DuplicateExampleId { id: id.clone() });
            }
        }
        for (j, id) in assertion_ids.iter().enumerate() {
            if assertion_ids[..j].iter().any(|prev| prev == id) {
                return Err(MatrixError::DuplicateAssertionId { id: id.clone() });
            }
        }
        Ok(ResultMatrix {
            example_ids,
            assertion_ids,
            cells,
        })
    }

    pub fn n_examples(&self) -> usize {
        self.example_ids.len()
    }

    pub fn n_assertions(&self) -> usize {
        self.assertion_ids.len()
    }

    pub fn example_ids(&self) -> &[String] {
        &self.example_ids
    }

    pub fn assertion_ids(&self) -> &[String] {
        &self.assertion_ids
    }

    pub fn cells(&self) -> &[Vec<u8>] {
        &self.cells
    }

    /// True when assertion `col` passes on example `row`.
    pub fn passes(&self, row: usize, col: usize) -> bool {
        self.cells[row][col] == 1
    }

    pub fn column_index(&self, assertion_id: &str) -> Option<usize> {
        self.assertion_ids.iter().position(|id| id == assertion_id)
    }

    /// Per-example verdict of a selected subset: an example is predicted good
    /// (`true`) exactly when every selected assertion passes on it. The empty
    /// subset predicts every example good.
    pub fn predicted_good(&self, selected: &[usize]) -> Vec<bool> {
        (0..self.n_examples())
            .map(|i| selected.iter().all(|&j| self.passes(i, j)))
            .collect()
    }
}

/// Fraction of bad-labeled examples that at least one selected assertion
/// fails on. Defined as 1.0 when there are no bad examples.
pub fn set_coverage(matrix: &ResultMatrix, labels: &[Label], selected: &[usize]) -> f64 {
    assert_eq!(
        labels.len(),
        matrix.n_examples(),
        "one label per matrix row"
    );
    let predicted = matrix.predicted_good(selected);
    let mut bad = 0usize;
    let mut flagged_bad = 0usize;
    for (i, label) in labels.iter().enumerate() {
        if label.is_bad() {
            bad += 1;
            if !predicted[i] {
                flagged_bad += 1;
            }
        }
    }
    if bad == 0 {
        1.0
    } else {
        flagged_bad as f64 / bad as f64
    }
}

/// Fraction of good-labeled examples that some selected assertion fails on —
/// the false-failure rate. Defined as 0.0 when there are no good examples.
pub fn set_ffr(matrix: &ResultMatrix, labels: &[Label], selected: &[usize]) -> f64 {
    assert_eq!(
        labels.len(),
        matrix.n_examples(),
        "one label per matrix row"
    );
    let predicted = matrix.predicted_good(selected);
    let mut good = 0usize;
    let mut flagged_good = 0usize;
    for (i, label) in labels.iter().enumerate() {
        if label.is_good() {
            good += 1;
            if !predicted[i] {
                flagged_good += 1;
            }
        }
    }
    if good == 0 {
        0.0
    } else {
        flagged_good as f64 / good as f64
    }
}

/// False-failure rate of a single assertion on its own.
pub fn single_ffr(matrix: &ResultMatrix, labels: &[Label], col: usize) -> f64 {
    set_ffr(matrix, labels, &[col])
}
