//! On-disk JSON formats for every pipeline artifact. All files are UTF-8,
//! pretty-printed, and end with a trailing newline so diffs stay clean.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use spade_core::{
    CandidateAssertion, CandidateSet, ExampleRun, ExampleSet, PromptTemplate,
    PromptVersionHistory, Provenance, ResultMatrix, SelectionMode, SelectionResult,
    SubsumptionMatrix,
};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Invalid { path: String, detail: String },
}

impl FileError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        FileError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn invalid(path: &Path, detail: impl std::fmt::Display) -> Self {
        FileError::Invalid {
            path: path.display().to_string(),
            detail: detail.to_string(),
        }
    }
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| FileError::invalid(path, format!("serialization failed: {e}")))?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| FileError::io(path, e))?;
        }
    }
    fs::write(path, text).map_err(|e| FileError::io(path, e))
}

/// Reads and deserializes a JSON file.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FileError::invalid(path, e))
}

// ---------------------------------------------------------------- history

#[derive(Serialize, Deserialize)]
struct HistoryFile {
    versions: Vec<PromptTemplate>,
}

pub fn load_history(path: &Path) -> Result<PromptVersionHistory, FileError> {
    let file: HistoryFile = read_json(path)?;
    PromptVersionHistory::new(file.versions).map_err(|e| FileError::invalid(path, e))
}

pub fn save_history(path: &Path, history: &PromptVersionHistory) -> Result<(), FileError> {
    write_json(
        path,
        &HistoryFile {
            versions: history.versions().to_vec(),
        },
    )
}

// --------------------------------------------------------------- examples

#[derive(Serialize, Deserialize)]
struct ExamplesFile {
    examples: Vec<ExampleRun>,
}

pub fn load_examples(path: &Path) -> Result<ExampleSet, FileError> {
    let file: ExamplesFile = read_json(path)?;
    ExampleSet::new(file.examples).map_err(|e| FileError::invalid(path, e))
}

pub fn save_examples(path: &Path, examples: &ExampleSet) -> Result<(), FileError> {
    write_json(
        path,
        &ExamplesFile {
            examples: examples.examples().to_vec(),
        },
    )
}

// ------------------------------------------------------------- candidates

#[derive(Serialize, Deserialize)]
struct CandidatesFile {
    candidates: Vec<CandidateAssertion>,
}

pub fn load_candidates(path: &Path) -> Result<CandidateSet, FileError> {
    let file: CandidatesFile = read_json(path)?;
    CandidateSet::new(file.candidates).map_err(|e| FileError::invalid(path, e))
}

pub fn save_candidates(path: &Path, candidates: &CandidateSet) -> Result<(), FileError> {
    write_json(
        path,
        &CandidatesFile {
            candidates: candidates.candidates().to_vec(),
        },
    )
}

// ----------------------------------------------------------------- matrix

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    example_ids: Vec<String>,
    assertion_ids: Vec<String>,
    cells: Vec<Vec<u8>>,
}

pub fn load_matrix(path: &Path) -> Result<ResultMatrix, FileError> {
    let file: MatrixFile = read_json(path)?;
    ResultMatrix::new(file.example_ids, file.assertion_ids, file.cells)
        .map_err(|e| FileError::invalid(path, e))
}

pub fn save_matrix(path: &Path, matrix: &ResultMatrix) -> Result<(), FileError> {
    write_json(
        path,
        &MatrixFile {
            example_ids: matrix.example_ids().to_vec(),
            assertion_ids: matrix.assertion_ids().to_vec(),
            cells: matrix.cells().to_vec(),
        },
    )
}

// ------------------------------------------------------------ subsumption

#[derive(Serialize, Deserialize)]
struct SubsumptionFile {
    assertion_ids: Vec<String>,
    cells: Vec<Vec<u8>>,
    /// Keys are `"subsumerId->subsumedId"`.
    provenance: BTreeMap<String, Provenance>,
}

pub fn load_subsumption(path: &Path) -> Result<SubsumptionMatrix, FileError> {
    let file: SubsumptionFile = read_json(path)?;
    let index_of = |id: &str| -> Result<usize, FileError> {
        file.assertion_ids
            .iter()
            .position(|known| known == id)
            .ok_or_else(|| FileError::invalid(path, format!("provenance names unknown id {id:?}")))
    };
    let mut provenance = BTreeMap::new();
    for (key, value) in &file.provenance {
        let (a, b) = key
            .split_once("->")
            .ok_or_else(|| FileError::invalid(path, format!("malformed provenance key {key:?}")))?;
        provenance.insert((index_of(a)?, index_of(b)?), *value);
    }
    SubsumptionMatrix::new(file.assertion_ids, file.cells, provenance)
        .map_err(|e| FileError::invalid(path, e))
}

pub fn save_subsumption(path: &Path, k: &SubsumptionMatrix) -> Result<(), FileError> {
    let ids = k.assertion_ids();
    let provenance = k
        .provenance()
        .iter()
        .map(|(&(i, j), &prov)| (format!("{}->{}", ids[i], ids[j]), prov))
        .collect();
    write_json(
        path,
        &SubsumptionFile {
            assertion_ids: ids.to_vec(),
            cells: k.cells().to_vec(),
            provenance,
        },
    )
}

// -------------------------------------------------------------- selection

/// A selection result together with the knobs that produced it.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub mode: SelectionMode,
    pub alpha: f64,
    pub tau: f64,
    #[serde(flatten)]
    pub result: SelectionResult,
}

pub fn load_selection(path: &Path) -> Result<SelectionFile, FileError> {
    read_json(path)
}

pub fn save_selection(path: &Path, selection: &SelectionFile) -> Result<(), FileError> {
    write_json(path, selection)
}
