//! Prompt version histories, sentence segmentation, and sentence-level
//! deltas between consecutive versions.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// One prompt template in a version history.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub version: u32,
    pub text: String,
}

/// Consecutive prompt versions `P_0 ..= P_k`. `P_0` is the empty template; it
/// is injected automatically when a history starts at version 1, so the first
/// delta always describes the initial prompt as pure additions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptVersionHistory {
    versions: Vec<PromptTemplate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeltaTag {
    Deleted,
    Added,
}

/// One changed sentence. `position` is the sentence index in the version the
/// entry refers to: the previous version for `Deleted` entries, the next
/// version for `Added` entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub tag: DeltaTag,
    pub sentence: String,
    pub position: usize,
}

/// Sentence-level difference between two consecutive prompt versions.
///
/// Entries are grouped per edit hunk: the deleted sentences of a hunk (in
/// previous-version order) come first, immediately followed by the sentences
/// added in their place (in next-version order). A modified sentence thus
/// appears as one `Deleted` plus one `Added` entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDelta {
    pub from_version: u32,
    pub to_version: u32,
    pub entries: Vec<DeltaEntry>,
}

impl PromptDelta {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn deleted(&self) -> impl Iterator<Item = &DeltaEntry> {
        self.entries.iter().filter(|e| e.tag == DeltaTag::Deleted)
    }

    pub fn added(&self) -> impl Iterator<Item = &DeltaEntry> {
        self.entries.iter().filter(|e| e.tag == DeltaTag::Added)
    }

    /// Renders the delta the way it is shown to an LLM: one line per entry,
    /// `- ` for deletions and `+ ` for additions, in entry order.
    pub fn tagged_lines(&self) -> String {
        let mut out = String::new();
        for (i, entry) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(match entry.tag {
                DeltaTag::Deleted => "- ",
                DeltaTag::Added => "+ ",
            });
            out.push_str(&entry.sentence);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HistoryError {
    Empty,
    /// Version numbers must be consecutive once `P_0` is in place.
    VersionGap { expected: u32, found: u32 },
    /// A delta did not line up with the sentence list it was applied to.
    MalformedDelta { reason: &'static str },
}

impl fmt::Display for HistoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryError::Empty => write!(f, "history contains no versions"),
            HistoryError::VersionGap { expected, found } => {
                write!(f, "expected version {expected}, found {found}")
            }
            HistoryError::MalformedDelta { reason } => {
                write!(f, "delta does not apply: {reason}")
            }
        }
    }
}

impl core::error::Error for HistoryError {}

impl PromptVersionHistory {
    /// Validates version numbering and injects the empty `P_0` when the
    /// history starts at version 1.
    pub fn new(versions: Vec<PromptTemplate>) -> Result<Self, HistoryError> {
        let mut versions = versions;
        match versions.first() {
            None => return Err(HistoryError::Empty),
            Some(first) if first.version == 1 => {
                versions.insert(
                    0,
                    PromptTemplate {
                        version: 0,
                        text: String::new(),
                    },
                );
            }
            Some(_) => {}
        }
        for (i, template) in versions.iter().enumerate() {
            let expected = i as u32;
            if template.version != expected {
                return Err(HistoryError::VersionGap {
                    expected,
                    found: template.version,
                });
            }
        }
        Ok(PromptVersionHistory { versions })
    }

    pub fn versions(&self) -> &[PromptTemplate] {
        &self.versions
    }

    /// The newest template; the one candidate assertions are written against.
    pub fn latest(&self) -> &PromptTemplate {
        self.versions.last().expect("history is never empty")
    }

    /// Sentence-level deltas between each pair of consecutive versions, in
    /// ascending `to_version` order.
    pub fn deltas(&self) -> Vec<PromptDelta> {
        self.versions
            .windows(2)
            .map(|pair| compute_delta(&pair[0], &pair[1]))
            .collect()
    }
}

/// Splits text into sentences. Boundaries are `.`, `!`, or `?` followed by
/// whitespace or end of input, and every newline. Pieces are trimmed and
/// empty pieces dropped, so joining the result loses only the whitespace
/// between sentences.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        let cut = match c {
            '\n' => Some(i + 1),
            '.' | '!' | '?' => match iter.peek() {
                None => Some(i + 1),
                Some(&(_, next)) if next.is_whitespace() => Some(i + 1),
                Some(_) => None,
            },
            _ => None,
        };
        if let Some(end) = cut {
            push_trimmed(&mut sentences, &text[start..end]);
            start = end;
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Sentence-level diff from `prev` to `next` via longest common subsequence
/// over exact sentence matches.
pub fn compute_delta(prev: &PromptTemplate, next: &PromptTemplate) -> PromptDelta {
    let a = segment_sentences(&prev.text);
    let b = segment_sentences(&next.text);
    let n = a.len();
    let m = b.len();
    // dp[i][j] = LCS length of a[i..] and b[j..]
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }

    let mut entries = Vec::new();
    let mut hunk_deleted: Vec<DeltaEntry> = Vec::new();
    let mut hunk_added: Vec<DeltaEntry> = Vec::new();
    let flush = |entries: &mut Vec<DeltaEntry>,
                     deleted: &mut Vec<DeltaEntry>,
                     added: &mut Vec<DeltaEntry>| {
        entries.append(deleted);
        entries.append(added);
    };

    let (mut i, mut j) = (0usize, 0usize);
    loop {
        if i < n && j < m && a[i] == b[j] {
            flush(&mut entries, &mut hunk_deleted, &mut hunk_added);
            i += 1;
            j += 1;
        } else if i < n && (j == m || dp[i + 1][j] >= dp[i][j + 1]) {
            hunk_deleted.push(DeltaEntry {
                tag: DeltaTag::Deleted,
                sentence: a[i].clone(),
                position: i,
            });
            i += 1;
        } else if j < m {
            hunk_added.push(DeltaEntry {
                tag: DeltaTag::Added,
                sentence: b[j].clone(),
                position: j,
            });
            j += 1;
        } else {
            break;
        }
    }
    flush(&mut entries, &mut hunk_deleted, &mut hunk_added);

    PromptDelta {
        from_version: prev.version,
        to_version: next.version,
        entries,
    }
}

/// Replays a delta on top of the previous version's sentence list,
/// reproducing the next version's sentence list exactly.
pub fn apply_delta(
    prev_sentences: &[String],
    delta: &PromptDelta,
) -> Result<Vec<String>, HistoryError> {
    let mut keep = vec![true; prev_sentences.len()];
    let mut added = 0usize;
    for entry in &delta.entries {
        match entry.tag {
            DeltaTag::Deleted => {
                if entry.position >= prev_sentences.len() {
                    return Err(HistoryError::MalformedDelta {
                        reason: "deleted position out of range",
                    });
                }
                if prev_sentences[entry.position] != entry.sentence {
                    return Err(HistoryError::MalformedDelta {
                        reason: "deleted sentence does not match previous version",
                    });
                }
                if !keep[entry.position] {
                    return Err(HistoryError::MalformedDelta {
                        reason: "sentence deleted twice",
                    });
                }
                keep[entry.position] = false;
            }
            DeltaTag::Added => added += 1,
        }
    }

    let next_len = prev_sentences.len() - keep.iter().filter(|k| !**k).count() + added;
    let mut slots: Vec<Option<&str>> = vec![None; next_len];
    for entry in &delta.entries {
        if entry.tag == DeltaTag::Added {
            if entry.position >= next_len {
                return Err(HistoryError::MalformedDelta {
                    reason: "added position out of range",
                });
            }
            if slots[entry.position].is_some() {
                return Err(HistoryError::MalformedDelta {
                    reason: "two sentences added at one position",
                });
            }
            slots[entry.position] = Some(&entry.sentence);
        }
    }

    let mut kept = prev_sentences
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(s, _)| s.as_str());
    let mut out = Vec::with_capacity(next_len);
    for slot in slots {
        let sentence = match slot {
            Some(s) => s,
            None => kept.next().ok_or(HistoryError::MalformedDelta {
                reason: "kept sentences exhausted",
            })?,
        };
        out.push(sentence.to_string());
    }
    if kept.next().is_some() {
        return Err(HistoryError::MalformedDelta {
            reason: "kept sentences left over",
        });
    }
    Ok(out)
}
