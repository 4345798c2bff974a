//! Shared harness for the movie-recommendation fixture: a scripted transport
//! that answers every request the pipeline can issue for that fixture, plus
//! the hand-derived expectations the integration suites assert against.
//!
//! The scripted judge is a set of pure rules over the question and response
//! texts, so recorded verdicts are reproducible from the example files alone.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use spade::gateway::{Gateway, LlmRequest, Mode, RequestKind, Transport};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/movie")
}

pub fn history_path() -> PathBuf {
    fixture_dir().join("history.json")
}

pub fn examples_path() -> PathBuf {
    fixture_dir().join("examples.json")
}

pub fn cache_dir() -> PathBuf {
    fixture_dir().join("cache")
}

/// Gateway that replays the committed fixture cache and panics if anything
/// ever reaches the wire — the zero-network guarantee for replay tests.
pub fn replay_gateway() -> Gateway {
    Gateway::new(Mode::Replay, cache_dir(), Box::new(PanicTransport))
}

/// Gateway that records scripted replies into `dir` (used to regenerate the
/// committed cache and to check the committed cache is in sync).
pub fn recording_gateway(dir: impl Into<PathBuf>) -> Gateway {
    Gateway::new(Mode::Record, dir, Box::new(ScriptedTransport))
        .with_api_key("scripted")
}

/// A transport that must never be reached.
pub struct PanicTransport;

impl Transport for PanicTransport {
    fn send(&self, _: &str, _: &str, _: &str, request: &LlmRequest) -> Result<String, String> {
        panic!(
            "network transport reached in replay mode for a {} request",
            request.request_kind.as_str()
        );
    }
}

/// Counts how many times an inner transport is actually used.
pub struct CountingTransport<T> {
    inner: T,
    calls: Arc<AtomicUsize>,
}

impl<T> CountingTransport<T> {
    pub fn new(inner: T) -> (Self, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        (
            CountingTransport {
                inner,
                calls: Arc::clone(&calls),
            },
            calls,
        )
    }
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn send(
        &self,
        endpoint: &str,
        api_key: &str,
        model: &str,
        request: &LlmRequest,
    ) -> Result<String, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.send(endpoint, api_key, model, request)
    }
}

/// Scripted stand-in for the provider: deterministic replies for every
/// request the movie fixture generates.
pub struct ScriptedTransport;

impl Transport for ScriptedTransport {
    fn send(&self, _: &str, _: &str, _: &str, request: &LlmRequest) -> Result<String, String> {
        match request.request_kind {
            RequestKind::Categorize => categorize_reply(&request.user_text),
            RequestKind::Synthesize => synthesize_reply(&request.user_text),
            RequestKind::SubsumeList => Ok(SUBSUME_LISTING.to_string()),
            RequestKind::SubsumeFormat => Ok(SUBSUME_PAIRS.to_string()),
            RequestKind::AskBoolean => judge_reply(&request.user_text),
        }
    }
}

/// One canned reply per prompt delta, keyed on the tagged lines embedded in
/// the request. The order matters only for the two "concise" deltas: the
/// reworded version is recognized by its new clause before the original.
fn categorize_reply(user_text: &str) -> Result<String, String> {
    let scripts: [(&str, &str); 7] = [
        ("not exceeding 100 words", CAT_V4),
        ("+ Ensure the recommendation note is concise.", CAT_V3),
        ("+ Include elements from the movie's genre", CAT_V2),
        ("+ Mention the movie's genre and any shared cast members", CAT_V5),
        ("+ Mention any awards or critical acclaim", CAT_V6),
        ("+ Do not mention anything related to the user's race", CAT_V7),
        ("+ Given the following information about the user", CAT_V1),
    ];
    for (marker, reply) in scripts {
        if user_text.contains(marker) {
            return Ok(reply.to_string());
        }
    }
    Err("no scripted categorization for this delta".to_string())
}

/// One canned reply per synthesis request, keyed on the concept list the
/// request embeds. The awards delta is scripted to fail parsing once: the
/// first reply is prose, and only the amended retry gets the JSON.
fn synthesize_reply(user_text: &str) -> Result<String, String> {
    if user_text.contains("\"concept\": \"mentions awards\"") {
        return if user_text.contains("could not be parsed") {
            Ok(SYN_V6_RETRY.to_string())
        } else {
            Ok(SYN_V6_PROSE.to_string())
        };
    }
    let scripts: [(&str, &str); 6] = [
        ("\"concept\": \"personalized to the user\"", SYN_V1),
        ("\"concept\": \"mentions genre cast themes\"", SYN_V2),
        ("\"concept\": \"concise note\"", SYN_V3),
        ("\"concept\": \"under 100 words\"", SYN_V4),
        ("\"concept\": \"accurate shared cast\"", SYN_V5),
        ("\"concept\": \"avoids sensitive attributes\"", SYN_V7),
    ];
    for (marker, reply) in scripts {
        if user_text.contains(marker) {
            return Ok(reply.to_string());
        }
    }
    Err("no scripted synthesis for this concept list".to_string())
}

/// Extracts the response and question out of a judge request and answers
/// from the pure rules below.
fn judge_reply(user_text: &str) -> Result<String, String> {
    const RESPONSE_MARK: &str = "Response from the pipeline:\n\n";
    const QUESTION_MARK: &str = "\n\nQuestion: ";
    const ANSWER_MARK: &str = "\n\nAnswer exactly";
    let response_at = user_text
        .find(RESPONSE_MARK)
        .ok_or("judge request lacks the response block")?
        + RESPONSE_MARK.len();
    let question_at = user_text[response_at..]
        .find(QUESTION_MARK)
        .ok_or("judge request lacks the question block")?
        + response_at;
    let response = &user_text[response_at..question_at];
    let question_start = question_at + QUESTION_MARK.len();
    let question_end = user_text[question_start..]
        .find(ANSWER_MARK)
        .ok_or("judge request lacks the answer instruction")?
        + question_start;
    let question = &user_text[question_start..question_end];
    Ok(if judge_verdict(question, response) {
        "Yes.".to_string()
    } else {
        "No.".to_string()
    })
}

/// The scripted judge: pure, documented rules so every recorded verdict can
/// be re-derived by hand from the example texts.
///
/// - concise          → at most 100 whitespace-delimited words
/// - personalized     → the response addresses the reader ("you")
/// - cast members     → accurate unless the response admits "made-up" facts
/// - genre            → the genre word "thriller" appears
/// - award            → "award" or "acclaim" appears
pub fn judge_verdict(question: &str, response: &str) -> bool {
    let q = question.to_lowercase();
    let r = response.to_lowercase();
    if q.contains("concise") {
        response.split_whitespace().count() <= 100
    } else if q.contains("personalized") {
        r.contains("you")
    } else if q.contains("cast members") {
        !r.contains("made-up")
    } else if q.contains("genre") {
        r.contains("thriller")
    } else if q.contains("award") {
        r.contains("award") || r.contains("acclaim")
    } else {
        panic!("no scripted judge rule for question {question:?}");
    }
}

// --- Scripted generation replies ------------------------------------------

const CAT_V1: &str = r#"Reading the added instruction, one checkable requirement stands out.

```json
[
  {
    "concept": "personalized to the user",
    "category": "Qualitative Assessment",
    "source": "write a personalized recommendation note"
  }
]
```"#;

const CAT_V2: &str = r#"The new line asks for specific movie elements to appear.

```json
[
  {
    "concept": "mentions genre cast themes",
    "category": "Inclusion",
    "source": "Include elements from the movie's genre, cast, and themes"
  }
]
```"#;

const CAT_V3: &str = r#"This change is about response length and style.

```json
[
  {
    "concept": "concise note",
    "category": "Qualitative Criteria",
    "source": "Ensure the recommendation note is concise."
  }
]
```"#;

const CAT_V4: &str = r#"The rewording pins the length requirement to a number.

```json
[
  {
    "concept": "under 100 words",
    "category": "quantity instruction",
    "source": "not exceeding 100 words"
  }
]
```"#;

const CAT_V5: &str = r#"The replacement line asks for two distinct inclusions.

```json
[
  {
    "concept": "mentions the movie genre",
    "category": "Inclusion",
    "source": "Mention the movie's genre"
  },
  {
    "concept": "accurate shared cast",
    "category": "Inclusion",
    "source": "any shared cast members between the {movie_name} and other movies the user has watched."
  }
]
```"#;

const CAT_V6: &str = r#"The added line asks for recognition to be cited.

```json
[
  {
    "concept": "mentions awards",
    "category": "Inclusion",
    "source": "Mention any awards or critical acclaim received by {movie_name}."
  }
]
```"#;

const CAT_V7: &str = r#"The added line is a prohibition.

```json
[
  {
    "concept": "avoids sensitive attributes",
    "category": "Exclusion",
    "source": "Do not mention anything related to the user's race, ethnicity, or any other sensitive attributes."
  }
]
```"#;

const SYN_V1: &str = r#"Personalization needs a judge.

```json
[
  {
    "concept_index": 0,
    "spec": {
      "kind": "llm_question",
      "questions": ["Is the response personalized and relevant to the user's information?"]
    }
  }
]
```"#;

const SYN_V2: &str = r#"The genre is an input field, so a substring check suffices.

```json
[
  {
    "concept_index": 0,
    "spec": {
      "kind": "contains_all",
      "items": [{"field": "movie_genre", "case_insensitive": true}]
    }
  }
]
```"#;

const SYN_V3: &str = r#"Conciseness is ambiguous, so here are three different checks for it.

```json
[
  {"concept_index": 0, "spec": {"kind": "word_count", "max": 150}},
  {"concept_index": 0, "spec": {"kind": "sentence_count", "max": 8}},
  {"concept_index": 0, "spec": {"kind": "llm_question", "questions": ["Is the response concise?"]}}
]
```"#;

const SYN_V4: &str = r#"The bound is explicit now.

```json
[
  {"concept_index": 0, "spec": {"kind": "word_count", "max": 100}}
]
```"#;

const SYN_V5: &str = r#"The genre check is mechanical; cast accuracy needs a judge.

```json
[
  {
    "concept_index": 0,
    "spec": {
      "kind": "contains_all",
      "items": [{"field": "movie_genre", "case_insensitive": true}]
    }
  },
  {
    "concept_index": 1,
    "spec": {
      "kind": "llm_question",
      "questions": [
        "Does the response mention the movie's genre?",
        "Are all shared cast members mentioned in the response accurate?"
      ]
    }
  }
]
```"#;

/// First reply for the awards delta: deliberately unparseable, to exercise
/// the reformat retry (and to put both entries in the recorded cache).
const SYN_V6_PROSE: &str = "I would check that the response cites at least one award \
or some form of critical acclaim. An expert reviewer could confirm this in one pass.";

const SYN_V6_RETRY: &str = r#"```json
[
  {
    "concept_index": 0,
    "spec": {
      "kind": "llm_question",
      "questions": ["Does the response mention any awards or critical acclaim received by the movie?"]
    }
  }
]
```"#;

/// The second entry's concept_index is out of range, so it must be skipped
/// with a note while the first entry still becomes a candidate.
const SYN_V7: &str = r#"A prohibition maps to an exclusion list.

```json
[
  {
    "concept_index": 0,
    "spec": {
      "kind": "excludes_all",
      "items": [
        {"literal": "race", "case_insensitive": true},
        {"literal": "ethnicity", "case_insensitive": true}
      ]
    }
  },
  {
    "concept_index": 3,
    "spec": {"kind": "word_count", "max": 10}
  }
]
```"#;

// --- Scripted subsumption replies ------------------------------------------

/// Free-text implication listing. It names one pair that the examples will
/// refute, one candidate that was withheld for its false-failure rate, and
/// one function that does not exist — all cases the assembler must handle.
const SUBSUME_LISTING: &str = "I compared every pair of assertion functions. \
The implications I can defend:\n\n\
1. a3_2_concise-note implies a4_0_under-100-words: a note judged concise fits the word budget.\n\
2. a1_0_personalized-to-the-user implies a6_0_mentions-awards: a well-tailored note will cite \
the film's accolades.\n\
3. a2_0_mentions-genre-cast-them checks the same thing as itself, trivially.\n\
4. assert_tone implies a6_0_mentions-awards.\n\
5. a3_1_concise-note implies a3_0_concise-note: the sentence cap keeps the text inside the \
word cap.\n\
6. a4_0_under-100-words implies a3_0_concise-note: one hundred words is within one hundred \
and fifty.\n\n\
No other implications hold in either direction.";

const SUBSUME_PAIRS: &str = r#"```json
[
  ["a3_2_concise-note", "a4_0_under-100-words"],
  ["a1_0_personalized-to-the-user", "a6_0_mentions-awards"],
  ["a2_0_mentions-genre-cast-them", "a2_0_mentions-genre-cast-them"],
  ["assert_tone", "a6_0_mentions-awards"],
  ["a3_1_concise-note", "a3_0_concise-note"],
  ["a4_0_under-100-words", "a3_0_concise-note"]
]
```"#;

// --- Hand-derived expectations ---------------------------------------------

/// The ten candidate ids, in generation order (delta version, then the
/// ordinal over that delta's specs).
pub const EXPECTED_IDS: [&str; 10] = [
    "a1_0_personalized-to-the-user",
    "a2_0_mentions-genre-cast-them",
    "a3_0_concise-note",
    "a3_1_concise-note",
    "a3_2_concise-note",
    "a4_0_under-100-words",
    "a5_0_mentions-the-movie-genre",
    "a5_1_accurate-shared-cast",
    "a6_0_mentions-awards",
    "a7_0_avoids-sensitive-attribu",
];

/// The full result matrix, derived by hand from the example texts and the
/// scripted judge rules (rows ex1..ex5, columns in `EXPECTED_IDS` order).
pub const EXPECTED_CELLS: [[u8; 10]; 5] = [
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1], // ex1: clean on every check
    [1, 0, 1, 1, 0, 0, 0, 0, 0, 1], // ex2: 139 words, no genre, no awards
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 0], // ex3: mentions ethnicity
    [1, 1, 1, 0, 1, 1, 1, 1, 1, 1], // ex4: ten sentences
    [0, 1, 1, 1, 1, 1, 1, 1, 1, 1], // ex5: never addresses the reader
];

pub fn expected_ids() -> Vec<String> {
    EXPECTED_IDS.iter().map(|s| s.to_string()).collect()
}

pub fn expected_cells() -> Vec<Vec<u8>> {
    EXPECTED_CELLS.iter().map(|row| row.to_vec()).collect()
}

/// Number of entries the recorded cache must contain: one per categorize
/// call (7), one per synthesize call (8: the awards delta is asked twice),
/// the two subsumption calls, and one per judge question actually asked (24:
/// four llm_question candidates over five examples, minus the one example
/// where a two-question spec short-circuits after its first "no").
pub const EXPECTED_CACHE_ENTRIES: usize = 7 + 8 + 2 + 24;
