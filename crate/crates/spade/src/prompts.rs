//! Builders for every LLM request the pipeline issues. The texts follow the
//! prompts the system was designed around; the synthesis instruction is
//! adapted to request structured assertion specs (our DSL) instead of Python
//! functions, so generated assertions stay executable without a sandbox.

use crate::gateway::{LlmRequest, RequestKind};

/// Default sampling temperature for the two generation calls; judgment and
/// formatting calls are always temperature 0.
pub const DEFAULT_GENERATION_TEMPERATURE: f64 = 0.7;

/// Appended to a generation request after an unparseable reply; the changed
/// text yields a fresh cache key, so the retry is a genuinely new sample.
pub const REFORMAT_RETRY_SUFFIX: &str = "\n\nYour previous answer could not be parsed. \
     Respond ONLY with the JSON described above, inside ```json ``` markers, with no prose \
     before or after it.";

/// Categorization request: sends the tagged delta lines and asks for concept
/// objects with concept/category/source fields.
pub fn categorize_request(tagged_delta_lines: &str, temperature: f64) -> LlmRequest {
    let user_text = format!(
        r#"Here are the changed lines in my prompt template:

"{tagged_delta_lines}"

I want to write assertions for my LLM pipeline to run on all pipeline responses. Here are some categories of assertion concepts I want to check for:

- Presentation Format: Is there a specific format for the response, like a comma-separated list or a JSON object?
- Example Demonstration: Does the prompt template include any examples of good responses that demonstrate any specific headers, keys, or structures?
- Workflow Description: Does the prompt template include any descriptions of the workflow that the LLM should follow, indicating possible assertion concepts?
- Count: Are there any instructions regarding the number of items of a certain type in the response, such as "at least", "at most", or an exact number?
- Inclusion: Are there keywords that every LLM response should include?
- Exclusion: Are there keywords that every LLM response should never mention?
- Qualitative Assessment: Are there qualitative criteria for assessing good responses, including specific requirements for length, tone, or style?
- Other: Based on the prompt template, are there any other concepts to check in assertions that are not covered by the above categories?

Give me a list of concepts to check for in LLM responses. Each item in the list should contain a string description of a concept to check for, its corresponding category, and the source, or phrase in the prompt template that triggered the concept. For example, if the prompt template is "I am a still-life artist. Give me a bulleted list of colors that I can use to paint <object>.", then a concept might be "The response should include a bulleted list of colors." with category "Presentation Format" and source "Give me a bulleted list of colors".

Your answer should be a JSON list of objects within ```json ``` markers, where each object has the following fields: "concept", "category", and "source". This list should contain as many assertion concepts as you can think of, as long are specific and reasonable."#
    );
    LlmRequest {
        system_text: String::new(),
        user_text,
        temperature,
        request_kind: RequestKind::Categorize,
    }
}

/// Reference card for the assertion DSL, embedded in the synthesis request
/// so the model emits specs the engine can execute directly.
const DSL_REFERENCE: &str = r#"An assertion spec is a JSON object with a "kind" field. Operand items are objects holding either {"literal": "<text>"} or {"field": "<input field name>"} (resolved from the example dict), plus optional "case_insensitive": true for case-folded comparison. The kinds are:

- {"kind": "contains_all", "items": [<operand>, ...]} — every item is a substring of the response.
- {"kind": "contains_any", "items": [...]} — at least one item is a substring.
- {"kind": "excludes_all", "items": [...]} — no item appears in the response.
- {"kind": "starts_with", "prefix": <operand>} — the response begins with the prefix (leading whitespace ignored).
- {"kind": "regex_match", "pattern": "<regular expression>"} — the pattern matches somewhere in the response.
- {"kind": "word_count", "min": <int>, "max": <int>} — whitespace-token count within bounds (either bound may be omitted).
- {"kind": "sentence_count", "min": <int>, "max": <int>} — sentence count within bounds.
- {"kind": "json_parseable", "shape": "any"|"object"|"list"} — the response parses as JSON of that shape.
- {"kind": "json_list_min_len", "min_len": <int>} — the response parses as a JSON list with at least that many elements.
- {"kind": "json_required_keys", "keys": ["<key>", ...]} — the response parses as a JSON object containing all keys.
- {"kind": "llm_question", "questions": ["<yes/no question>", ...]} — an expert LLM answers every question with yes (use for concepts too hard to check mechanically; at most 2 questions per spec).
- {"kind": "all_of", "children": [<spec>, ...]} / {"kind": "any_of", "children": [...]} — boolean combinations."#;

/// Synthesis request: the final prompt template, one sample example with its
/// response, and the concept list; asks for executable specs as DSL JSON.
pub fn synthesize_request(
    prompt_template: &str,
    sample_example: &str,
    sample_response: &str,
    concepts_json: &str,
    temperature: f64,
) -> LlmRequest {
    let user_text = format!(
        r#"Here is my prompt template:

"{prompt_template}"

Here is an example and its corresponding LLM response:

Example: {sample_example}
LLM Response: {sample_response}

Here are the concepts I want to check for in LLM responses:

{concepts_json}

Give me a list of assertions that can be used to check for these concepts in LLM responses. Each assertion is a structured spec in the JSON dialect below, not code.

{DSL_REFERENCE}

Assertions can use the "llm_question" kind if the concept is too hard to evaluate mechanically (e.g., qualitative criteria); the questions are submitted with the formatted prompt and response to an expert LLM, which answers yes or no based on the context. Since those calls can be expensive, you can batch similar concepts that require LLMs to evaluate into a single llm_question spec, but do not cover more than two concepts with one spec. For concepts that are ambiguous to evaluate, you should write multiple different assertion specs (e.g., different llm_question phrasings) for the same concept(s).

Your answer should be a JSON list within ```json ``` markers, where each element is an object with fields "concept_index" (the 0-based index of the concept the assertion checks, from the list above) and "spec" (the assertion spec object). Example element:

```json
[{{"concept_index": 0, "spec": {{"kind": "llm_question", "questions": ["Does the summary form a simple, coherent narrative telling a complete story?"]}}}}]
```"#
    );
    LlmRequest {
        system_text: String::new(),
        user_text,
        temperature,
        request_kind: RequestKind::Synthesize,
    }
}

/// First subsumption call: every candidate rendered as a readable rule,
/// asking which ones imply which.
pub fn subsume_list_request(assertion_blob: &str) -> LlmRequest {
    let user_text = format!(
        "Here are all the functions I have:\n\n{assertion_blob}\n\nBased on the code, \
         please identify every pair of functions where one function implies the other. Note \
         that function A might imply function B, but function B may not imply function A. If \
         two functions A and B check for the same thing, then they both imply each other \
         (i.e., A implies B and B implies A), so you should list both directions. Feel free \
         to use the function names to decide if two functions check for the same thing."
    );
    LlmRequest {
        system_text: String::new(),
        user_text,
        temperature: 0.0,
        request_kind: RequestKind::SubsumeList,
    }
}

/// Second subsumption call: formats the first call's free-text answer as a
/// parseable JSON pair list. Stateless, so the previous answer is embedded.
pub fn subsume_format_request(listing_reply: &str) -> LlmRequest {
    let user_text = format!(
        "Earlier you identified pairs of implied functions among my assertion functions. \
         Here is what you said:\n\n{listing_reply}\n\nPlease return your answer as a JSON \
         list within ```json ``` ticks, where each element of the list is a tuple (A, B) \
         written as a two-element JSON array of function names. If two functions A and B \
         check for the same thing, make sure to include both tuples (A, B) and (B, A). For \
         example, if I only had two functions `check_json` and `assert_json`, the answer \
         should be: ```json\n[[\"check_json\", \"assert_json\"], [\"assert_json\", \
         \"check_json\"]]\n```"
    );
    LlmRequest {
        system_text: String::new(),
        user_text,
        temperature: 0.0,
        request_kind: RequestKind::SubsumeFormat,
    }
}
