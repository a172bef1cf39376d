//! Tutorial generation and student-judge feedback.
//!
//! Tutor backends produce a tutorial per sample; the judge backend rates
//! tutorials against a rubric (a 1-5 integer plus a remark) or compares two
//! tutorials pairwise. Prompts are rendered from user-editable templates;
//! the machine-readable answer format is appended by code so template edits
//! cannot break parsing.

pub mod template;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::backends::{Backend, BackendError, ChatRequest};
use crate::corpus::Sample;
use crate::digest::sha256_hex;
use crate::seeded::{substream_seed, SplitMix64};

pub use template::TemplateError;

/// Appended to every rating prompt.
const RATING_FORMAT_INSTRUCTION: &str = "\n\nAnswer with a single JSON object exactly of the form {\"rating\": <integer 1-5>, \"remark\": \"<one or two short sentences>\"}.";

/// Appended to every pairwise-comparison prompt.
const WINNER_FORMAT_INSTRUCTION: &str =
    "\n\nAnswer with a single JSON object exactly of the form {\"winner\": \"first\"} or {\"winner\": \"second\"}.";

/// Appended once when the first answer cannot be parsed.
const FORMAT_REMINDER: &str =
    "\n\nReminder: reply with only the single JSON object in the exact format requested, nothing else.";

#[derive(Debug, thiserror::Error)]
pub enum OrchestrationError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend {backend_id} failed for sample {sample_id}: {source}")]
    Backend {
        backend_id: String,
        sample_id: String,
        #[source]
        source: BackendError,
    },
    #[error("empty tutorial from {tutor_id} for sample {sample_id}")]
    EmptyTutorial { tutor_id: String, sample_id: String },
    #[error("no rating recoverable from judge output: {raw:?}")]
    NoRating { raw: String },
    #[error("rating {0} outside 1..=5")]
    RatingOutOfRange(i64),
    #[error("judge output for sample {sample_id} unparseable after retry: {raw:?}")]
    UnparseableAfterRetry { sample_id: String, raw: String },
    #[error("rubric needs at least one dimension")]
    EmptyRubric,
    #[error("duplicate rubric dimension {0:?}")]
    DuplicateDimension(String),
    #[error("tutorials must come from different tutors, both got {0:?}")]
    SameTutor(String),
    #[error("tutorial for sample {found:?} does not belong to sample {expected:?}")]
    SampleMismatch { expected: String, found: String },
}

/// One tutor's explanation for one sample. `token_length` is the whitespace
/// token count, the same measure the policy tokenizer uses for |y|.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tutorial {
    pub sample_id: String,
    pub tutor_id: String,
    pub text: String,
    pub token_length: usize,
}

/// Judge verdict for one tutorial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeFeedback {
    pub sample_id: String,
    pub tutor_id: String,
    pub rating: u8,
    pub remark: String,
}

/// One rubric dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricDimension {
    pub name: String,
    pub description: String,
}

/// Scoring rubric handed to the judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricSpec {
    pub dimensions: Vec<RubricDimension>,
}

impl Default for RubricSpec {
    fn default() -> Self {
        let dim = |name: &str, description: &str| RubricDimension {
            name: name.to_string(),
            description: description.to_string(),
        };
        Self {
            dimensions: vec![
                dim(
                    "Conceptual Clarity",
                    "Explains the idea in accessible, age-appropriate language.",
                ),
                dim(
                    "Scaffolding",
                    "Orders the steps from basic to more advanced so each builds on the last.",
                ),
                dim(
                    "Appropriateness for K-12",
                    "Pitched at the right level: neither trivial nor beyond a school learner.",
                ),
                dim(
                    "Reasoning Encouragement",
                    "Prompts the student to think further instead of only stating the answer.",
                ),
            ],
        }
    }
}

impl RubricSpec {
    pub fn validate(&self) -> Result<(), OrchestrationError> {
        if self.dimensions.is_empty() {
            return Err(OrchestrationError::EmptyRubric);
        }
        let mut seen = std::collections::BTreeSet::new();
        for dim in &self.dimensions {
            if !seen.insert(dim.name.as_str()) {
                return Err(OrchestrationError::DuplicateDimension(dim.name.clone()));
            }
        }
        Ok(())
    }

    /// Bullet-list rendering used inside judge prompts.
    pub fn as_bullets(&self) -> String {
        self.dimensions
            .iter()
            .map(|d| format!("- {}: {}", d.name, d.description))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Stable hash over the canonical JSON, recorded in run headers.
    pub fn content_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("rubric serializes").as_bytes())
    }
}

/// Which presented tutorial won a pairwise comparison, mapped back to the
/// caller's A/B order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
}

/// Order the two tutorials were shown to the judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresentedOrder {
    #[serde(rename = "AB")]
    Ab,
    #[serde(rename = "BA")]
    Ba,
}

/// Pairwise decision with enough provenance to audit position bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDecision {
    pub sample_id: String,
    pub winner: Winner,
    pub presented_order: PresentedOrder,
    pub raw_judge_text: String,
}

/// Map the judge's first/second verdict through the presentation order.
/// Applying it twice with the same order is the identity.
pub fn map_presented_winner(first_won: bool, order: PresentedOrder) -> Winner {
    match (order, first_won) {
        (PresentedOrder::Ab, true) | (PresentedOrder::Ba, false) => Winner::A,
        (PresentedOrder::Ab, false) | (PresentedOrder::Ba, true) => Winner::B,
    }
}

fn choices_numbered(sample: &Sample) -> String {
    sample
        .choices
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{i}. {c}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn sample_values(sample: &Sample) -> BTreeMap<&'static str, String> {
    let mut values = BTreeMap::new();
    values.insert("question", sample.question.clone());
    values.insert("choices", choices_numbered(sample));
    values.insert("hint", sample.hint.clone().unwrap_or_default());
    values.insert("grade", sample.grade.to_string());
    values
}

/// Render the tutor prompt. Requires `{question}` and `{choices}`;
/// `{hint}` and `{grade}` are optional.
pub fn render_tutor_prompt(
    sample: &Sample,
    template: &str,
) -> Result<ChatRequest, OrchestrationError> {
    let values = sample_values(sample);
    let user_prompt = template::render(template, &["question", "choices"], &values)?;
    Ok(ChatRequest {
        system_prompt: String::new(),
        user_prompt,
        image_ref: sample.image_ref.as_ref().map(PathBuf::from),
    })
}

/// Generate one tutorial from a tutor backend.
pub fn generate_tutorial(
    tutor: &Backend,
    sample: &Sample,
    template: &str,
) -> Result<Tutorial, OrchestrationError> {
    let request = render_tutor_prompt(sample, template)?;
    let response = tutor
        .complete(&request)
        .map_err(|source| OrchestrationError::Backend {
            backend_id: tutor.id().to_string(),
            sample_id: sample.id.clone(),
            source,
        })?;
    let token_length = response.text.split_whitespace().count();
    if token_length == 0 {
        return Err(OrchestrationError::EmptyTutorial {
            tutor_id: tutor.id().to_string(),
            sample_id: sample.id.clone(),
        });
    }
    Ok(Tutorial {
        sample_id: sample.id.clone(),
        tutor_id: tutor.id().to_string(),
        text: response.text,
        token_length,
    })
}

/// Render the rating prompt. Requires `{question}`, `{tutorial}`, and
/// `{rubric}`; the JSON answer-format instruction is appended by code.
pub fn render_judge_prompt(
    sample: &Sample,
    tutorial: &Tutorial,
    rubric: &RubricSpec,
    template: &str,
) -> Result<ChatRequest, OrchestrationError> {
    rubric.validate()?;
    let mut values = sample_values(sample);
    values.insert("tutorial", tutorial.text.clone());
    values.insert("rubric", rubric.as_bullets());
    let mut user_prompt =
        template::render(template, &["question", "tutorial", "rubric"], &values)?;
    user_prompt.push_str(RATING_FORMAT_INSTRUCTION);
    Ok(ChatRequest {
        system_prompt: String::new(),
        user_prompt,
        image_ref: sample.image_ref.as_ref().map(PathBuf::from),
    })
}

/// Scan for top-level JSON objects in free text: brace matching that is
/// aware of strings and escapes, validated by serde on each candidate.
fn json_objects(raw: &str) -> impl Iterator<Item = serde_json::Map<String, serde_json::Value>> + '_ {
    let bytes = raw.as_bytes();
    let mut candidates = Vec::new();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if let Some(s) = start.take() {
                        candidates.push((s, i + 1));
                    }
                }
            }
            _ => {}
        }
    }
    candidates.into_iter().filter_map(move |(s, e)| {
        serde_json::from_str::<serde_json::Value>(&raw[s..e])
            .ok()
            .and_then(|v| match v {
                serde_json::Value::Object(map) => Some(map),
                _ => None,
            })
    })
}

/// Parse a judge rating answer.
///
/// Primary path: the first JSON object carrying an integer `rating` field
/// (string `remark` optional). Fallback, when no such object parses: the
/// first standalone integer 1-5 in the text, with the remainder of its line
/// as the remark. A recovered rating outside 1..=5 is an error, not a
/// fallback trigger.
pub fn parse_feedback(raw: &str) -> Result<(u8, String), OrchestrationError> {
    for obj in json_objects(raw) {
        if let Some(rating_value) = obj.get("rating") {
            let rating = rating_value
                .as_i64()
                .ok_or_else(|| OrchestrationError::NoRating {
                    raw: raw.to_string(),
                })?;
            if !(1..=5).contains(&rating) {
                return Err(OrchestrationError::RatingOutOfRange(rating));
            }
            let remark = obj
                .get("remark")
                .and_then(|r| r.as_str())
                .unwrap_or_default()
                .to_string();
            return Ok((rating as u8, remark));
        }
    }

    // Fallback: first standalone digit run whose value is 1..=5.
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let standalone = (start == 0 || !bytes[start - 1].is_ascii_alphanumeric())
                && (i >= bytes.len() || !bytes[i].is_ascii_alphanumeric());
            if standalone {
                if let Ok(value) = raw[start..i].parse::<u8>() {
                    if (1..=5).contains(&value) {
                        let line_end = raw[i..].find('\n').map(|p| i + p).unwrap_or(raw.len());
                        let remark = raw[i..line_end].trim().to_string();
                        return Ok((value, remark));
                    }
                }
            }
        } else {
            i += 1;
        }
    }
    Err(OrchestrationError::NoRating {
        raw: raw.to_string(),
    })
}

fn complete_with_context(
    backend: &Backend,
    request: &ChatRequest,
    sample_id: &str,
) -> Result<String, OrchestrationError> {
    backend
        .complete(request)
        .map(|r| r.text)
        .map_err(|source| OrchestrationError::Backend {
            backend_id: backend.id().to_string(),
            sample_id: sample_id.to_string(),
            source,
        })
}

/// Rate one tutorial: render, complete, parse; on parse failure retry once
/// with a format reminder appended, then fail.
pub fn judge_tutorial(
    judge: &Backend,
    sample: &Sample,
    tutorial: &Tutorial,
    rubric: &RubricSpec,
    template: &str,
) -> Result<JudgeFeedback, OrchestrationError> {
    if tutorial.sample_id != sample.id {
        return Err(OrchestrationError::SampleMismatch {
            expected: sample.id.clone(),
            found: tutorial.sample_id.clone(),
        });
    }
    let request = render_judge_prompt(sample, tutorial, rubric, template)?;
    let raw = complete_with_context(judge, &request, &sample.id)?;
    let parsed = match parse_feedback(&raw) {
        Ok(ok) => ok,
        Err(OrchestrationError::RatingOutOfRange(r)) => {
            return Err(OrchestrationError::RatingOutOfRange(r))
        }
        Err(_) => {
            let mut retry = request.clone();
            retry.user_prompt.push_str(FORMAT_REMINDER);
            let raw_retry = complete_with_context(judge, &retry, &sample.id)?;
            parse_feedback(&raw_retry).map_err(|_| {
                OrchestrationError::UnparseableAfterRetry {
                    sample_id: sample.id.clone(),
                    raw: raw_retry,
                }
            })?
        }
    };
    Ok(JudgeFeedback {
        sample_id: sample.id.clone(),
        tutor_id: tutorial.tutor_id.clone(),
        rating: parsed.0,
        remark: parsed.1,
    })
}

/// Render the pairwise comparison prompt. Requires `{question}`,
/// `{tutorial_1}`, and `{tutorial_2}`; tutorials are anonymized by position.
pub fn render_compare_prompt(
    sample: &Sample,
    first: &Tutorial,
    second: &Tutorial,
    rubric: &RubricSpec,
    template: &str,
) -> Result<ChatRequest, OrchestrationError> {
    rubric.validate()?;
    let mut values = sample_values(sample);
    values.insert("tutorial_1", first.text.clone());
    values.insert("tutorial_2", second.text.clone());
    values.insert("rubric", rubric.as_bullets());
    let mut user_prompt =
        template::render(template, &["question", "tutorial_1", "tutorial_2"], &values)?;
    user_prompt.push_str(WINNER_FORMAT_INSTRUCTION);
    Ok(ChatRequest {
        system_prompt: String::new(),
        user_prompt,
        image_ref: sample.image_ref.as_ref().map(PathBuf::from),
    })
}

fn parse_winner(raw: &str) -> Option<bool> {
    for obj in json_objects(raw) {
        if let Some(value) = obj.get("winner").and_then(|w| w.as_str()) {
            match value.trim().to_ascii_lowercase().as_str() {
                "first" => return Some(true),
                "second" => return Some(false),
                _ => {}
            }
        }
    }
    None
}

/// Compare two tutorials for the same sample.
///
/// The presentation order is a seeded per-sample coin flip to spread
/// position bias; the judge's first/second answer is mapped back through
/// that order and recorded alongside the raw text.
pub fn compare_tutorials(
    judge: &Backend,
    sample: &Sample,
    tut_a: &Tutorial,
    tut_b: &Tutorial,
    rubric: &RubricSpec,
    template: &str,
    seed: u64,
) -> Result<PairDecision, OrchestrationError> {
    if tut_a.tutor_id == tut_b.tutor_id {
        return Err(OrchestrationError::SameTutor(tut_a.tutor_id.clone()));
    }
    for tut in [tut_a, tut_b] {
        if tut.sample_id != sample.id {
            return Err(OrchestrationError::SampleMismatch {
                expected: sample.id.clone(),
                found: tut.sample_id.clone(),
            });
        }
    }

    let mut rng = SplitMix64::new(substream_seed(seed, &sample.id));
    let order = if rng.next_bool() {
        PresentedOrder::Ab
    } else {
        PresentedOrder::Ba
    };
    let (first, second) = match order {
        PresentedOrder::Ab => (tut_a, tut_b),
        PresentedOrder::Ba => (tut_b, tut_a),
    };

    let request = render_compare_prompt(sample, first, second, rubric, template)?;
    let raw = complete_with_context(judge, &request, &sample.id)?;
    let (first_won, raw_final) = match parse_winner(&raw) {
        Some(first_won) => (first_won, raw),
        None => {
            let mut retry = request.clone();
            retry.user_prompt.push_str(FORMAT_REMINDER);
            let raw_retry = complete_with_context(judge, &retry, &sample.id)?;
            match parse_winner(&raw_retry) {
                Some(first_won) => (first_won, raw_retry),
                None => {
                    return Err(OrchestrationError::UnparseableAfterRetry {
                        sample_id: sample.id.clone(),
                        raw: raw_retry,
                    })
                }
            }
        }
    };

    Ok(PairDecision {
        sample_id: sample.id.clone(),
        winner: map_presented_winner(first_won, order),
        presented_order: order,
        raw_judge_text: raw_final,
    })
}
