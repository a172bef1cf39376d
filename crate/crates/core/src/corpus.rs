//! Question corpora: loading, validation, filtering, and seeded subsetting.
//!
//! Corpus files are UTF-8 JSONL. Line 1 is a header
//! `{"format":"tutor-align-corpus/1","split":"train"}`; every following line
//! is one [`Sample`]. Optional fields are omitted when absent, never null.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::seeded::{shuffle, SplitMix64};

pub const CORPUS_FORMAT: &str = "tutor-align-corpus/1";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:1: bad header format {found:?}, expected {CORPUS_FORMAT:?}")]
    BadFormat { path: String, found: String },
    #[error("split mismatch in {path}: file declares {found}, expected {expected}")]
    SplitMismatch {
        path: String,
        expected: Split,
        found: Split,
    },
    #[error("invalid sample {id:?}: {reason}")]
    InvalidSample { id: String, reason: String },
    #[error("duplicate sample id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("subset fraction {0} out of range (0, 1]")]
    FractionOutOfRange(f64),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Question subject category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subject {
    #[serde(rename = "NAT")]
    Nat,
    #[serde(rename = "SOC")]
    Soc,
    #[serde(rename = "LAN")]
    Lan,
}

/// One multiple-choice science question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    /// Opaque handle to the question image; this module never decodes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub question: String,
    pub choices: Vec<String>,
    pub gold_answer: usize,
    pub subject: Subject,
    pub grade: u8,
    pub has_text_context: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl Sample {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: String| CorpusError::InvalidSample {
            id: self.id.clone(),
            reason,
        };
        if self.choices.is_empty() {
            return Err(fail("choices must be nonempty".into()));
        }
        if self.gold_answer >= self.choices.len() {
            return Err(fail(format!(
                "gold_answer {} out of range for {} choices",
                self.gold_answer,
                self.choices.len()
            )));
        }
        if !(1..=12).contains(&self.grade) {
            return Err(fail(format!("grade {} outside 1..=12", self.grade)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub split: Split,
    pub samples: Vec<Sample>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    split: Split,
}

impl Corpus {
    pub fn new(split: Split, samples: Vec<Sample>) -> Result<Self, CorpusError> {
        let corpus = Self { split, samples };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = BTreeSet::new();
        for (i, sample) in self.samples.iter().enumerate() {
            sample.validate()?;
            if !seen.insert(sample.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: sample.id.clone(),
                    line: i + 2,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Canonical on-disk serialization: header line then one sample per line.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        let header = Header {
            format: CORPUS_FORMAT.to_string(),
            split: self.split,
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for sample in &self.samples {
            out.push_str(&serde_json::to_string(sample).expect("sample serializes"));
            out.push('\n');
        }
        out.into_bytes()
    }

    /// SHA-256 of the canonical serialization, used as provenance in
    /// downstream files.
    pub fn content_hash(&self) -> String {
        sha256_hex(&self.canonical_bytes())
    }
}

/// Load and validate a corpus file, checking the declared split.
pub fn load_corpus(path: &Path, expected_split: Split) -> Result<Corpus, CorpusError> {
    let display = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: display.clone(),
        source,
    })?;
    parse_corpus(&content, &display, expected_split)
}

fn parse_corpus(content: &str, path: &str, expected_split: Split) -> Result<Corpus, CorpusError> {
    let mut lines = content.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| CorpusError::Parse {
        path: path.to_string(),
        line: 1,
        message: "empty file, missing header".into(),
    })?;
    let header: Header =
        serde_json::from_str(header_line).map_err(|e| CorpusError::Parse {
            path: path.to_string(),
            line: 1,
            message: e.to_string(),
        })?;
    if header.format != CORPUS_FORMAT {
        return Err(CorpusError::BadFormat {
            path: path.to_string(),
            found: header.format,
        });
    }
    if header.split != expected_split {
        return Err(CorpusError::SplitMismatch {
            path: path.to_string(),
            expected: expected_split,
            found: header.split,
        });
    }

    let mut samples = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            path: path.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        sample.validate()?;
        if !seen.insert(sample.id.clone()) {
            return Err(CorpusError::DuplicateId {
                id: sample.id,
                line: line_no,
            });
        }
        samples.push(sample);
    }
    Ok(Corpus {
        split: header.split,
        samples,
    })
}

/// Write a corpus in canonical form.
pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    fs::write(path, corpus.canonical_bytes()).map_err(|source| CorpusError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Keep exactly the samples that carry an image reference, preserving order.
pub fn filter_multimodal(corpus: &Corpus) -> Corpus {
    Corpus {
        split: corpus.split,
        samples: corpus
            .samples
            .iter()
            .filter(|s| s.image_ref.is_some())
            .cloned()
            .collect(),
    }
}

/// Deterministic subset of `⌊fraction·n⌋` samples.
///
/// Selection rule: sort ids lexicographically, Fisher-Yates shuffle with
/// SplitMix64(seed), take the prefix as the selected id set, then return the
/// selected samples in their original corpus order. `fraction = 1.0` is the
/// identity.
pub fn subset(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::FractionOutOfRange(fraction));
    }
    let n = corpus.samples.len();
    let k = ((fraction * n as f64).floor() as usize).min(n);

    let mut ids: Vec<&str> = corpus.samples.iter().map(|s| s.id.as_str()).collect();
    ids.sort_unstable();
    let mut rng = SplitMix64::new(seed);
    shuffle(&mut ids, &mut rng);
    let selected: BTreeSet<&str> = ids.into_iter().take(k).collect();

    Ok(Corpus {
        split: corpus.split,
        samples: corpus
            .samples
            .iter()
            .filter(|s| selected.contains(s.id.as_str()))
            .cloned()
            .collect(),
    })
}
