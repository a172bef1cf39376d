//! Run record files: JSONL with a provenance header line followed by
//! JudgeFeedback or Tutorial objects. Headers carry everything needed to
//! reproduce a run: backend ids, rubric and template hashes, seed, and the
//! corpus hash. Run ids are derived from those fields, never from clocks,
//! so identical runs produce identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::digest::FieldHasher;
use crate::orchestration::{JudgeFeedback, Tutorial};

pub const RUN_FORMAT: &str = "tutor-align-run/1";

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("cannot access {path}: {source}")]
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
    #[error("{path}: bad record format {found:?}, expected {RUN_FORMAT:?}")]
    BadFormat { path: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format: String,
    pub run_id: String,
    pub tutor_ids: Vec<String>,
    pub judge_id: String,
    pub rubric_hash: String,
    pub template_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub corpus_hash: String,
}

impl RunHeader {
    pub fn new(
        tutor_ids: Vec<String>,
        judge_id: String,
        rubric_hash: String,
        template_hashes: BTreeMap<String, String>,
        seed: u64,
        corpus_hash: String,
    ) -> Self {
        let mut h = FieldHasher::new("tutor-align-run-id/1");
        for id in &tutor_ids {
            h.text(id);
        }
        h.text(&judge_id).text(&rubric_hash).u64(seed).text(&corpus_hash);
        for (name, hash) in &template_hashes {
            h.text(name).text(hash);
        }
        let run_id = format!("run-{}", &h.finish_hex()[..16]);
        Self {
            format: RUN_FORMAT.to_string(),
            run_id,
            tutor_ids,
            judge_id,
            rubric_hash,
            template_hashes,
            seed,
            corpus_hash,
        }
    }
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    header: &RunHeader,
    lines: &[T],
) -> Result<(), RecordError> {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(header).expect("header serializes"));
    out.push('\n');
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| RecordError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(RunHeader, Vec<T>), RecordError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| RecordError::Io {
        path: display.clone(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| RecordError::Parse {
        path: display.clone(),
        line: 1,
        message: "empty file, missing header".into(),
    })?;
    let header: RunHeader =
        serde_json::from_str(header_line).map_err(|e| RecordError::Parse {
            path: display.clone(),
            line: 1,
            message: e.to_string(),
        })?;
    if header.format != RUN_FORMAT {
        return Err(RecordError::BadFormat {
            path: display,
            found: header.format,
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line).map_err(|e| RecordError::Parse {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((header, records))
}

pub fn write_feedback_record(
    path: &Path,
    header: &RunHeader,
    feedback: &[JudgeFeedback],
) -> Result<(), RecordError> {
    write_jsonl(path, header, feedback)
}

pub fn read_feedback_record(path: &Path) -> Result<(RunHeader, Vec<JudgeFeedback>), RecordError> {
    read_jsonl(path)
}

pub fn write_tutorial_record(
    path: &Path,
    header: &RunHeader,
    tutorials: &[Tutorial],
) -> Result<(), RecordError> {
    write_jsonl(path, header, tutorials)
}

pub fn read_tutorial_record(path: &Path) -> Result<(RunHeader, Vec<Tutorial>), RecordError> {
    read_jsonl(path)
}
