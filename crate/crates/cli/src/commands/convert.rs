//! `convert`: one-shot converter from the upstream ScienceQA
//! `problems.json` layout into the corpus JSONL format.
//!
//! Mapping notes:
//! - subjects "natural science" / "social science" / "language science"
//!   become NAT / SOC / LAN;
//! - `grade` strings "grade1".."grade12" become integers;
//! - `has_text_context` is set when the upstream hint is nonempty;
//! - image references become `{image_root}/{id}/{image}`;
//! - the upstream "val" split is ignored (only train and test are emitted).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use tutor_align_core::corpus::{save_corpus, Corpus, Sample, Split, Subject};

use super::ensure_dir;
use crate::{ConvertArgs, Globals};

#[derive(Deserialize)]
struct UpstreamProblem {
    question: String,
    choices: Vec<String>,
    answer: usize,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    hint: String,
    grade: String,
    subject: String,
    split: String,
}

fn map_subject(raw: &str, id: &str) -> Result<Subject> {
    match raw {
        "natural science" => Ok(Subject::Nat),
        "social science" => Ok(Subject::Soc),
        "language science" => Ok(Subject::Lan),
        other => bail!("problem {id}: unknown subject {other:?}"),
    }
}

fn map_grade(raw: &str, id: &str) -> Result<u8> {
    let digits = raw
        .strip_prefix("grade")
        .with_context(|| format!("problem {id}: grade {raw:?} does not start with 'grade'"))?;
    let grade: u8 = digits
        .parse()
        .with_context(|| format!("problem {id}: grade {raw:?} is not numeric"))?;
    if !(1..=12).contains(&grade) {
        bail!("problem {id}: grade {grade} outside 1..=12");
    }
    Ok(grade)
}

pub fn run(_globals: &Globals, args: &ConvertArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    // BTreeMap keeps output deterministic regardless of upstream key order.
    let problems: BTreeMap<String, UpstreamProblem> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut skipped_val = 0usize;
    for (id, problem) in &problems {
        let bucket = match problem.split.as_str() {
            "train" => &mut train,
            "test" => &mut test,
            "val" | "minival" => {
                skipped_val += 1;
                continue;
            }
            other => bail!("problem {id}: unknown split {other:?}"),
        };
        let sample = Sample {
            id: id.clone(),
            image_ref: problem
                .image
                .as_ref()
                .filter(|img| !img.is_empty())
                .map(|img| format!("{}/{id}/{img}", args.image_root)),
            question: problem.question.clone(),
            choices: problem.choices.clone(),
            gold_answer: problem.answer,
            subject: map_subject(&problem.subject, id)?,
            grade: map_grade(&problem.grade, id)?,
            has_text_context: !problem.hint.trim().is_empty(),
            hint: (!problem.hint.trim().is_empty()).then(|| problem.hint.clone()),
        };
        sample.validate().context("converted sample invalid")?;
        bucket.push(sample);
    }

    ensure_dir(&args.out_dir)?;
    let write = |samples: Vec<Sample>, split: Split, name: &str| -> Result<usize> {
        let corpus = Corpus::new(split, samples)?;
        let path: &Path = &args.out_dir.join(name);
        save_corpus(path, &corpus)?;
        println!("convert: wrote {} samples to {}", corpus.len(), path.display());
        Ok(corpus.len())
    };
    let n_train = write(train, Split::Train, "corpus_train.jsonl")?;
    let n_test = write(test, Split::Test, "corpus_test.jsonl")?;
    println!(
        "convert: {n_train} train / {n_test} test samples ({skipped_val} val samples skipped)"
    );
    Ok(())
}
