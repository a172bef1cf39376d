//! `report`: aggregate a run record into the breakdown table, rating
//! distribution, and accuracy-vs-tutoring scatter data.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};

use tutor_align_core::corpus::Split;
use tutor_align_core::records::{read_feedback_record, read_tutorial_record};
use tutor_align_core::scoring::{
    accuracy, aggregate, distribution, extract_answer, render_report,
};

use super::{ensure_dir, load_corpus_resolved, output_dir, write_text};
use crate::{Globals, ReportArgs};

pub fn run(globals: &Globals, args: &ReportArgs) -> Result<()> {
    let config = globals.optional_config()?;
    let run_dir = args
        .run_dir
        .clone()
        .unwrap_or_else(|| output_dir(globals, config.as_ref()));
    let corpus_path = match (&args.corpus, config.as_ref().and_then(|c| c.corpus_test.clone())) {
        (Some(path), _) => path.clone(),
        (None, Some(path)) => path,
        (None, None) => bail!("report needs --corpus or a config with run.corpus_test"),
    };
    let corpus = load_corpus_resolved(&corpus_path, Split::Test)?;

    let feedback_path = run_dir.join("feedback.jsonl");
    let (_, feedback) = read_feedback_record(&feedback_path)
        .with_context(|| format!("reading run record {}", feedback_path.display()))?;
    let tutorials_path = run_dir.join("tutorials.jsonl");
    let (_, tutorials) = read_tutorial_record(&tutorials_path)
        .with_context(|| format!("reading tutorials {}", tutorials_path.display()))?;

    if feedback.is_empty() {
        println!("warning: run record {} holds no feedback", feedback_path.display());
    }

    let breakdown = aggregate(&feedback, &corpus)?;
    let histogram = distribution(&feedback);

    let mut per_tutor_answers: BTreeMap<String, BTreeMap<String, Option<usize>>> = BTreeMap::new();
    for tutorial in &tutorials {
        let sample = corpus
            .sample(&tutorial.sample_id)
            .with_context(|| format!("tutorial references unknown sample {}", tutorial.sample_id))?;
        per_tutor_answers
            .entry(tutorial.tutor_id.clone())
            .or_default()
            .insert(
                tutorial.sample_id.clone(),
                extract_answer(&tutorial.text, sample.choices.len()),
            );
    }
    let accuracy_report = accuracy(&per_tutor_answers, &corpus)?;

    let rendered = render_report(&breakdown, &histogram, &accuracy_report);
    for warning in &rendered.warnings {
        println!("warning: {warning}");
    }

    let out = globals.out.clone().unwrap_or_else(|| run_dir.clone());
    ensure_dir(&out)?;
    write_text(&out.join("breakdown.md"), &rendered.breakdown_md)?;
    write_text(&out.join("breakdown.csv"), &rendered.breakdown_csv)?;
    write_text(&out.join("distribution.csv"), &rendered.distribution_csv)?;
    write_text(
        &out.join("accuracy_vs_tutoring.csv"),
        &rendered.accuracy_vs_tutoring_csv,
    )?;
    println!(
        "report: wrote breakdown.md, breakdown.csv, distribution.csv, accuracy_vs_tutoring.csv to {}",
        out.display()
    );
    Ok(())
}
