//! `eval`: generate tutorials per tutor on the filtered test split, judge
//! each, and write the run record.

use anyhow::{bail, Context, Result};

use tutor_align_core::corpus::{filter_multimodal, Split};
use tutor_align_core::orchestration::{generate_tutorial, judge_tutorial, JudgeFeedback, Tutorial};
use tutor_align_core::parallel::par_map;
use tutor_align_core::records::{write_feedback_record, write_tutorial_record, RunHeader};

use super::{build_backend, ensure_dir, load_corpus_resolved, output_dir};
use crate::{EvalArgs, Globals};

pub fn run(globals: &Globals, args: &EvalArgs) -> Result<()> {
    let config = globals.require_config()?;
    let seed = globals.seed.unwrap_or(config.seed);
    let roles = config.roles()?;

    let tutor_ids: Vec<String> = match &args.tutors {
        Some(selected) => {
            for id in selected {
                if !roles.tutors.contains(id) {
                    bail!(
                        "--tutors names {id:?}, which is not a configured tutor (tutors: {})",
                        roles.tutors.join(", ")
                    );
                }
            }
            selected.clone()
        }
        None => roles.tutors.clone(),
    };
    if tutor_ids.is_empty() {
        bail!("no tutors selected");
    }

    let corpus_path = config
        .corpus_test
        .as_ref()
        .context("config run.corpus_test is required for eval")?;
    let corpus = load_corpus_resolved(corpus_path, Split::Test)?;
    let filtered = filter_multimodal(&corpus);
    println!(
        "eval: {} samples ({} after multimodal filter), tutors: {}",
        corpus.len(),
        filtered.len(),
        tutor_ids.join(", ")
    );

    let judge = build_backend(globals, &config, &roles.judge)?;
    let workers = globals.parallelism.unwrap_or(config.parallelism);

    let mut tutorials: Vec<Tutorial> = Vec::new();
    let mut feedback: Vec<JudgeFeedback> = Vec::new();
    for tutor_id in &tutor_ids {
        let tutor = build_backend(globals, &config, tutor_id)?;
        let results = par_map(filtered.samples.clone(), workers, |sample| {
            let tutorial = generate_tutorial(&tutor, sample, &config.tutor_template)?;
            let fb = judge_tutorial(
                &judge,
                sample,
                &tutorial,
                &config.rubric,
                &config.judge_template,
            )?;
            Ok::<_, tutor_align_core::orchestration::OrchestrationError>((tutorial, fb))
        });
        for result in results {
            let (tutorial, fb) = result.with_context(|| format!("evaluating tutor {tutor_id}"))?;
            tutorials.push(tutorial);
            feedback.push(fb);
        }
    }
    tutorials.sort_by(|a, b| (&a.tutor_id, &a.sample_id).cmp(&(&b.tutor_id, &b.sample_id)));
    feedback.sort_by(|a, b| (&a.tutor_id, &a.sample_id).cmp(&(&b.tutor_id, &b.sample_id)));

    let header = RunHeader::new(
        tutor_ids,
        roles.judge.clone(),
        config.rubric.content_hash(),
        config.template_hashes.clone(),
        seed,
        corpus.content_hash(),
    );

    let out = output_dir(globals, Some(&config));
    ensure_dir(&out)?;
    let feedback_path = out.join("feedback.jsonl");
    let tutorials_path = out.join("tutorials.jsonl");
    write_feedback_record(&feedback_path, &header, &feedback)?;
    write_tutorial_record(&tutorials_path, &header, &tutorials)?;
    println!(
        "eval: wrote {} feedback lines to {} and {} tutorials to {}",
        feedback.len(),
        feedback_path.display(),
        tutorials.len(),
        tutorials_path.display()
    );
    Ok(())
}
