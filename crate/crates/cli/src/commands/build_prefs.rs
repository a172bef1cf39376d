//! `build-prefs`: strong and weak tutors answer every train sample, the
//! judge picks per pair, and the winning/losing texts become the preference
//! dataset.

use anyhow::{Context, Result};

use tutor_align_core::corpus::{subset, Split};
use tutor_align_core::prefdata::{build_pairs, save_pairs, validate_pairs, BuildOptions};

use super::{build_backend, ensure_dir, load_corpus_resolved, output_dir, write_text};
use crate::{BuildPrefsArgs, Globals};

pub fn run(globals: &Globals, args: &BuildPrefsArgs) -> Result<()> {
    let config = globals.require_config()?;
    let seed = globals.seed.unwrap_or(config.seed);
    let roles = config.roles()?;

    let corpus_path = config
        .corpus_train
        .as_ref()
        .context("config run.corpus_train is required for build-prefs")?;
    let mut corpus = load_corpus_resolved(corpus_path, Split::Train)?;
    if args.half {
        corpus = subset(&corpus, 0.5, seed)?;
        println!("build-prefs: --half selected {} samples", corpus.len());
    }

    let strong = build_backend(globals, &config, &roles.strong)?;
    let weak = build_backend(globals, &config, &roles.weak)?;
    let judge = build_backend(globals, &config, &roles.judge)?;

    let opts = BuildOptions {
        seed,
        failure_threshold: args.failure_threshold,
        workers: globals.parallelism.unwrap_or(config.parallelism),
    };
    let outcome = build_pairs(
        &corpus,
        &strong,
        &weak,
        &judge,
        &config.rubric,
        &config.tutor_template,
        &config.compare_template,
        &opts,
    )?;

    let out = output_dir(globals, Some(&config));
    ensure_dir(&out)?;
    let pairs_path = out.join("pairs.jsonl");
    save_pairs(&pairs_path, &outcome.pairs, &outcome.train_corpus_hash)?;

    let mut skipped_body = String::new();
    for skip in &outcome.skipped {
        eprintln!(
            "build-prefs: skipped sample {} at {}: {}",
            skip.sample_id, skip.stage, skip.reason
        );
        skipped_body.push_str(&serde_json::to_string(skip).expect("skip serializes"));
        skipped_body.push('\n');
    }
    write_text(&out.join("skipped.jsonl"), &skipped_body)?;

    let report = validate_pairs(&pairs_path, &corpus)?;
    println!(
        "build-prefs: {} pairs, {} skipped -> {} ({})",
        outcome.pairs.len(),
        outcome.skipped.len(),
        pairs_path.display(),
        report.summary()
    );
    if !report.pass {
        anyhow::bail!("emitted pair file failed validation: {}", report.summary());
    }
    Ok(())
}
