//! Pairwise preference dataset construction and validation.
//!
//! For every image-bearing train sample, the strong and weak tutors each
//! generate a tutorial; the judge compares them pairwise and the winner
//! becomes the chosen text. The judge's verdict is recorded as-is — the
//! strong/weak prior never overrides it. Per-sample failures are skipped
//! and logged; a failure rate above the threshold aborts the build.
//!
//! Pair files are JSONL with header
//! `{"format":"tutor-align-pairs/1","train_corpus_hash":"<hex>"}`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::Backend;
use crate::corpus::{filter_multimodal, Corpus, Split};
use crate::orchestration::{
    compare_tutorials, generate_tutorial, render_tutor_prompt, RubricSpec, Winner,
};
use crate::parallel::par_map;

pub const PAIRS_FORMAT: &str = "tutor-align-pairs/1";

/// Default abort threshold: more than this fraction of failed samples
/// signals a broken backend rather than transient faults.
pub const DEFAULT_FAILURE_THRESHOLD: f64 = 0.10;

#[derive(Debug, thiserror::Error)]
pub enum PrefDataError {
    #[error("expected the train split, got {0}")]
    NotTrainSplit(Split),
    #[error("strong and weak tutors must differ, both are {0:?}")]
    SameTutor(String),
    #[error("{failed} of {total} samples failed, above the {threshold} threshold; first failures: {summary}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        threshold: f64,
        summary: String,
    },
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
    #[error("{path}: bad pair-file format {found:?}, expected {PAIRS_FORMAT:?}")]
    BadFormat { path: String, found: String },
}

/// Which tutor produced the chosen text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WinnerSource {
    Strong,
    Weak,
}

/// One preference pair: the rendered tutor prompt with the winning and
/// losing tutorial texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub sample_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub strong_tutor_id: String,
    pub weak_tutor_id: String,
    pub winner_source: WinnerSource,
}

/// A sample that could not be turned into a pair, with the stage and reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub sample_id: String,
    pub stage: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct BuildOutcome {
    pub pairs: Vec<PreferencePair>,
    pub skipped: Vec<SkipRecord>,
    /// Hash of the corpus the build ran on (after any subsetting).
    pub train_corpus_hash: String,
}

pub struct BuildOptions {
    pub seed: u64,
    pub failure_threshold: f64,
    pub workers: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            failure_threshold: DEFAULT_FAILURE_THRESHOLD,
            workers: 4,
        }
    }
}

enum SampleOutcome {
    Pair(Box<PreferencePair>),
    Skip(SkipRecord),
}

/// Build one preference pair per image-bearing train sample.
#[allow(clippy::too_many_arguments)]
pub fn build_pairs(
    train: &Corpus,
    strong: &Backend,
    weak: &Backend,
    judge: &Backend,
    rubric: &RubricSpec,
    tutor_template: &str,
    compare_template: &str,
    opts: &BuildOptions,
) -> Result<BuildOutcome, PrefDataError> {
    if train.split != Split::Train {
        return Err(PrefDataError::NotTrainSplit(train.split));
    }
    if strong.id() == weak.id() {
        return Err(PrefDataError::SameTutor(strong.id().to_string()));
    }

    let train_corpus_hash = train.content_hash();
    let filtered = filter_multimodal(train);
    let total = filtered.len();

    let outcomes = par_map(filtered.samples, opts.workers, |sample| {
        let skip = |stage: &str, reason: String| {
            SampleOutcome::Skip(SkipRecord {
                sample_id: sample.id.clone(),
                stage: stage.to_string(),
                reason,
            })
        };
        let prompt = match render_tutor_prompt(sample, tutor_template) {
            Ok(req) => req.user_prompt,
            Err(e) => return skip("render", e.to_string()),
        };
        let strong_tut = match generate_tutorial(strong, sample, tutor_template) {
            Ok(t) => t,
            Err(e) => return skip("generate-strong", e.to_string()),
        };
        let weak_tut = match generate_tutorial(weak, sample, tutor_template) {
            Ok(t) => t,
            Err(e) => return skip("generate-weak", e.to_string()),
        };
        if strong_tut.text == weak_tut.text {
            return skip("compare", "identical tutorials, no preference possible".into());
        }
        let decision = match compare_tutorials(
            judge,
            sample,
            &strong_tut,
            &weak_tut,
            rubric,
            compare_template,
            opts.seed,
        ) {
            Ok(d) => d,
            Err(e) => return skip("judge", e.to_string()),
        };
        let (chosen, rejected, winner_source) = match decision.winner {
            Winner::A => (strong_tut.text, weak_tut.text, WinnerSource::Strong),
            Winner::B => (weak_tut.text, strong_tut.text, WinnerSource::Weak),
        };
        SampleOutcome::Pair(Box::new(PreferencePair {
            sample_id: sample.id.clone(),
            prompt,
            chosen,
            rejected,
            strong_tutor_id: strong.id().to_string(),
            weak_tutor_id: weak.id().to_string(),
            winner_source,
        }))
    });

    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            SampleOutcome::Pair(pair) => pairs.push(*pair),
            SampleOutcome::Skip(record) => skipped.push(record),
        }
    }
    pairs.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    skipped.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    if total > 0 && (skipped.len() as f64) > opts.failure_threshold * total as f64 {
        let summary = skipped
            .iter()
            .take(5)
            .map(|s| format!("{} ({}: {})", s.sample_id, s.stage, s.reason))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(PrefDataError::TooManyFailures {
            failed: skipped.len(),
            total,
            threshold: opts.failure_threshold,
            summary,
        });
    }

    Ok(BuildOutcome {
        pairs,
        skipped,
        train_corpus_hash,
    })
}

#[derive(Serialize, Deserialize)]
struct PairHeader {
    format: String,
    train_corpus_hash: String,
}

pub fn save_pairs(
    path: &Path,
    pairs: &[PreferencePair],
    train_corpus_hash: &str,
) -> Result<(), PrefDataError> {
    let header = PairHeader {
        format: PAIRS_FORMAT.to_string(),
        train_corpus_hash: train_corpus_hash.to_string(),
    };
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for pair in pairs {
        out.push_str(&serde_json::to_string(pair).expect("pair serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| PrefDataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load a pair file, returning the pairs and the recorded corpus hash.
pub fn load_pairs(path: &Path) -> Result<(Vec<PreferencePair>, String), PrefDataError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| PrefDataError::Io {
        path: display.clone(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| PrefDataError::Parse {
        path: display.clone(),
        line: 1,
        message: "empty file, missing header".into(),
    })?;
    let header: PairHeader =
        serde_json::from_str(header_line).map_err(|e| PrefDataError::Parse {
            path: display.clone(),
            line: 1,
            message: e.to_string(),
        })?;
    if header.format != PAIRS_FORMAT {
        return Err(PrefDataError::BadFormat {
            path: display,
            found: header.format,
        });
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let pair: PreferencePair =
            serde_json::from_str(line).map_err(|e| PrefDataError::Parse {
                path: display.clone(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        pairs.push(pair);
    }
    Ok((pairs, header.train_corpus_hash))
}

/// Validation verdict for a pair file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub pass: bool,
    pub pair_count: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        if self.pass {
            format!("PASS: {} pairs validated", self.pair_count)
        } else {
            format!(
                "FAIL: {} pairs, {} problems: {}",
                self.pair_count,
                self.failures.len(),
                self.failures.join("; ")
            )
        }
    }
}

/// Check a pair file against the train corpus: known train sample ids, no
/// duplicates, chosen distinct from rejected, nonempty texts.
pub fn validate_pairs(path: &Path, train: &Corpus) -> Result<ValidationReport, PrefDataError> {
    let (pairs, _hash) = load_pairs(path)?;
    let train_ids: BTreeSet<&str> = train.samples.iter().map(|s| s.id.as_str()).collect();
    let mut failures = Vec::new();
    let mut seen = BTreeSet::new();

    for pair in &pairs {
        if !train_ids.contains(pair.sample_id.as_str()) {
            failures.push(format!("sample {:?} not in the train corpus", pair.sample_id));
        }
        if !seen.insert(pair.sample_id.as_str()) {
            failures.push(format!("duplicate sample id {:?}", pair.sample_id));
        }
        if pair.chosen == pair.rejected {
            failures.push(format!("sample {:?}: chosen equals rejected", pair.sample_id));
        }
        if pair.chosen.trim().is_empty() || pair.rejected.trim().is_empty() {
            failures.push(format!("sample {:?}: empty tutorial text", pair.sample_id));
        }
        if pair.prompt.trim().is_empty() {
            failures.push(format!("sample {:?}: empty prompt", pair.sample_id));
        }
    }

    Ok(ValidationReport {
        pass: failures.is_empty(),
        pair_count: pairs.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{Backend, BackendConfig};
    use crate::corpus::{Sample, Subject};
    use std::path::PathBuf;

    fn sample(dir: &Path, id: &str, question: &str, image: bool) -> Sample {
        let image_ref = image.then(|| {
            let path = dir.join(format!("img-{id}.png"));
            if !path.exists() {
                fs::write(&path, id.as_bytes()).unwrap();
            }
            path.display().to_string()
        });
        Sample {
            id: id.into(),
            image_ref,
            question: question.into(),
            choices: vec!["no".into(), "yes".into()],
            gold_answer: 1,
            subject: Subject::Nat,
            grade: 5,
            has_text_context: false,
            hint: None,
        }
    }

    fn train_corpus(dir: &Path, n: usize) -> Corpus {
        Corpus {
            split: Split::Train,
            samples: (0..n)
                .map(|i| {
                    sample(
                        dir,
                        &format!("n{i:03}"),
                        &format!("question number {i:03}?"),
                        true,
                    )
                })
                .collect(),
        }
    }

    fn mock(dir: &Path, name: &str, script: &str) -> Backend {
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, script).unwrap();
        Backend::new(BackendConfig::mock(name, path), Some(&dir.join("cache"))).unwrap()
    }

    const TUTOR_TEMPLATE: &str = "Explain this: {question}\n{choices}";
    const COMPARE_TEMPLATE: &str =
        "Q: {question}\nTutorial 1: {tutorial_1}\nTutorial 2: {tutorial_2}\nPick per rubric:\n{rubric}";

    // Judge prefers whichever presented tutorial contains "stepwise".
    const LENGTH_JUDGE: &str = r#"{
        "rules": [
            {"match_regex": "Tutorial 1: [^\n]*stepwise", "response": "{\"winner\": \"first\"}"}
        ],
        "default": "{\"winner\": \"second\"}"
    }"#;

    #[test]
    fn all_strong_wins_when_strong_has_marker() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(
            dir.path(),
            "strong",
            r#"{"rules": [], "default": "a stepwise careful explanation"}"#,
        );
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "short answer"}"#);
        let judge = mock(dir.path(), "judge", LENGTH_JUDGE);
        let corpus = train_corpus(dir.path(), 6);
        let outcome = build_pairs(
            &corpus,
            &strong,
            &weak,
            &judge,
            &RubricSpec::default(),
            TUTOR_TEMPLATE,
            COMPARE_TEMPLATE,
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.pairs.len(), 6);
        assert!(outcome.skipped.is_empty());
        for pair in &outcome.pairs {
            assert_eq!(pair.winner_source, WinnerSource::Strong);
            assert_eq!(pair.chosen, "a stepwise careful explanation");
            assert_eq!(pair.rejected, "short answer");
        }
    }

    #[test]
    fn judge_verdict_overrides_strong_prior() {
        let dir = tempfile::tempdir().unwrap();
        // Weak tutor emits the marker on exactly one question.
        let strong = mock(
            dir.path(),
            "strong",
            r#"{"rules": [], "default": "plain explanation"}"#,
        );
        let weak = mock(
            dir.path(),
            "weak",
            r#"{
                "rules": [{"match": "number 002", "response": "a stepwise gem"}],
                "default": "weak words"
            }"#,
        );
        // Preference order regardless of position: stepwise > plain > rest.
        let judge = mock(
            dir.path(),
            "judge",
            r#"{
                "rules": [
                    {"match_regex": "Tutorial 1: [^\n]*stepwise", "response": "{\"winner\": \"first\"}"},
                    {"match_regex": "Tutorial 2: [^\n]*stepwise", "response": "{\"winner\": \"second\"}"},
                    {"match_regex": "Tutorial 1: [^\n]*plain", "response": "{\"winner\": \"first\"}"}
                ],
                "default": "{\"winner\": \"second\"}"
            }"#,
        );
        let corpus = train_corpus(dir.path(), 5);
        let outcome = build_pairs(
            &corpus,
            &strong,
            &weak,
            &judge,
            &RubricSpec::default(),
            TUTOR_TEMPLATE,
            COMPARE_TEMPLATE,
            &BuildOptions::default(),
        )
        .unwrap();
        let flipped: Vec<&PreferencePair> = outcome
            .pairs
            .iter()
            .filter(|p| p.winner_source == WinnerSource::Weak)
            .collect();
        assert_eq!(flipped.len(), 1);
        assert_eq!(flipped[0].sample_id, "n002");
        assert_eq!(flipped[0].chosen, "a stepwise gem");
        assert_eq!(flipped[0].rejected, "plain explanation");
    }

    #[test]
    fn failure_threshold_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(
            dir.path(),
            "strong",
            r#"{"rules": [], "default": "a stepwise careful explanation"}"#,
        );
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "short"}"#);
        // Judge answers garbage for questions containing "fail-me".
        let judge = mock(
            dir.path(),
            "judge",
            r#"{
                "rules": [{"match": "fail-me", "response": "no verdict from me"}],
                "default": "{\"winner\": \"first\"}"
            }"#,
        );
        let mut samples: Vec<Sample> = (0..89)
            .map(|i| sample(dir.path(), &format!("ok{i:03}"), &format!("fine question {i}"), true))
            .collect();
        for i in 0..11 {
            samples.push(sample(
                dir.path(),
                &format!("bad{i:02}"),
                &format!("fail-me question {i}"),
                true,
            ));
        }
        let corpus = Corpus {
            split: Split::Train,
            samples,
        };
        let err = build_pairs(
            &corpus,
            &strong,
            &weak,
            &judge,
            &RubricSpec::default(),
            TUTOR_TEMPLATE,
            COMPARE_TEMPLATE,
            &BuildOptions::default(),
        )
        .unwrap_err();
        match err {
            PrefDataError::TooManyFailures { failed, total, .. } => {
                assert_eq!(failed, 11);
                assert_eq!(total, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ten_percent_failures_exactly_do_not_abort() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(
            dir.path(),
            "strong",
            r#"{"rules": [], "default": "a stepwise careful explanation"}"#,
        );
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "short"}"#);
        let judge = mock(
            dir.path(),
            "judge",
            r#"{
                "rules": [{"match": "fail-me", "response": "still no verdict"}],
                "default": "{\"winner\": \"first\"}"
            }"#,
        );
        let mut samples: Vec<Sample> = (0..18)
            .map(|i| sample(dir.path(), &format!("ok{i:02}"), &format!("fine {i}"), true))
            .collect();
        samples.push(sample(dir.path(), "bad00", "fail-me now", true));
        samples.push(sample(dir.path(), "bad01", "fail-me again", true));
        let corpus = Corpus {
            split: Split::Train,
            samples,
        };
        let outcome = build_pairs(
            &corpus,
            &strong,
            &weak,
            &judge,
            &RubricSpec::default(),
            TUTOR_TEMPLATE,
            COMPARE_TEMPLATE,
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.pairs.len(), 18);
        assert_eq!(outcome.skipped.len(), 2);
        assert_eq!(outcome.pairs.len() + outcome.skipped.len(), 20);
    }

    #[test]
    fn identical_tutorials_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(dir.path(), "strong", r#"{"rules": [], "default": "same text"}"#);
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "same text"}"#);
        let judge = mock(dir.path(), "judge", LENGTH_JUDGE);
        let corpus = train_corpus(dir.path(), 2);
        let err = build_pairs(
            &corpus,
            &strong,
            &weak,
            &judge,
            &RubricSpec::default(),
            TUTOR_TEMPLATE,
            COMPARE_TEMPLATE,
            &BuildOptions::default(),
        )
        .unwrap_err();
        // every sample skipped -> above threshold
        assert!(matches!(err, PrefDataError::TooManyFailures { .. }));
    }

    #[test]
    fn requires_train_split_and_distinct_tutors() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(dir.path(), "strong", r#"{"rules": [], "default": "x"}"#);
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "y"}"#);
        let judge = mock(dir.path(), "judge", LENGTH_JUDGE);
        let test_corpus = Corpus {
            split: Split::Test,
            samples: vec![],
        };
        assert!(matches!(
            build_pairs(
                &test_corpus,
                &strong,
                &weak,
                &judge,
                &RubricSpec::default(),
                TUTOR_TEMPLATE,
                COMPARE_TEMPLATE,
                &BuildOptions::default(),
            ),
            Err(PrefDataError::NotTrainSplit(Split::Test))
        ));
        assert!(matches!(
            build_pairs(
                &train_corpus(dir.path(), 1),
                &strong,
                &strong,
                &judge,
                &RubricSpec::default(),
                TUTOR_TEMPLATE,
                COMPARE_TEMPLATE,
                &BuildOptions::default(),
            ),
            Err(PrefDataError::SameTutor(_))
        ));
    }

    #[test]
    fn deterministic_pair_files_across_runs() {
        let dir = tempfile::tempdir().unwrap();
        let strong = mock(
            dir.path(),
            "strong",
            r#"{"rules": [], "default": "a stepwise careful explanation"}"#,
        );
        let weak = mock(dir.path(), "weak", r#"{"rules": [], "default": "short"}"#);
        let judge = mock(dir.path(), "judge", LENGTH_JUDGE);
        let corpus = train_corpus(dir.path(), 8);
        let opts = BuildOptions {
            seed: 42,
            ..BuildOptions::default()
        };
        let run = |suffix: &str| -> Vec<u8> {
            let outcome = build_pairs(
                &corpus,
                &strong,
                &weak,
                &judge,
                &RubricSpec::default(),
                TUTOR_TEMPLATE,
                COMPARE_TEMPLATE,
                &opts,
            )
            .unwrap();
            let path = dir.path().join(format!("pairs-{suffix}.jsonl"));
            save_pairs(&path, &outcome.pairs, &outcome.train_corpus_hash).unwrap();
            fs::read(&path).unwrap()
        };
        assert_eq!(run("one"), run("two"));
    }

    #[test]
    fn validate_pairs_passes_and_fails_correctly() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = train_corpus(dir.path(), 3);
        let good = PreferencePair {
            sample_id: "n000".into(),
            prompt: "p".into(),
            chosen: "good".into(),
            rejected: "bad".into(),
            strong_tutor_id: "s".into(),
            weak_tutor_id: "w".into(),
            winner_source: WinnerSource::Strong,
        };
        let path = dir.path().join("pairs.jsonl");

        save_pairs(&path, std::slice::from_ref(&good), "hash").unwrap();
        let report = validate_pairs(&path, &corpus).unwrap();
        assert!(report.pass, "{}", report.summary());
        assert_eq!(report.pair_count, 1);

        // unknown (non-train) sample id
        let mut stray = good.clone();
        stray.sample_id = "t999".into();
        save_pairs(&path, &[stray], "hash").unwrap();
        let report = validate_pairs(&path, &corpus).unwrap();
        assert!(!report.pass);
        assert!(report.failures[0].contains("t999"));

        // duplicate sample id
        save_pairs(&path, &[good.clone(), good.clone()], "hash").unwrap();
        let report = validate_pairs(&path, &corpus).unwrap();
        assert!(!report.pass);
        assert!(report.failures.iter().any(|f| f.contains("duplicate")));

        // chosen == rejected
        let mut same = good;
        same.rejected = same.chosen.clone();
        save_pairs(&path, &[same], "hash").unwrap();
        assert!(!validate_pairs(&path, &corpus).unwrap().pass);
    }

    #[test]
    fn load_pairs_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        save_pairs(&path, &[], "h").unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{oops\n");
        fs::write(&path, text).unwrap();
        match load_pairs(&path).unwrap_err() {
            PrefDataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let _ = PathBuf::new();
    }
}
