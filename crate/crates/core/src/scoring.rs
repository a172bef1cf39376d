//! Aggregation of judge feedback: per-category mean ratings, rating
//! histograms, and problem-solving accuracy.
//!
//! Category axes follow the benchmark's layout: subject (NAT/SOC/LAN),
//! context modality (NO TXT/TXT), and grade band (G1-6/G7-12). "Average" is
//! the mean over all judged samples, not the mean of column means — the only
//! definition consistent with all three partitions at once. Ratings are
//! integers, so every mean is carried as an exact integer sum plus a count.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Corpus, Sample, Subject};
use crate::orchestration::JudgeFeedback;

#[derive(Debug, thiserror::Error)]
pub enum ScoringError {
    #[error("feedback references unknown sample {0:?}")]
    UnknownSample(String),
    #[error("duplicate feedback for sample {sample_id:?} from tutor {tutor_id:?}")]
    DuplicateFeedback { sample_id: String, tutor_id: String },
    #[error("answer map references unknown sample {0:?}")]
    UnknownAnswerSample(String),
}

/// Count and exact integer rating sum for one category cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryAcc {
    pub count: usize,
    pub rating_sum: u64,
}

impl CategoryAcc {
    fn add(&mut self, rating: u8) {
        self.count += 1;
        self.rating_sum += u64::from(rating);
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.rating_sum as f64 / self.count as f64)
    }
}

/// Per-tutor category breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TutorBreakdown {
    pub nat: CategoryAcc,
    pub soc: CategoryAcc,
    pub lan: CategoryAcc,
    pub no_txt: CategoryAcc,
    pub txt: CategoryAcc,
    pub g1_6: CategoryAcc,
    pub g7_12: CategoryAcc,
    pub overall: CategoryAcc,
}

impl TutorBreakdown {
    fn add(&mut self, sample: &Sample, rating: u8) {
        match sample.subject {
            Subject::Nat => self.nat.add(rating),
            Subject::Soc => self.soc.add(rating),
            Subject::Lan => self.lan.add(rating),
        }
        if sample.has_text_context {
            self.txt.add(rating);
        } else {
            self.no_txt.add(rating);
        }
        if sample.grade <= 6 {
            self.g1_6.add(rating);
        } else {
            self.g7_12.add(rating);
        }
        self.overall.add(rating);
    }

    /// Column order matching the report table.
    pub fn columns(&self) -> [(&'static str, CategoryAcc); 8] {
        [
            ("NAT", self.nat),
            ("SOC", self.soc),
            ("LAN", self.lan),
            ("NO TXT", self.no_txt),
            ("TXT", self.txt),
            ("G1-6", self.g1_6),
            ("G7-12", self.g7_12),
            ("Average", self.overall),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryBreakdown {
    pub per_tutor: BTreeMap<String, TutorBreakdown>,
}

/// Group feedback by tutor and category. Every feedback must reference a
/// corpus sample; duplicate (sample, tutor) feedback is an error so
/// orchestration bugs surface instead of averaging away.
pub fn aggregate(
    feedbacks: &[JudgeFeedback],
    corpus: &Corpus,
) -> Result<CategoryBreakdown, ScoringError> {
    let by_id: BTreeMap<&str, &Sample> =
        corpus.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut seen: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut breakdown = CategoryBreakdown::default();

    for fb in feedbacks {
        let sample = by_id
            .get(fb.sample_id.as_str())
            .ok_or_else(|| ScoringError::UnknownSample(fb.sample_id.clone()))?;
        if !seen.insert((fb.sample_id.as_str(), fb.tutor_id.as_str())) {
            return Err(ScoringError::DuplicateFeedback {
                sample_id: fb.sample_id.clone(),
                tutor_id: fb.tutor_id.clone(),
            });
        }
        breakdown
            .per_tutor
            .entry(fb.tutor_id.clone())
            .or_default()
            .add(sample, fb.rating);
    }
    Ok(breakdown)
}

/// Per-tutor counts of ratings 1..=5.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingHistogram {
    pub per_tutor: BTreeMap<String, [usize; 5]>,
}

pub fn distribution(feedbacks: &[JudgeFeedback]) -> RatingHistogram {
    let mut hist = RatingHistogram::default();
    for fb in feedbacks {
        let counts = hist.per_tutor.entry(fb.tutor_id.clone()).or_default();
        counts[usize::from(fb.rating) - 1] += 1;
    }
    hist
}

/// Extract a multiple-choice answer index from completion text.
///
/// If an `Answer:` marker (case-insensitive) occurs, the first in-range
/// standalone integer after its last occurrence wins; otherwise the first
/// in-range standalone integer anywhere; otherwise none (scored as wrong).
pub fn extract_answer(completion_text: &str, n_choices: usize) -> Option<usize> {
    debug_assert!(n_choices >= 2);
    // ASCII folding keeps byte offsets valid in the original text.
    let lower = completion_text.to_ascii_lowercase();
    let search_from = lower.rfind("answer:").map(|p| p + "answer:".len());
    let region = match search_from {
        Some(start) => &completion_text[start..],
        None => completion_text,
    };
    first_standalone_in_range(region, n_choices)
}

fn first_standalone_in_range(text: &str, n_choices: usize) -> Option<usize> {
    let bytes = text.as_bytes();
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
                if let Ok(value) = text[start..i].parse::<usize>() {
                    if value < n_choices {
                        return Some(value);
                    }
                }
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Per-tutor answer accuracy in percent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyReport {
    pub per_tutor: BTreeMap<String, f64>,
}

/// Accuracy over the answered samples: extracted index equal to the gold
/// answer, with unanswered counting as wrong.
pub fn accuracy(
    tutor_answers: &BTreeMap<String, BTreeMap<String, Option<usize>>>,
    corpus: &Corpus,
) -> Result<AccuracyReport, ScoringError> {
    let by_id: BTreeMap<&str, &Sample> =
        corpus.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut report = AccuracyReport::default();
    for (tutor_id, answers) in tutor_answers {
        let mut correct = 0usize;
        for (sample_id, answer) in answers {
            let sample = by_id
                .get(sample_id.as_str())
                .ok_or_else(|| ScoringError::UnknownAnswerSample(sample_id.clone()))?;
            if *answer == Some(sample.gold_answer) {
                correct += 1;
            }
        }
        let pct = if answers.is_empty() {
            0.0
        } else {
            100.0 * correct as f64 / answers.len() as f64
        };
        report.per_tutor.insert(tutor_id.clone(), pct);
    }
    Ok(report)
}

/// Rendered report files plus any warnings raised while rendering.
#[derive(Debug, Clone)]
pub struct RenderedReport {
    pub breakdown_md: String,
    pub breakdown_csv: String,
    pub distribution_csv: String,
    pub accuracy_vs_tutoring_csv: String,
    pub warnings: Vec<String>,
}

/// Round half-up to two decimals, for display only. Works on the decimal
/// rendering so values like 1.675 (stored as 1.67499999...) round the way
/// their exact rational value intends.
pub fn round_half_up_2(x: f64) -> String {
    let negative = x < 0.0;
    let s = format!("{:.6}", x.abs());
    let (int_part, frac_part) = s.split_once('.').expect("fixed-point format");
    let digits: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let mut keep = [digits[0], digits[1]];
    if digits[2] >= 5 {
        if keep[1] < 9 {
            keep[1] += 1;
        } else if keep[0] < 9 {
            keep = [keep[0] + 1, 0];
        } else {
            let carried: u64 = int_part.parse::<u64>().expect("integer part") + 1;
            return format!("{}{carried}.00", if negative { "-" } else { "" });
        }
    }
    format!(
        "{}{int_part}.{}{}",
        if negative { "-" } else { "" },
        keep[0],
        keep[1]
    )
}

/// Produce the four report files. Tutors without any feedback are omitted
/// from the tables with a warning.
pub fn render_report(
    breakdown: &CategoryBreakdown,
    histogram: &RatingHistogram,
    accuracy: &AccuracyReport,
) -> RenderedReport {
    let mut warnings = Vec::new();

    let mut md = String::new();
    md.push_str("| Model | NAT | SOC | LAN | NO TXT | TXT | G1-6 | G7-12 | Average |\n");
    md.push_str("|---|---|---|---|---|---|---|---|---|\n");
    let mut csv = String::from(
        "tutor,nat_mean,nat_count,soc_mean,soc_count,lan_mean,lan_count,no_txt_mean,no_txt_count,txt_mean,txt_count,g1_6_mean,g1_6_count,g7_12_mean,g7_12_count,average_mean,average_count\n",
    );
    for (tutor, row) in &breakdown.per_tutor {
        if row.overall.count == 0 {
            warnings.push(format!("tutor {tutor}: no judged samples, row omitted"));
            continue;
        }
        md.push_str(&format!("| {tutor} |"));
        csv.push_str(tutor);
        for (_, acc) in row.columns() {
            match acc.mean() {
                Some(mean) => {
                    md.push_str(&format!(" {} |", round_half_up_2(mean)));
                    csv.push_str(&format!(",{mean},{}", acc.count));
                }
                None => {
                    md.push_str(" - |");
                    csv.push_str(&format!(",,{}", acc.count));
                }
            }
        }
        md.push('\n');
        csv.push('\n');
    }

    let mut dist = String::from("tutor,rating,count\n");
    for (tutor, counts) in &histogram.per_tutor {
        for (i, count) in counts.iter().enumerate() {
            dist.push_str(&format!("{tutor},{},{count}\n", i + 1));
        }
    }

    let mut acc_csv = String::from("tutor,accuracy_pct,tutoring_average\n");
    for (tutor, pct) in &accuracy.per_tutor {
        match breakdown.per_tutor.get(tutor).and_then(|b| b.overall.mean()) {
            Some(avg) => acc_csv.push_str(&format!("{tutor},{pct},{avg}\n")),
            None => warnings.push(format!(
                "tutor {tutor}: accuracy present but no tutoring feedback, scatter row omitted"
            )),
        }
    }

    RenderedReport {
        breakdown_md: md,
        breakdown_csv: csv,
        distribution_csv: dist,
        accuracy_vs_tutoring_csv: acc_csv,
        warnings,
    }
}
