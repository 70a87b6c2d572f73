//! Dropout-correlate statistics: chi-square tests over categorical
//! attributes, Pearson correlation of trait scores with progress, and
//! per-student engagement features.

pub mod gamma;
mod report;

pub use report::{
    correlation_report, ChiOutcome, ChiSquareEntry, CorrelationReport, EngagementRow,
    OutcomeMeans, PearsonEntry, PearsonOutcome, TABLE_MARKER,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::courselog::{AuthorRole, CourseLog, LogError};

/// Errors raised by statistical operations.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{axis} axis has fewer than two distinct categories")]
    DegenerateAxis { axis: String },
    #[error("{side} values have zero variance")]
    ZeroVariance { side: String },
    #[error("progress value {value} not covered by any bucket")]
    BucketOutOfRange { value: u32 },
    #[error("invalid buckets: {0}")]
    BadBuckets(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Contiguous progress ranges used as chi-square columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressBuckets {
    bounds: Vec<(u32, u32)>,
}

impl ProgressBuckets {
    /// Build buckets from inclusive `(lo, hi)` ranges. Ranges must be
    /// non-empty, start at 0, and tile a prefix of the integers.
    pub fn new(bounds: Vec<(u32, u32)>) -> Result<Self, StatsError> {
        if bounds.is_empty() {
            return Err(StatsError::BadBuckets("no ranges given".into()));
        }
        let mut next = 0;
        for &(lo, hi) in &bounds {
            if lo != next {
                return Err(StatsError::BadBuckets(format!(
                    "range starting at {lo} leaves a gap after {next}"
                )));
            }
            if hi < lo {
                return Err(StatsError::BadBuckets(format!("empty range ({lo}, {hi})")));
            }
            next = hi + 1;
        }
        Ok(ProgressBuckets { bounds })
    }

    /// Default split: never-started, partial progress, completer.
    pub fn default_for(chapter_count: u32) -> ProgressBuckets {
        let bounds = if chapter_count <= 1 {
            vec![(0, 0), (1, 1)]
        } else {
            vec![(0, 0), (1, chapter_count - 1), (chapter_count, chapter_count)]
        };
        ProgressBuckets { bounds }
    }

    /// Index of the bucket containing `value`.
    pub fn bucket_of(&self, value: u32) -> Option<usize> {
        self.bounds.iter().position(|&(lo, hi)| value >= lo && value <= hi)
    }

    /// Human-readable bucket labels, e.g. `0`, `1-5`, `6`.
    pub fn labels(&self) -> Vec<String> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }
}

/// Result of a chi-square independence test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    /// Distinct category values, sorted; one row per value.
    pub row_labels: Vec<String>,
    /// Labels of the progress buckets that actually occurred.
    pub col_labels: Vec<String>,
    /// Observed counts, `observed[row][col]`.
    pub observed: Vec<Vec<u64>>,
}

/// Chi-square independence test between a categorical attribute and
/// bucketed progress.
///
/// All-zero bucket columns are dropped before computing expectations; both
/// remaining axes need at least two categories.
pub fn chi_square(
    labels: &[String],
    progress: &[u32],
    buckets: &ProgressBuckets,
) -> Result<ChiSquareResult, StatsError> {
    if labels.len() != progress.len() {
        return Err(StatsError::LengthMismatch { left: labels.len(), right: progress.len() });
    }
    if labels.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut row_labels: Vec<String> = labels.to_vec();
    row_labels.sort();
    row_labels.dedup();

    let mut observed = vec![vec![0u64; buckets.len()]; row_labels.len()];
    for (label, &p) in labels.iter().zip(progress) {
        let row = row_labels.binary_search(label).expect("label is in the dedup list");
        let col = buckets.bucket_of(p).ok_or(StatsError::BucketOutOfRange { value: p })?;
        observed[row][col] += 1;
    }

    let mut col_labels = buckets.labels();
    let occupied: Vec<usize> = (0..buckets.len())
        .filter(|&c| observed.iter().any(|row| row[c] > 0))
        .collect();
    col_labels = occupied.iter().map(|&c| col_labels[c].clone()).collect();
    let observed: Vec<Vec<u64>> = observed
        .into_iter()
        .map(|row| occupied.iter().map(|&c| row[c]).collect())
        .collect();

    if row_labels.len() < 2 {
        return Err(StatsError::DegenerateAxis { axis: "category".into() });
    }
    if col_labels.len() < 2 {
        return Err(StatsError::DegenerateAxis { axis: "progress".into() });
    }

    let rows = observed.len();
    let cols = observed[0].len();
    let total: u64 = observed.iter().flatten().sum();
    let row_totals: Vec<u64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<u64> =
        (0..cols).map(|c| observed.iter().map(|r| r[c]).sum()).collect();

    let mut statistic = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let expected = row_totals[r] as f64 * col_totals[c] as f64 / total as f64;
            let diff = observed[r][c] as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let dof = (rows as u32 - 1) * (cols as u32 - 1);
    let p_value = gamma::chi_square_sf(statistic, dof);
    Ok(ChiSquareResult { statistic, dof, p_value, row_labels, col_labels, observed })
}

/// Result of a Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    pub n: usize,
}

/// Pearson correlation coefficient between two equal-length samples.
///
/// Uses a single Welford-style pass; either side having zero variance is an
/// error rather than a NaN.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2x = 0.0;
    let mut m2y = 0.0;
    let mut cxy = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = xi - mean_x;
        mean_x += dx / n;
        let dy = yi - mean_y;
        mean_y += dy / n;
        m2x += dx * (xi - mean_x);
        m2y += dy * (yi - mean_y);
        cxy += dx * (yi - mean_y);
    }
    if m2x == 0.0 {
        return Err(StatsError::ZeroVariance { side: "x".into() });
    }
    if m2y == 0.0 {
        return Err(StatsError::ZeroVariance { side: "y".into() });
    }
    let r = (cxy / (m2x * m2y).sqrt()).clamp(-1.0, 1.0);
    Ok(PearsonResult { r, n: x.len() })
}

/// Per-student engagement features over student-authored messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionFeatures {
    pub student_id: String,
    pub message_count: u32,
    pub chapters_engaged: u32,
    /// Messages per engaged chapter; 0 when the student never wrote.
    pub msgs_per_chapter: f64,
    /// Mean characters per message; 0 when the student never wrote.
    pub avg_msg_len: f64,
}

/// Compute engagement features for one student from the raw log.
pub fn interaction_features(
    log: &CourseLog,
    student_id: &str,
) -> Result<InteractionFeatures, StatsError> {
    if log.student(student_id).is_none() {
        return Err(LogError::UnknownStudent { student_id: student_id.to_string() }.into());
    }
    let mut message_count = 0u32;
    let mut total_chars = 0u64;
    let mut chapters = std::collections::BTreeSet::new();
    for r in &log.records {
        if r.student_id == student_id && r.author_role == AuthorRole::Student {
            message_count += 1;
            total_chars += r.text.chars().count() as u64;
            chapters.insert(r.chapter);
        }
    }
    let chapters_engaged = chapters.len() as u32;
    let msgs_per_chapter = if chapters_engaged == 0 {
        0.0
    } else {
        f64::from(message_count) / f64::from(chapters_engaged)
    };
    let avg_msg_len =
        if message_count == 0 { 0.0 } else { total_chars as f64 / f64::from(message_count) };
    Ok(InteractionFeatures {
        student_id: student_id.to_string(),
        message_count,
        chapters_engaged,
        msgs_per_chapter,
        avg_msg_len,
    })
}
