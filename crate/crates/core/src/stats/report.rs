//! Cohort-level correlation report.
//!
//! One pass over a course log produces chi-square tests for each categorical
//! attribute against bucketed progress, Pearson correlations of trait scores
//! with progress, and an engagement table split by course outcome. Fields
//! that cannot be tested (degenerate axis, zero variance, missing surveys)
//! are reported as skips instead of failing the whole report.

use serde::{Deserialize, Serialize};

use super::{
    chi_square, interaction_features, pearson, ChiSquareResult, ProgressBuckets, StatsError,
};
use crate::courselog::{CourseLog, TraitScores};

/// Outcome of one chi-square test, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChiOutcome {
    Computed(ChiSquareResult),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareEntry {
    pub attribute: String,
    pub outcome: ChiOutcome,
}

/// Outcome of one trait correlation, or the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PearsonOutcome {
    Computed { r: f64, n: usize },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonEntry {
    pub trait_name: String,
    pub outcome: PearsonOutcome,
}

/// One engagement row per student, ordered by progress then id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRow {
    pub student_id: String,
    pub progress: u32,
    pub completer: bool,
    pub message_count: u32,
    pub msgs_per_chapter: f64,
    pub avg_msg_len: f64,
}

/// Mean engagement split by course outcome; None for empty groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMeans {
    pub completer_count: usize,
    pub dropper_count: usize,
    pub completer_msgs_per_chapter: Option<f64>,
    pub dropper_msgs_per_chapter: Option<f64>,
    pub completer_avg_msg_len: Option<f64>,
    pub dropper_avg_msg_len: Option<f64>,
}

/// Full dropout-correlate report for one course run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub course_id: String,
    pub students: usize,
    pub traits_missing: usize,
    pub chi_square: Vec<ChiSquareEntry>,
    pub pearson: Vec<PearsonEntry>,
    pub engagement: Vec<EngagementRow>,
    pub outcome_means: OutcomeMeans,
}

/// Separator between the readable summary and the JSON block in rendered
/// report documents.
pub const TABLE_MARKER: &str = "---TABLE JSON---";

/// Build the correlation report for a parsed course log.
pub fn correlation_report(
    log: &CourseLog,
    buckets: &ProgressBuckets,
) -> Result<CorrelationReport, StatsError> {
    if log.students.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let progress: Vec<u32> =
        log.students.iter().map(|s| log.completions[&s.student_id].progress).collect();

    let attributes: [(&str, fn(&crate::courselog::StudentProfile) -> &str); 4] = [
        ("college", |s| &s.college),
        ("major", |s| &s.major),
        ("gender", |s| &s.gender),
        ("grade", |s| &s.grade),
    ];
    let mut chi_entries = Vec::new();
    for (name, get) in attributes {
        let labels: Vec<String> = log.students.iter().map(|s| get(s).to_string()).collect();
        let outcome = match chi_square(&labels, &progress, buckets) {
            Ok(result) => ChiOutcome::Computed(result),
            Err(e @ (StatsError::DegenerateAxis { .. } | StatsError::EmptyInput)) => {
                ChiOutcome::Skipped { reason: e.to_string() }
            }
            Err(e) => return Err(e),
        };
        chi_entries.push(ChiSquareEntry { attribute: name.to_string(), outcome });
    }

    let surveyed: Vec<(&TraitScores, u32)> = log
        .students
        .iter()
        .zip(&progress)
        .filter_map(|(s, &p)| s.traits.as_ref().map(|t| (t, p)))
        .collect();
    let traits_missing = log.students.len() - surveyed.len();
    let mut pearson_entries = Vec::new();
    for (idx, name) in TraitScores::NAMES.iter().enumerate() {
        let x: Vec<f64> = surveyed.iter().map(|(t, _)| f64::from(t.as_array()[idx])).collect();
        let y: Vec<f64> = surveyed.iter().map(|(_, p)| f64::from(*p)).collect();
        let outcome = match pearson(&x, &y) {
            Ok(result) => PearsonOutcome::Computed { r: result.r, n: result.n },
            Err(e @ (StatsError::ZeroVariance { .. } | StatsError::TooFewSamples { .. })) => {
                PearsonOutcome::Skipped { reason: e.to_string() }
            }
            Err(e) => return Err(e),
        };
        pearson_entries.push(PearsonEntry { trait_name: name.to_string(), outcome });
    }

    let mut engagement = Vec::new();
    for s in &log.students {
        let f = interaction_features(log, &s.student_id)?;
        let state = &log.completions[&s.student_id];
        engagement.push(EngagementRow {
            student_id: s.student_id.clone(),
            progress: state.progress,
            completer: state.is_completer(),
            message_count: f.message_count,
            msgs_per_chapter: f.msgs_per_chapter,
            avg_msg_len: f.avg_msg_len,
        });
    }
    engagement.sort_by(|a, b| a.progress.cmp(&b.progress).then(a.student_id.cmp(&b.student_id)));

    let mean = |rows: &[&EngagementRow], get: fn(&EngagementRow) -> f64| -> Option<f64> {
        if rows.is_empty() {
            None
        } else {
            Some(rows.iter().map(|r| get(r)).sum::<f64>() / rows.len() as f64)
        }
    };
    let completers: Vec<&EngagementRow> = engagement.iter().filter(|r| r.completer).collect();
    let droppers: Vec<&EngagementRow> = engagement.iter().filter(|r| !r.completer).collect();
    let outcome_means = OutcomeMeans {
        completer_count: completers.len(),
        dropper_count: droppers.len(),
        completer_msgs_per_chapter: mean(&completers, |r| r.msgs_per_chapter),
        dropper_msgs_per_chapter: mean(&droppers, |r| r.msgs_per_chapter),
        completer_avg_msg_len: mean(&completers, |r| r.avg_msg_len),
        dropper_avg_msg_len: mean(&droppers, |r| r.avg_msg_len),
    };

    Ok(CorrelationReport {
        course_id: log.course_id.clone(),
        students: log.students.len(),
        traits_missing,
        chi_square: chi_entries,
        pearson: pearson_entries,
        engagement,
        outcome_means,
    })
}

impl CorrelationReport {
    /// Render the report as a document: a human-readable summary followed by
    /// a machine-readable JSON block.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str("RETENTION CORRELATION REPORT\n");
        out.push_str(&format!("course: {}\n", self.course_id));
        out.push_str(&format!(
            "students: {} (trait surveys missing: {})\n\n",
            self.students, self.traits_missing
        ));

        out.push_str("[chi-square vs progress buckets]\n");
        for entry in &self.chi_square {
            match &entry.outcome {
                ChiOutcome::Computed(r) => out.push_str(&format!(
                    "{}: chi2={:.4} dof={} p={:.6}\n",
                    entry.attribute, r.statistic, r.dof, r.p_value
                )),
                ChiOutcome::Skipped { reason } => {
                    out.push_str(&format!("{}: skipped ({reason})\n", entry.attribute))
                }
            }
        }

        out.push_str("\n[pearson trait scores vs progress]\n");
        for entry in &self.pearson {
            match &entry.outcome {
                PearsonOutcome::Computed { r, n } => {
                    out.push_str(&format!("{}: r={r:.4} n={n}\n", entry.trait_name))
                }
                PearsonOutcome::Skipped { reason } => {
                    out.push_str(&format!("{}: skipped ({reason})\n", entry.trait_name))
                }
            }
        }

        out.push_str("\n[engagement by outcome]\n");
        let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        out.push_str(&format!(
            "completers (n={}): msgs/chapter={} avg_msg_len={}\n",
            self.outcome_means.completer_count,
            fmt_opt(self.outcome_means.completer_msgs_per_chapter),
            fmt_opt(self.outcome_means.completer_avg_msg_len),
        ));
        out.push_str(&format!(
            "droppers (n={}): msgs/chapter={} avg_msg_len={}\n",
            self.outcome_means.dropper_count,
            fmt_opt(self.outcome_means.dropper_msgs_per_chapter),
            fmt_opt(self.outcome_means.dropper_avg_msg_len),
        ));

        out.push('\n');
        out.push_str(TABLE_MARKER);
        out.push('\n');
        out.push_str(&serde_json::to_string(self).expect("report serializes"));
        out.push('\n');
        out
    }

    /// Parse the machine-readable block back out of a rendered document.
    pub fn from_document(doc: &str) -> Option<CorrelationReport> {
        let json = doc.split(TABLE_MARKER).nth(1)?.trim();
        serde_json::from_str(json).ok()
    }
}
