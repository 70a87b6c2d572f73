//! Course interaction log domain model.
//!
//! A course log captures one course run: the student roster, every message
//! exchanged with the in-course agents, login events, and chapter completion
//! marks. Completion marks must be sequential (chapter k requires 1..k-1),
//! which makes a student's progress a single number and their drop chapter
//! the first chapter they never finished.

mod schema;
mod transcript;

pub use schema::{emit_course_log, parse_course_log, LogError};
pub use transcript::{serialize_transcript, TranscriptStats, NO_PRIOR_INTERACTIONS};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Milliseconds per course day. Day d covers timestamps
/// `[(d-1) * DAY_MS, d * DAY_MS)`, so day numbering starts at 1.
pub const DAY_MS: i64 = 86_400_000;

/// Day index (1-based) containing a timestamp.
pub fn day_of_timestamp(timestamp_ms: i64) -> u32 {
    (timestamp_ms.div_euclid(DAY_MS) + 1).max(1) as u32
}

/// Who authored an interaction record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorRole {
    Student,
    AiTeacher,
    AiTa,
    AiPeer,
}

impl AuthorRole {
    /// Label used in serialized transcripts.
    pub fn label(self) -> &'static str {
        match self {
            AuthorRole::Student => "student",
            AuthorRole::AiTeacher => "ai_teacher",
            AuthorRole::AiTa => "ai_ta",
            AuthorRole::AiPeer => "ai_peer",
        }
    }
}

/// Five self-reported learner trait scores, each on a 1..=5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraitScores {
    /// Learning motivation.
    #[serde(rename = "LM")]
    pub lm: u8,
    /// Academic self-efficacy.
    #[serde(rename = "ASE")]
    pub ase: u8,
    /// Learning persistence.
    #[serde(rename = "LP")]
    pub lp: u8,
    /// Self-regulation.
    #[serde(rename = "SR")]
    pub sr: u8,
    /// Prior familiarity with LLM tools.
    #[serde(rename = "LLMF")]
    pub llmf: u8,
}

impl TraitScores {
    /// Scores in a fixed order, for feature vectors and reports.
    pub fn as_array(&self) -> [u8; 5] {
        [self.lm, self.ase, self.lp, self.sr, self.llmf]
    }

    /// Names matching [`TraitScores::as_array`] order.
    pub const NAMES: [&'static str; 5] = ["LM", "ASE", "LP", "SR", "LLMF"];

    fn validate(&self) -> Result<(), String> {
        for (name, score) in Self::NAMES.iter().zip(self.as_array()) {
            if !(1..=5).contains(&score) {
                return Err(format!("trait {name} score {score} outside 1..=5"));
            }
        }
        Ok(())
    }
}

/// Roster entry for one enrolled student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: String,
    pub college: String,
    pub major: String,
    pub gender: String,
    pub grade: String,
    /// None when the student skipped the trait survey.
    pub traits: Option<TraitScores>,
}

/// One chat message inside a chapter session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub student_id: String,
    /// Chapter the session belongs to, 1-based.
    pub chapter: u32,
    pub timestamp_ms: i64,
    pub author_role: AuthorRole,
    pub text: String,
}

/// A login event on a course day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub student_id: String,
    /// Course day of the login, 1-based.
    pub day_index: u32,
    pub timestamp_ms: i64,
}

/// A declared chapter completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionMark {
    pub student_id: String,
    pub chapter: u32,
    pub timestamp_ms: i64,
}

/// Derived completion status for one student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionState {
    pub student_id: String,
    /// Chapters completed; always `{1..=progress}`.
    pub completed: BTreeSet<u32>,
    /// Number of chapters completed.
    pub progress: u32,
    /// First chapter never completed; None for course completers.
    pub drop_chapter: Option<u32>,
}

impl CompletionState {
    pub fn is_completer(&self) -> bool {
        self.drop_chapter.is_none()
    }
}

/// A fully validated course run.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseLog {
    pub course_id: String,
    /// Number of chapters in the course.
    pub chapter_count: u32,
    /// One title per chapter, index 0 is chapter 1.
    pub chapter_titles: Vec<String>,
    pub students: Vec<StudentProfile>,
    /// All interaction records, sorted by timestamp (stable).
    pub records: Vec<InteractionRecord>,
    pub events: Vec<SessionEvent>,
    /// Raw completion marks, sorted by timestamp (stable).
    pub completion_marks: Vec<CompletionMark>,
    /// Completion status per student, derived from the marks.
    pub completions: BTreeMap<String, CompletionState>,
}

impl CourseLog {
    /// Roster lookup by id.
    pub fn student(&self, student_id: &str) -> Option<&StudentProfile> {
        self.students.iter().find(|s| s.student_id == student_id)
    }

    /// Title of a 1-based chapter, if in range.
    pub fn chapter_title(&self, chapter: u32) -> Option<&str> {
        if chapter == 0 {
            return None;
        }
        self.chapter_titles.get(chapter as usize - 1).map(String::as_str)
    }

    /// All interaction records authored by or addressed to one student.
    pub fn records_for(&self, student_id: &str) -> Vec<&InteractionRecord> {
        self.records.iter().filter(|r| r.student_id == student_id).collect()
    }

    /// Interaction history strictly before chapter `c_h`.
    ///
    /// `c_h` must lie in `1..=chapter_count`; `c_h = 1` yields an empty
    /// history. Records keep their time order.
    pub fn history_slice(&self, student_id: &str, c_h: u32) -> Result<Vec<&InteractionRecord>, LogError> {
        if self.student(student_id).is_none() {
            return Err(LogError::UnknownStudent { student_id: student_id.to_string() });
        }
        if c_h < 1 || c_h > self.chapter_count {
            return Err(LogError::ChapterOutOfRange { chapter: c_h, max: self.chapter_count });
        }
        Ok(self
            .records
            .iter()
            .filter(|r| r.student_id == student_id && r.chapter < c_h)
            .collect())
    }
}

/// Compute progress and drop chapter from a student's completion marks.
///
/// The marked set must be a sequential prefix `{1..=n}`; gaps are rejected.
/// A student who completed all `chapter_count` chapters has no drop chapter.
pub fn compute_completion(
    student_id: &str,
    marked: &BTreeSet<u32>,
    chapter_count: u32,
) -> Result<CompletionState, LogError> {
    for &chapter in marked {
        if chapter < 1 || chapter > chapter_count {
            return Err(LogError::ChapterOutOfRange { chapter, max: chapter_count });
        }
    }
    let progress = marked.len() as u32;
    for expected in 1..=progress {
        if !marked.contains(&expected) {
            return Err(LogError::NonSequentialCompletion {
                student_id: student_id.to_string(),
                missing: expected,
            });
        }
    }
    let drop_chapter = if progress == chapter_count { None } else { Some(progress + 1) };
    Ok(CompletionState {
        student_id: student_id.to_string(),
        completed: marked.clone(),
        progress,
        drop_chapter,
    })
}
