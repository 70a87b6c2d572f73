//! Plain-text transcript rendering for model prompts.
//!
//! Transcripts group a student's records by chapter under `[CHAPTER k]`
//! headers, keeping time order within each chapter. The same format is
//! parsed back by [`TranscriptStats`] to recover engagement numbers from a
//! rendered transcript alone.

use super::InteractionRecord;

/// Placeholder transcript for a student with no history yet.
pub const NO_PRIOR_INTERACTIONS: &str = "[NO PRIOR INTERACTIONS]";

/// Render records as a chapter-grouped plain-text transcript.
///
/// Records are expected in time order; grouping by chapter is stable, so
/// each chapter section keeps its own time order. Newlines inside message
/// text are flattened to spaces to keep one message per line.
pub fn serialize_transcript(records: &[&InteractionRecord], chapter_titles: &[String]) -> String {
    if records.is_empty() {
        return NO_PRIOR_INTERACTIONS.to_string();
    }
    let mut ordered: Vec<&InteractionRecord> = records.to_vec();
    ordered.sort_by_key(|r| r.chapter);

    let mut out = String::new();
    let mut current_chapter = 0;
    for record in ordered {
        if record.chapter != current_chapter {
            current_chapter = record.chapter;
            let title = current_chapter
                .checked_sub(1)
                .and_then(|i| chapter_titles.get(i as usize))
                .map(String::as_str)
                .unwrap_or("");
            out.push_str(&format!("[CHAPTER {current_chapter}] {title}\n"));
        }
        let flat = record.text.replace("\r\n", " ").replace(['\n', '\r'], " ");
        out.push_str(&format!("{}: {}\n", record.author_role.label(), flat));
    }
    out.pop();
    out
}

/// Engagement numbers recovered from a rendered transcript.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptStats {
    /// Student-authored messages in the transcript.
    pub student_msg_count: u32,
    /// Chapters containing at least one student message.
    pub chapters_engaged: u32,
    /// Total characters across student messages.
    pub student_chars: u64,
}

impl TranscriptStats {
    /// Scan a transcript in the [`serialize_transcript`] format.
    ///
    /// Unparseable lines are ignored, so the scan never fails; the empty
    /// placeholder yields all zeros.
    pub fn scan(transcript: &str) -> TranscriptStats {
        let mut student_msg_count = 0u32;
        let mut student_chars = 0u64;
        let mut chapters_engaged = 0u32;
        let mut current_counted = true;
        for line in transcript.lines() {
            if line.starts_with("[CHAPTER ") {
                current_counted = false;
            } else if let Some(text) = line.strip_prefix("student: ") {
                student_msg_count += 1;
                student_chars += text.chars().count() as u64;
                if !current_counted {
                    chapters_engaged += 1;
                    current_counted = true;
                }
            }
        }
        TranscriptStats { student_msg_count, chapters_engaged, student_chars }
    }

    /// Student messages per engaged chapter; 0 when there are none.
    pub fn msgs_per_chapter(&self) -> f64 {
        if self.chapters_engaged == 0 {
            0.0
        } else {
            f64::from(self.student_msg_count) / f64::from(self.chapters_engaged)
        }
    }

    /// Mean characters per student message; 0 when there are none.
    pub fn mean_msg_len(&self) -> f64 {
        if self.student_msg_count == 0 {
            0.0
        } else {
            self.student_chars as f64 / f64::from(self.student_msg_count)
        }
    }
}
