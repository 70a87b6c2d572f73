//! Line-delimited JSON wire format for course logs.
//!
//! The first line is a `course.meta` header; every following line is one
//! roster entry, message, login, or chapter completion mark. Parsing
//! validates referential integrity and completion sequentiality, and
//! normalizes record order, so `parse_course_log(emit_course_log(log))`
//! reproduces `log` exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    compute_completion, day_of_timestamp, AuthorRole, CompletionMark, CourseLog,
    InteractionRecord, SessionEvent, StudentProfile, TraitScores,
};

/// Errors raised while parsing, validating, or querying course logs.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("line {line}: unknown student `{student_id}`")]
    Referential { line: usize, student_id: String },
    #[error("unknown student `{student_id}`")]
    UnknownStudent { student_id: String },
    #[error("chapter {chapter} outside 1..={max}")]
    ChapterOutOfRange { chapter: u32, max: u32 },
    #[error("student `{student_id}` completed later chapters without chapter {missing}")]
    NonSequentialCompletion { student_id: String, missing: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LogLine {
    #[serde(rename = "course.meta")]
    CourseMeta {
        course_id: String,
        chapter_count: u32,
        chapter_titles: Vec<String>,
    },
    Student {
        student_id: String,
        college: String,
        major: String,
        gender: String,
        grade: String,
        #[serde(default)]
        traits: Option<TraitScores>,
    },
    Message {
        student_id: String,
        chapter: u32,
        timestamp_ms: i64,
        author_role: AuthorRole,
        text: String,
    },
    Login {
        student_id: String,
        day_index: u32,
        timestamp_ms: i64,
    },
    ChapterComplete {
        student_id: String,
        chapter: u32,
        timestamp_ms: i64,
    },
}

/// Parse and validate a course log from its line-delimited JSON form.
pub fn parse_course_log(input: &str) -> Result<CourseLog, LogError> {
    let mut lines = Vec::new();
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(raw)
            .map_err(|e| LogError::Parse { line: line_no, msg: e.to_string() })?;
        lines.push((line_no, parsed));
    }

    let mut iter = lines.into_iter();
    let (course_id, chapter_count, chapter_titles) = match iter.next() {
        Some((line, LogLine::CourseMeta { course_id, chapter_count, chapter_titles })) => {
            if chapter_count == 0 {
                return Err(LogError::Validation { line, msg: "chapter_count must be at least 1".into() });
            }
            if chapter_titles.len() != chapter_count as usize {
                return Err(LogError::Validation {
                    line,
                    msg: format!(
                        "expected {chapter_count} chapter titles, found {}",
                        chapter_titles.len()
                    ),
                });
            }
            if course_id.trim().is_empty() {
                return Err(LogError::Validation { line, msg: "course_id must be non-empty".into() });
            }
            (course_id, chapter_count, chapter_titles)
        }
        Some((line, _)) => {
            return Err(LogError::Validation { line, msg: "first line must be the course.meta header".into() })
        }
        None => return Err(LogError::Parse { line: 1, msg: "empty input, expected course.meta header".into() }),
    };

    let mut students: Vec<StudentProfile> = Vec::new();
    let mut roster: BTreeSet<String> = BTreeSet::new();
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut events: Vec<SessionEvent> = Vec::new();
    let mut completion_marks: Vec<CompletionMark> = Vec::new();
    // (line, mark index) kept for referential checks after the roster is known.
    let mut pending_refs: Vec<(usize, String)> = Vec::new();
    let mut marked: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();

    for (line, entry) in iter {
        match entry {
            LogLine::CourseMeta { .. } => {
                return Err(LogError::Validation { line, msg: "duplicate course.meta header".into() })
            }
            LogLine::Student { student_id, college, major, gender, grade, traits } => {
                if student_id.trim().is_empty() {
                    return Err(LogError::Validation { line, msg: "student_id must be non-empty".into() });
                }
                if !roster.insert(student_id.clone()) {
                    return Err(LogError::Validation {
                        line,
                        msg: format!("duplicate student `{student_id}`"),
                    });
                }
                if let Some(scores) = &traits {
                    scores
                        .validate()
                        .map_err(|msg| LogError::Validation { line, msg })?;
                }
                students.push(StudentProfile { student_id, college, major, gender, grade, traits });
            }
            LogLine::Message { student_id, chapter, timestamp_ms, author_role, text } => {
                if chapter < 1 || chapter > chapter_count {
                    return Err(LogError::Validation {
                        line,
                        msg: format!("message chapter {chapter} outside 1..={chapter_count}"),
                    });
                }
                if timestamp_ms < 0 {
                    return Err(LogError::Validation { line, msg: "timestamp_ms must be non-negative".into() });
                }
                if author_role == AuthorRole::Student && text.trim().is_empty() {
                    return Err(LogError::Validation {
                        line,
                        msg: "student message text must be non-empty".into(),
                    });
                }
                pending_refs.push((line, student_id.clone()));
                records.push(InteractionRecord { student_id, chapter, timestamp_ms, author_role, text });
            }
            LogLine::Login { student_id, day_index, timestamp_ms } => {
                if day_index == 0 {
                    return Err(LogError::Validation { line, msg: "day_index must be at least 1".into() });
                }
                if timestamp_ms < 0 {
                    return Err(LogError::Validation { line, msg: "timestamp_ms must be non-negative".into() });
                }
                if day_of_timestamp(timestamp_ms) != day_index {
                    return Err(LogError::Validation {
                        line,
                        msg: format!(
                            "login timestamp {timestamp_ms} falls on day {}, not day {day_index}",
                            day_of_timestamp(timestamp_ms)
                        ),
                    });
                }
                pending_refs.push((line, student_id.clone()));
                events.push(SessionEvent { student_id, day_index, timestamp_ms });
            }
            LogLine::ChapterComplete { student_id, chapter, timestamp_ms } => {
                if chapter < 1 || chapter > chapter_count {
                    return Err(LogError::Validation {
                        line,
                        msg: format!("completion chapter {chapter} outside 1..={chapter_count}"),
                    });
                }
                if timestamp_ms < 0 {
                    return Err(LogError::Validation { line, msg: "timestamp_ms must be non-negative".into() });
                }
                if !marked.entry(student_id.clone()).or_default().insert(chapter) {
                    return Err(LogError::Validation {
                        line,
                        msg: format!("duplicate completion of chapter {chapter} by `{student_id}`"),
                    });
                }
                pending_refs.push((line, student_id.clone()));
                completion_marks.push(CompletionMark { student_id, chapter, timestamp_ms });
            }
        }
    }

    for (line, student_id) in pending_refs {
        if !roster.contains(&student_id) {
            return Err(LogError::Referential { line, student_id });
        }
    }

    records.sort_by_key(|r| r.timestamp_ms);
    events.sort_by_key(|e| e.timestamp_ms);
    completion_marks.sort_by_key(|m| m.timestamp_ms);

    let empty = BTreeSet::new();
    let mut completions = BTreeMap::new();
    for profile in &students {
        let set = marked.get(&profile.student_id).unwrap_or(&empty);
        let state = compute_completion(&profile.student_id, set, chapter_count)?;
        completions.insert(profile.student_id.clone(), state);
    }

    Ok(CourseLog {
        course_id,
        chapter_count,
        chapter_titles,
        students,
        records,
        events,
        completion_marks,
        completions,
    })
}

/// Serialize a course log back to its line-delimited JSON form.
///
/// Sections are emitted in a canonical order (header, roster, messages,
/// logins, completion marks), each in stored order.
pub fn emit_course_log(log: &CourseLog) -> String {
    let mut out = String::new();
    let mut push = |line: &LogLine| {
        out.push_str(&serde_json::to_string(line).expect("log line serializes"));
        out.push('\n');
    };
    push(&LogLine::CourseMeta {
        course_id: log.course_id.clone(),
        chapter_count: log.chapter_count,
        chapter_titles: log.chapter_titles.clone(),
    });
    for s in &log.students {
        push(&LogLine::Student {
            student_id: s.student_id.clone(),
            college: s.college.clone(),
            major: s.major.clone(),
            gender: s.gender.clone(),
            grade: s.grade.clone(),
            traits: s.traits,
        });
    }
    for r in &log.records {
        push(&LogLine::Message {
            student_id: r.student_id.clone(),
            chapter: r.chapter,
            timestamp_ms: r.timestamp_ms,
            author_role: r.author_role,
            text: r.text.clone(),
        });
    }
    for e in &log.events {
        push(&LogLine::Login {
            student_id: e.student_id.clone(),
            day_index: e.day_index,
            timestamp_ms: e.timestamp_ms,
        });
    }
    for m in &log.completion_marks {
        push(&LogLine::ChapterComplete {
            student_id: m.student_id.clone(),
            chapter: m.chapter,
            timestamp_ms: m.timestamp_ms,
        });
    }
    out
}
