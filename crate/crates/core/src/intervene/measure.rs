//! Intervention effect measurement.
//!
//! Two views of the aftermath: a cohort-wide login count around the
//! intervention day, and a comparison of the students who returned, split by
//! whether they were emailed. The comparison reads only data from before the
//! post window so post-intervention behavior cannot leak into the profile of
//! who was recalled.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::courselog::{AuthorRole, CourseLog, SessionEvent, DAY_MS};

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("unknown student {student_id}")]
    UnknownStudent { student_id: String },
}

/// Login counts in the windows around an intervention day. The boundary day
/// belongs to the pre window; post starts the next day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginDelta {
    pub pre_count: u64,
    pub post_count: u64,
}

/// Count logins in [day-w+1, day] and [day+1, day+w].
pub fn login_delta(events: &[SessionEvent], intervention_day: u32, window_days: u32) -> LoginDelta {
    let d = intervention_day as i64;
    let w = window_days as i64;
    let mut delta = LoginDelta { pre_count: 0, post_count: 0 };
    for event in events {
        let day = event.day_index as i64;
        if day > d - w && day <= d {
            delta.pre_count += 1;
        } else if day > d && day <= d + w {
            delta.post_count += 1;
        }
    }
    delta
}

/// Students who logged in during [day+1, day+w], sorted and deduplicated.
pub fn post_window_students(
    events: &[SessionEvent],
    intervention_day: u32,
    window_days: u32,
) -> BTreeSet<String> {
    let d = intervention_day as i64;
    let w = window_days as i64;
    events
        .iter()
        .filter(|e| {
            let day = e.day_index as i64;
            day > d && day <= d + w
        })
        .map(|e| e.student_id.clone())
        .collect()
}

/// Pre-intervention activity profile of one group of returning students.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub label: String,
    pub headcount: usize,
    /// Mean of analysis_day minus last pre-window login day, over students
    /// who logged in at least once before; None when no student did.
    pub offline_days_mean: Option<f64>,
    /// How many students contribute to the offline-days mean.
    pub offline_days_count: usize,
    /// Mean chapters completed before the analysis day.
    pub chapter_mean: Option<f64>,
    /// Mean student messages sent before the analysis day.
    pub message_count_mean: Option<f64>,
    /// Mean words per message, per student; silent students count as 0.
    pub message_length_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub analysis_day: u32,
    pub self_initiated: GroupRow,
    pub recalled: GroupRow,
}

struct StudentActivity {
    offline_days: Option<f64>,
    chapters: f64,
    message_count: f64,
    words_per_message: f64,
}

fn activity_before(log: &CourseLog, student_id: &str, analysis_day: u32) -> StudentActivity {
    let cutoff_ms = analysis_day as i64 * DAY_MS;

    let last_login = log
        .events
        .iter()
        .filter(|e| e.student_id == student_id && e.day_index <= analysis_day)
        .map(|e| e.day_index)
        .max();
    let offline_days = last_login.map(|day| (analysis_day - day) as f64);

    let chapters = log
        .completion_marks
        .iter()
        .filter(|m| m.student_id == student_id && m.timestamp_ms < cutoff_ms)
        .count() as f64;

    let mut message_count = 0u64;
    let mut words = 0u64;
    for record in &log.records {
        if record.student_id == student_id
            && record.author_role == AuthorRole::Student
            && record.timestamp_ms < cutoff_ms
        {
            message_count += 1;
            words += record.text.split_whitespace().count() as u64;
        }
    }
    let words_per_message =
        if message_count == 0 { 0.0 } else { words as f64 / message_count as f64 };

    StudentActivity {
        offline_days,
        chapters,
        message_count: message_count as f64,
        words_per_message,
    }
}

fn group_row(log: &CourseLog, label: &str, members: &BTreeSet<String>, analysis_day: u32) -> GroupRow {
    let mut offline_sum = 0.0;
    let mut offline_n = 0usize;
    let mut chapter_sum = 0.0;
    let mut msg_sum = 0.0;
    let mut len_sum = 0.0;
    for id in members {
        let a = activity_before(log, id, analysis_day);
        if let Some(days) = a.offline_days {
            offline_sum += days;
            offline_n += 1;
        }
        chapter_sum += a.chapters;
        msg_sum += a.message_count;
        len_sum += a.words_per_message;
    }
    let n = members.len();
    GroupRow {
        label: label.to_string(),
        headcount: n,
        offline_days_mean: if offline_n == 0 { None } else { Some(offline_sum / offline_n as f64) },
        offline_days_count: offline_n,
        chapter_mean: if n == 0 { None } else { Some(chapter_sum / n as f64) },
        message_count_mean: if n == 0 { None } else { Some(msg_sum / n as f64) },
        message_length_mean: if n == 0 { None } else { Some(len_sum / n as f64) },
    }
}

/// Split the returning students by intervention status and profile each
/// group on pre-intervention data only.
pub fn group_comparison(
    log: &CourseLog,
    returned: &BTreeSet<String>,
    intervened: &BTreeSet<String>,
    analysis_day: u32,
) -> Result<CohortComparison, MeasureError> {
    for id in returned {
        if log.student(id).is_none() {
            return Err(MeasureError::UnknownStudent { student_id: id.clone() });
        }
    }
    let recalled: BTreeSet<String> = returned.intersection(intervened).cloned().collect();
    let self_initiated: BTreeSet<String> = returned.difference(intervened).cloned().collect();
    Ok(CohortComparison {
        analysis_day,
        self_initiated: group_row(log, "self_initiated", &self_initiated, analysis_day),
        recalled: group_row(log, "recalled", &recalled, analysis_day),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::courselog::parse_course_log;

    fn event(id: &str, day: u32) -> SessionEvent {
        SessionEvent {
            student_id: id.into(),
            day_index: day,
            timestamp_ms: (day as i64 - 1) * DAY_MS + 1000,
        }
    }

    #[test]
    fn login_windows_split_on_the_intervention_day() {
        let mut events = Vec::new();
        for day in [63, 63, 64, 65] {
            events.push(event("a", day));
        }
        for day in [66, 67, 68, 68, 68] {
            events.push(event("b", day));
        }
        // Outside both windows on each side.
        events.push(event("a", 62));
        events.push(event("b", 69));
        let delta = login_delta(&events, 65, 3);
        assert_eq!(delta, LoginDelta { pre_count: 4, post_count: 5 });
    }

    #[test]
    fn boundary_day_login_lands_in_the_pre_window() {
        let events = vec![event("a", 65)];
        assert_eq!(login_delta(&events, 65, 3), LoginDelta { pre_count: 1, post_count: 0 });
        let events = vec![event("a", 66)];
        assert_eq!(login_delta(&events, 65, 3), LoginDelta { pre_count: 0, post_count: 1 });
    }

    #[test]
    fn no_events_counts_nothing() {
        assert_eq!(login_delta(&[], 65, 3), LoginDelta { pre_count: 0, post_count: 0 });
    }

    #[test]
    fn window_wider_than_the_calendar_never_underflows() {
        let events = vec![event("a", 1), event("a", 2)];
        assert_eq!(login_delta(&events, 2, 10), LoginDelta { pre_count: 2, post_count: 0 });
    }

    #[test]
    fn post_window_students_deduplicates() {
        let events = vec![event("a", 66), event("a", 67), event("b", 68), event("c", 65)];
        let returned = post_window_students(&events, 65, 3);
        assert_eq!(returned.into_iter().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    fn ts(day: u32, offset: i64) -> i64 {
        (day as i64 - 1) * DAY_MS + offset
    }

    fn fixture_log() -> CourseLog {
        // Four students around an analysis day of 10:
        //   s1: last login day 8, 2 chapters done, 2 messages (3 and 5 words)
        //   s2: last login day 4, 1 chapter, 1 message (4 words)
        //   s3: never logged in, nothing done
        //   s4: active after the analysis day only (leakage bait)
        let mut lines = vec![
            r#"{"kind":"course.meta","course_id":"c1","chapter_count":3,"chapter_titles":["A","B","C"]}"#.to_string(),
        ];
        for id in ["s1", "s2", "s3", "s4"] {
            lines.push(format!(
                r#"{{"kind":"student","student_id":"{id}","college":"Eng","major":"CS","gender":"F","grade":"2027"}}"#
            ));
        }
        let mut push_login = |id: &str, day: u32| {
            lines.push(format!(
                r#"{{"kind":"login","student_id":"{id}","day_index":{day},"timestamp_ms":{}}}"#,
                ts(day, 500)
            ));
        };
        push_login("s1", 2);
        push_login("s1", 8);
        push_login("s2", 4);
        push_login("s4", 12);
        let mut push_msg = |id: &str, chapter: u32, day: u32, text: &str| {
            lines.push(format!(
                r#"{{"kind":"message","student_id":"{id}","chapter":{chapter},"timestamp_ms":{},"author_role":"student","text":"{text}"}}"#,
                ts(day, 600)
            ));
        };
        push_msg("s1", 1, 2, "what is a neuron");
        push_msg("s1", 2, 8, "how do layers connect to each other");
        push_msg("s2", 1, 4, "this chapter is hard");
        push_msg("s4", 1, 12, "finally back to studying again now");
        let mut push_mark = |id: &str, chapter: u32, day: u32| {
            lines.push(format!(
                r#"{{"kind":"chapter_complete","student_id":"{id}","chapter":{chapter},"timestamp_ms":{}}}"#,
                ts(day, 700)
            ));
        };
        push_mark("s1", 1, 2);
        push_mark("s1", 2, 8);
        push_mark("s2", 1, 4);
        push_mark("s4", 1, 12);
        parse_course_log(&(lines.join("\n") + "\n")).unwrap()
    }

    #[test]
    fn group_rows_match_hand_computed_means() {
        let log = fixture_log();
        let returned: BTreeSet<String> =
            ["s1", "s2", "s3"].iter().map(|s| s.to_string()).collect();
        let intervened: BTreeSet<String> = ["s2", "s3"].iter().map(|s| s.to_string()).collect();
        let cmp = group_comparison(&log, &returned, &intervened, 10).unwrap();

        let s = &cmp.self_initiated;
        assert_eq!(s.headcount, 1);
        assert_eq!(s.offline_days_mean, Some(2.0));
        assert_eq!(s.chapter_mean, Some(2.0));
        assert_eq!(s.message_count_mean, Some(2.0));
        // s1 wrote 4 and 7 words: 11/2 per message.
        assert_eq!(s.message_length_mean, Some(5.5));

        let r = &cmp.recalled;
        assert_eq!(r.headcount, 2);
        // s3 never logged in: excluded from the offline mean, kept elsewhere.
        assert_eq!(r.offline_days_count, 1);
        assert_eq!(r.offline_days_mean, Some(6.0));
        assert_eq!(r.chapter_mean, Some(0.5));
        assert_eq!(r.message_count_mean, Some(0.5));
        assert_eq!(r.message_length_mean, Some(2.0));

        assert_eq!(s.headcount + r.headcount, returned.len());
    }

    #[test]
    fn activity_after_the_analysis_day_is_invisible() {
        let log = fixture_log();
        let returned: BTreeSet<String> = ["s4".to_string()].into_iter().collect();
        let cmp = group_comparison(&log, &returned, &BTreeSet::new(), 10).unwrap();
        let s = &cmp.self_initiated;
        assert_eq!(s.headcount, 1);
        assert_eq!(s.offline_days_mean, None, "day-12 login must not count");
        assert_eq!(s.chapter_mean, Some(0.0));
        assert_eq!(s.message_count_mean, Some(0.0));
        assert_eq!(s.message_length_mean, Some(0.0));
    }

    #[test]
    fn identical_groups_produce_identical_rows() {
        let log = fixture_log();
        let returned: BTreeSet<String> = ["s1", "s2"].iter().map(|s| s.to_string()).collect();
        let all = group_comparison(&log, &returned, &BTreeSet::new(), 10).unwrap();
        let none = group_comparison(&log, &returned, &returned, 10).unwrap();
        let mut a = all.self_initiated.clone();
        let mut b = none.recalled.clone();
        a.label = String::new();
        b.label = String::new();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_group_reports_undefined_means() {
        let log = fixture_log();
        let returned: BTreeSet<String> = ["s1".to_string()].into_iter().collect();
        let cmp = group_comparison(&log, &returned, &returned, 10).unwrap();
        let s = &cmp.self_initiated;
        assert_eq!(s.headcount, 0);
        assert_eq!(s.offline_days_mean, None);
        assert_eq!(s.chapter_mean, None);
        assert_eq!(s.message_count_mean, None);
        assert_eq!(s.message_length_mean, None);
    }

    #[test]
    fn unknown_returning_student_is_rejected() {
        let log = fixture_log();
        let returned: BTreeSet<String> = ["ghost".to_string()].into_iter().collect();
        let err = group_comparison(&log, &returned, &BTreeSet::new(), 10).unwrap_err();
        assert!(matches!(err, MeasureError::UnknownStudent { .. }));
    }

    #[test]
    fn group_means_match_a_second_pass_aggregation() {
        let log = fixture_log();
        let returned: BTreeSet<String> =
            ["s1", "s2", "s3"].iter().map(|s| s.to_string()).collect();
        let intervened: BTreeSet<String> = ["s2", "s3"].iter().map(|s| s.to_string()).collect();
        let analysis_day = 10u32;
        let cmp = group_comparison(&log, &returned, &intervened, analysis_day).unwrap();

        // Independent aggregation straight off the parsed log.
        let cutoff = analysis_day as i64 * DAY_MS;
        for (row, members) in [
            (&cmp.self_initiated, vec!["s1"]),
            (&cmp.recalled, vec!["s2", "s3"]),
        ] {
            let mut offline = Vec::new();
            let mut chapters = Vec::new();
            let mut counts = Vec::new();
            let mut lens = Vec::new();
            for id in &members {
                let logins: Vec<u32> = log
                    .events
                    .iter()
                    .filter(|e| &e.student_id == id && e.day_index <= analysis_day)
                    .map(|e| e.day_index)
                    .collect();
                if let Some(&last) = logins.iter().max() {
                    offline.push((analysis_day - last) as f64);
                }
                chapters.push(
                    log.completion_marks
                        .iter()
                        .filter(|m| &m.student_id == id && m.timestamp_ms < cutoff)
                        .count() as f64,
                );
                let msgs: Vec<&str> = log
                    .records
                    .iter()
                    .filter(|r| {
                        &r.student_id == id
                            && r.author_role == AuthorRole::Student
                            && r.timestamp_ms < cutoff
                    })
                    .map(|r| r.text.as_str())
                    .collect();
                counts.push(msgs.len() as f64);
                let words: usize = msgs.iter().map(|t| t.split_whitespace().count()).sum();
                lens.push(if msgs.is_empty() { 0.0 } else { words as f64 / msgs.len() as f64 });
            }
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    None
                } else {
                    Some(v.iter().sum::<f64>() / v.len() as f64)
                }
            };
            assert_eq!(row.offline_days_mean, mean(&offline));
            assert_eq!(row.chapter_mean, mean(&chapters));
            assert_eq!(row.message_count_mean, mean(&counts));
            assert_eq!(row.message_length_mean, mean(&lens));
        }
    }
}
