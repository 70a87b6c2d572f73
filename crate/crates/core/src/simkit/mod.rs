//! Synthetic cohort generation and mock model clients.
//!
//! Real interaction datasets for text-based online courses are scarce, so
//! everything here exists to make the full pipeline runnable and testable
//! offline. Cohorts are drawn from a progress histogram with engagement
//! rates that rise with completion level, and every student's stream comes
//! from a seed-derived sub-generator so cohorts are reproducible and stable
//! under histogram edits elsewhere.

pub mod mockclient;
pub mod mockembed;

pub use mockclient::{
    build_mock_client, DiversitySensitiveClient, EchoMajorityClient, EmailEchoClient,
    FailingClient, FixedVerdictClient, LengthHeuristicClient, MockScript,
};
pub use mockembed::HashEmbedder;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::courselog::{
    compute_completion, AuthorRole, CompletionMark, CourseLog, InteractionRecord, SessionEvent,
    StudentProfile, TraitScores, DAY_MS,
};
use crate::hashing::derive_seed;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("histogram has {got} entries, expected chapter_count + 1 = {expected}")]
    BadHistogramLength { got: usize, expected: usize },
    #[error("histogram is all zero")]
    EmptyHistogram,
    #[error("chapter_titles has {got} entries, expected {expected}")]
    BadTitleCount { got: usize, expected: usize },
    #[error("engagement must rise with completion level; rate_per_level must be positive")]
    FlatEngagement,
    #[error("ground truth line {line}: {msg}")]
    TruthParse { line: usize, msg: String },
    #[error("embedding dimension must be at least 2, got {0}")]
    BadEmbedDim(usize),
}

/// Recipe for a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub course_id: String,
    pub chapter_count: u32,
    pub chapter_titles: Vec<String>,
    /// Students per completion level, indexed 0..=chapter_count.
    pub histogram: Vec<u32>,
    /// Expected student messages per engaged chapter at level 0.
    pub base_message_rate: f64,
    /// Rate increase per completion level; must be positive so more
    /// successful students talk more.
    pub rate_per_level: f64,
    /// Mean words per message at level 0.
    pub base_message_words: f64,
    /// Mean word increase per completion level.
    pub words_per_level: f64,
    /// Spread of the log-normal word-count distribution.
    pub length_sigma: f64,
    pub semester_days: u32,
    pub seed: u64,
}

impl CohortSpec {
    /// Six-chapter course with the completion histogram observed in a real
    /// semester: most students stall immediately or finish everything.
    pub fn table1_default(seed: u64) -> CohortSpec {
        CohortSpec {
            course_id: "tagi-sim".to_string(),
            chapter_count: 6,
            chapter_titles: vec![
                "General Artificial Intelligence Overview".to_string(),
                "Machine Learning Basics".to_string(),
                "Neural Networks and Deep Learning".to_string(),
                "Large Language Models".to_string(),
                "Agents and Tool Use".to_string(),
                "Alignment and Safety".to_string(),
            ],
            histogram: vec![34, 22, 8, 3, 7, 2, 110],
            base_message_rate: 1.0,
            rate_per_level: 1.2,
            base_message_words: 20.0,
            words_per_level: 12.0,
            length_sigma: 0.5,
            semester_days: 90,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let expected = self.chapter_count as usize + 1;
        if self.histogram.len() != expected {
            return Err(SimError::BadHistogramLength { got: self.histogram.len(), expected });
        }
        if self.histogram.iter().all(|&n| n == 0) {
            return Err(SimError::EmptyHistogram);
        }
        if self.chapter_titles.len() != self.chapter_count as usize {
            return Err(SimError::BadTitleCount {
                got: self.chapter_titles.len(),
                expected: self.chapter_count as usize,
            });
        }
        if self.rate_per_level <= 0.0 {
            return Err(SimError::FlatEngagement);
        }
        Ok(())
    }

    pub fn student_count(&self) -> u32 {
        self.histogram.iter().sum()
    }
}

/// Generator-side answer key for one student.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub student_id: String,
    pub progress: u32,
    pub drop_chapter: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub log: CourseLog,
    pub truth: Vec<GroundTruth>,
}

pub fn emit_ground_truth(truth: &[GroundTruth]) -> String {
    let mut out = String::new();
    for entry in truth {
        out.push_str(&serde_json::to_string(entry).expect("ground truth serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_ground_truth(input: &str) -> Result<Vec<GroundTruth>, SimError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: GroundTruth = serde_json::from_str(line)
            .map_err(|e| SimError::TruthParse { line: i + 1, msg: e.to_string() })?;
        out.push(entry);
    }
    Ok(out)
}

const COLLEGES: [&str; 4] = ["Engineering", "Science", "Humanities", "Business"];
const MAJORS: [&str; 5] = ["CS", "EE", "Math", "Physics", "Linguistics"];
const GENDERS: [&str; 3] = ["F", "M", "N"];
const GRADES: [&str; 4] = ["2025", "2026", "2027", "2028"];

const TOPIC_WORDS: [&str; 24] = [
    "gradient", "attention", "tokens", "overfitting", "chapter", "example", "model", "layers",
    "training", "dataset", "reasoning", "prompt", "memory", "alignment", "agents", "quiz",
    "lecture", "embedding", "loss", "inference", "context", "sampling", "evaluation", "notes",
];

const AGENT_REPLIES: [&str; 4] = [
    "Good question, let us walk through it step by step.",
    "That connects to the earlier section; compare the two definitions.",
    "Try the worked example again with smaller numbers.",
    "Here is a hint: focus on what changes between iterations.",
];

fn sample_profile(rng: &mut ChaCha8Rng, student_id: &str, progress: u32, l: u32) -> StudentProfile {
    let traits = if rng.gen_bool(0.7) {
        let correlated = 1.0 + 4.0 * progress as f64 / l as f64 + rng.gen_range(-0.8..0.8);
        Some(TraitScores {
            lm: (correlated.round() as i64).clamp(1, 5) as u8,
            ase: rng.gen_range(1..=5),
            lp: rng.gen_range(1..=5),
            sr: rng.gen_range(1..=5),
            llmf: rng.gen_range(1..=5),
        })
    } else {
        None
    };
    StudentProfile {
        student_id: student_id.to_string(),
        college: COLLEGES[rng.gen_range(0..COLLEGES.len())].to_string(),
        major: MAJORS[rng.gen_range(0..MAJORS.len())].to_string(),
        gender: GENDERS[rng.gen_range(0..GENDERS.len())].to_string(),
        grade: GRADES[rng.gen_range(0..GRADES.len())].to_string(),
        traits,
    }
}

fn sample_message_text(rng: &mut ChaCha8Rng, mean_words: f64, sigma: f64) -> String {
    let mu = mean_words.max(1.0).ln() - sigma * sigma / 2.0;
    let words = LogNormal::new(mu, sigma).expect("valid log-normal").sample(rng);
    let count = (words.round() as i64).clamp(1, 400) as usize;
    let mut text = String::new();
    for i in 0..count {
        if i > 0 {
            text.push(' ');
        }
        text.push_str(TOPIC_WORDS[rng.gen_range(0..TOPIC_WORDS.len())]);
    }
    text
}

/// Draw one cohort. Students are generated independently from per-index
/// sub-seeds, in histogram order from level 0 upward.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, SimError> {
    spec.validate()?;
    let l = spec.chapter_count;
    let mut students = Vec::new();
    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut events: Vec<SessionEvent> = Vec::new();
    let mut marks: Vec<CompletionMark> = Vec::new();
    let mut truth = Vec::new();

    let stride = ((spec.semester_days.saturating_sub(10)) / l.max(1)).max(1);
    let mut index = 0u32;
    for (level, &count) in spec.histogram.iter().enumerate() {
        let progress = level as u32;
        for _ in 0..count {
            index += 1;
            let student_id = format!("s{index:04}");
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("student-{index}")));
            students.push(sample_profile(&mut rng, &student_id, progress, l));

            let rate = spec.base_message_rate + spec.rate_per_level * progress as f64;
            let mean_words = spec.base_message_words + spec.words_per_level * progress as f64;
            // Chapters the student touches: everything completed plus the
            // one they stall in, visited at half the usual intensity.
            let touched = if progress < l { progress + 1 } else { progress };
            let mut day = rng.gen_range(1..=5u32);
            let mut active_days: BTreeSet<u32> = BTreeSet::new();
            for chapter in 1..=touched {
                day = (day + rng.gen_range(1..=stride)).min(spec.semester_days);
                let is_drop_chapter = chapter > progress;
                let chapter_rate = if is_drop_chapter { rate / 2.0 } else { rate };
                let msg_count =
                    Poisson::new(chapter_rate.max(1e-9)).expect("valid rate").sample(&mut rng)
                        as usize;
                let mut minute = rng.gen_range(8 * 60..18 * 60) as i64;
                for _ in 0..msg_count {
                    let ts = (day as i64 - 1) * DAY_MS + minute * 60_000;
                    records.push(InteractionRecord {
                        student_id: student_id.clone(),
                        chapter,
                        timestamp_ms: ts,
                        author_role: AuthorRole::Student,
                        text: sample_message_text(&mut rng, mean_words, spec.length_sigma),
                    });
                    records.push(InteractionRecord {
                        student_id: student_id.clone(),
                        chapter,
                        timestamp_ms: ts + 60_000,
                        author_role: match rng.gen_range(0..3) {
                            0 => AuthorRole::AiTeacher,
                            1 => AuthorRole::AiTa,
                            _ => AuthorRole::AiPeer,
                        },
                        text: AGENT_REPLIES[rng.gen_range(0..AGENT_REPLIES.len())].to_string(),
                    });
                    minute += rng.gen_range(2..=10);
                    active_days.insert(day);
                }
                if !is_drop_chapter {
                    marks.push(CompletionMark {
                        student_id: student_id.clone(),
                        chapter,
                        timestamp_ms: (day as i64 - 1) * DAY_MS + 23 * 3_600_000
                            + chapter as i64 * 1000,
                    });
                    active_days.insert(day);
                }
            }
            for &active in &active_days {
                events.push(SessionEvent {
                    student_id: student_id.clone(),
                    day_index: active,
                    timestamp_ms: (active as i64 - 1) * DAY_MS
                        + rng.gen_range(6 * 60..8 * 60) as i64 * 60_000,
                });
            }
            truth.push(GroundTruth {
                student_id: student_id.clone(),
                progress,
                drop_chapter: if progress < l { Some(progress + 1) } else { None },
            });
        }
    }

    records.sort_by_key(|r| r.timestamp_ms);
    events.sort_by_key(|e| e.timestamp_ms);
    marks.sort_by_key(|m| m.timestamp_ms);

    let mut completions = BTreeMap::new();
    for student in &students {
        let marked: BTreeSet<u32> = marks
            .iter()
            .filter(|m| m.student_id == student.student_id)
            .map(|m| m.chapter)
            .collect();
        let state = compute_completion(&student.student_id, &marked, l)
            .expect("generated completions are sequential");
        completions.insert(student.student_id.clone(), state);
    }

    Ok(Cohort {
        log: CourseLog {
            course_id: spec.course_id.clone(),
            chapter_count: l,
            chapter_titles: spec.chapter_titles.clone(),
            students,
            records,
            events,
            completion_marks: marks,
            completions,
        },
        truth,
    })
}
