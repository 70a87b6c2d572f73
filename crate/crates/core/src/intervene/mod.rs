//! The intervention loop: pick at-risk students, write each a personalized
//! recall email, deliver it, and record what was sent.
//!
//! Selection queries the predictor at the chapter each student is currently
//! studying. Email text comes from a model client fed the student's own
//! words, so drafts reference real past interactions rather than generic
//! encouragement. Campaigns keep one record per delivered draft and refuse
//! to re-mail a student inside a cooldown window.

pub mod mail;
pub mod measure;

pub use mail::{
    deliver, receipt_id, DeliveryOutcome, DeliveryReceipt, FileSink, MailError, MailSink,
    OutboundEmail, SmtpConfig, SmtpSink,
};
pub use measure::{
    group_comparison, login_delta, post_window_students, CohortComparison, GroupRow, LoginDelta,
    MeasureError,
};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::courselog::{serialize_transcript, AuthorRole, CourseLog, LogError};
use crate::cpadp::Predictor;
use crate::dataset::PredictionInstance;
use crate::hashing::sha256_hex;
use crate::predict::{
    map_bounded, parse_email_response, DecodingParams, EmailTemplate, PredictError, Stage,
    TextModelClient,
};

#[derive(Debug, Error)]
pub enum InterveneError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Mail(#[from] MailError),
}

/// A per-student failure kept out of the batch result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentFailure {
    pub student_id: String,
    pub message: String,
}

/// One student the predictor flagged, with the evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtRiskEntry {
    pub student_id: String,
    /// Chapter the student is currently studying; the query used
    /// c_h = c_p = this chapter.
    pub current_chapter: u32,
    pub p_dropout: f64,
    pub stage: Stage,
    pub degraded_from: Option<Stage>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtRiskReport {
    /// Flagged students, highest dropout probability first.
    pub flagged: Vec<AtRiskEntry>,
    pub failures: Vec<StudentFailure>,
}

/// Chapter each active student is currently studying: the first one they
/// have not completed. Completers are absent.
pub fn current_chapters(log: &CourseLog) -> BTreeMap<String, u32> {
    log.completions
        .values()
        .filter_map(|c| c.drop_chapter.map(|d| (c.student_id.clone(), d)))
        .collect()
}

/// Query the predictor once per active student at their current chapter and
/// keep those predicted to drop out with probability at or above the floor.
/// Per-student errors are collected, not fatal.
pub fn at_risk(
    log: &CourseLog,
    current_chapter: &BTreeMap<String, u32>,
    predictor: &Predictor<'_>,
    probability_floor: f64,
) -> AtRiskReport {
    let mut report = AtRiskReport::default();
    for (student_id, &chapter) in current_chapter {
        if log
            .completions
            .get(student_id)
            .is_some_and(|c| c.is_completer())
        {
            continue;
        }
        let transcript = match log.history_slice(student_id, chapter) {
            Ok(records) => serialize_transcript(&records, &log.chapter_titles),
            Err(err) => {
                report
                    .failures
                    .push(StudentFailure { student_id: student_id.clone(), message: err.to_string() });
                continue;
            }
        };
        let query = PredictionInstance {
            student_id: student_id.clone(),
            c_h: chapter,
            c_p: chapter,
            label: false,
            transcript,
        };
        match predictor.predict(&query) {
            Ok(outcome) => {
                if outcome.label && outcome.p_dropout >= probability_floor {
                    report.flagged.push(AtRiskEntry {
                        student_id: student_id.clone(),
                        current_chapter: chapter,
                        p_dropout: outcome.p_dropout,
                        stage: outcome.stage,
                        degraded_from: outcome.degraded_from,
                    });
                }
            }
            Err(err) => report
                .failures
                .push(StudentFailure { student_id: student_id.clone(), message: err.to_string() }),
        }
    }
    report.flagged.sort_by(|a, b| {
        b.p_dropout
            .partial_cmp(&a.p_dropout)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.student_id.cmp(&b.student_id))
    });
    report
}

/// A generated recall email, not yet delivered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailDraft {
    pub student_id: String,
    pub subject: String,
    pub body: String,
    /// Chapter titles and transcript concepts the draft actually mentions.
    pub referenced_topics: Vec<String>,
    /// Hash of the generation prompt, for reproducing the draft.
    pub prompt_hash: String,
}

const EXCERPT_LIMIT: usize = 3;
const EXCERPT_MAX_CHARS: usize = 240;

fn flatten_excerpt(text: &str) -> String {
    let flat = text.replace("\r\n", " ").replace(['\n', '\r'], " ");
    if flat.chars().count() <= EXCERPT_MAX_CHARS {
        return flat;
    }
    flat.chars().take(EXCERPT_MAX_CHARS).collect()
}

/// Longest student-authored messages, most salient first.
fn salient_excerpts(log: &CourseLog, student_id: &str) -> Vec<String> {
    let mut messages: Vec<&str> = log
        .records
        .iter()
        .filter(|r| r.student_id == student_id && r.author_role == AuthorRole::Student)
        .map(|r| r.text.as_str())
        .collect();
    messages.sort_by_key(|t| std::cmp::Reverse(t.chars().count()));
    messages.into_iter().take(EXCERPT_LIMIT).map(flatten_excerpt).collect()
}

fn email_context(log: &CourseLog, student_id: &str, excerpts: &[String]) -> String {
    let completion = &log.completions[student_id];
    let mut out = String::new();
    out.push_str(&format!("Student name: {student_id}\n"));
    out.push_str(&format!(
        "Completed chapters: {} of {}.\n",
        completion.progress, log.chapter_count
    ));
    if completion.progress >= 1 {
        if let Some(title) = log.chapter_title(completion.progress) {
            out.push_str(&format!("Last completed chapter: {title}.\n"));
        }
    }
    if let Some(current) = completion.drop_chapter {
        if let Some(title) = log.chapter_title(current) {
            out.push_str(&format!("Currently studying chapter {current}: {title}.\n"));
        }
    }
    out.push_str("Course outline:\n");
    for (i, title) in log.chapter_titles.iter().enumerate() {
        out.push_str(&format!("{}. {title}\n", i + 1));
    }
    if excerpts.is_empty() {
        out.push_str("The student has not sent any messages yet.\n");
    } else {
        out.push_str("Messages the student sent during the course:\n");
        for excerpt in excerpts {
            out.push_str(&format!("- \"{excerpt}\"\n"));
        }
    }
    out.pop();
    out
}

/// Concept candidates from the student's own messages: capitalized words of
/// at least four letters, the way proper topics appear in running text.
fn concept_candidates(excerpts: &[String]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for excerpt in excerpts {
        for word in excerpt.split(|c: char| !c.is_alphanumeric()) {
            if word.chars().count() >= 4
                && word.chars().next().is_some_and(|c| c.is_uppercase())
                && word.chars().all(|c| c.is_alphanumeric())
            {
                out.insert(word.to_string());
            }
        }
    }
    out
}

fn referenced_topics(
    subject: &str,
    body: &str,
    chapter_titles: &[String],
    concepts: &BTreeSet<String>,
) -> Vec<String> {
    let haystack = format!("{subject}\n{body}").to_lowercase();
    let mut seen = BTreeSet::new();
    for candidate in chapter_titles.iter().map(String::as_str).chain(concepts.iter().map(String::as_str)) {
        if haystack.contains(&candidate.to_lowercase()) {
            seen.insert(candidate.to_string());
        }
    }
    seen.into_iter().collect()
}

/// Generate a personalized recall email for one student.
pub fn compose_email(
    log: &CourseLog,
    student_id: &str,
    client: &dyn TextModelClient,
    template: &EmailTemplate,
    params: &DecodingParams,
    retry_budget: usize,
) -> Result<EmailDraft, InterveneError> {
    if log.student(student_id).is_none() {
        return Err(LogError::UnknownStudent { student_id: student_id.to_string() }.into());
    }
    let excerpts = salient_excerpts(log, student_id);
    let prompt = [
        template.system.as_str(),
        template.task.as_str(),
        &email_context(log, student_id, &excerpts),
        template.format.as_str(),
    ]
    .join("\n\n");

    let attempts = retry_budget + 1;
    let mut last = String::new();
    let mut transport: Option<PredictError> = None;
    let mut parsed = None;
    for _ in 0..attempts {
        match client.complete(&prompt, params) {
            Ok(response) => {
                if let Some(pair) = parse_email_response(&response) {
                    parsed = Some(pair);
                    break;
                }
                last = response;
                transport = None;
            }
            Err(err) => transport = Some(err.into()),
        }
    }
    let (subject, body) = match parsed {
        Some(pair) => pair,
        None => {
            return Err(transport
                .unwrap_or(PredictError::MalformedResponse { attempts, last })
                .into())
        }
    };
    let topics = referenced_topics(&subject, &body, &log.chapter_titles, &concept_candidates(&excerpts));
    Ok(EmailDraft {
        student_id: student_id.to_string(),
        subject,
        body,
        referenced_topics: topics,
        prompt_hash: sha256_hex(prompt.as_bytes()),
    })
}

/// One delivered email, persisted for cooldowns and effect measurement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub student_id: String,
    pub campaign_id: String,
    pub sent_day: u32,
    /// Sink that carried the message.
    pub channel: String,
    pub receipt_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub campaign_id: String,
    /// Day the campaign runs; recorded on every record.
    pub day: u32,
    pub probability_floor: f64,
    /// Days a student stays off-limits after receiving an email.
    pub cooldown_days: u32,
    pub retry_budget: usize,
    /// Concurrent email generations.
    pub in_flight: usize,
    pub delivery_attempts: usize,
    pub delivery_base_delay_ms: u64,
    /// Domain for student addresses.
    pub mail_domain: String,
    pub params: DecodingParams,
}

impl Default for CampaignConfig {
    fn default() -> CampaignConfig {
        CampaignConfig {
            campaign_id: "campaign-1".into(),
            day: 1,
            probability_floor: 0.5,
            cooldown_days: 14,
            retry_budget: 2,
            in_flight: 4,
            delivery_attempts: 3,
            delivery_base_delay_ms: 50,
            mail_domain: "students.example.edu".into(),
            params: DecodingParams::default(),
        }
    }
}

/// What a campaign run did, in a serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub campaign_id: String,
    pub day: u32,
    pub channel: String,
    pub at_risk_count: usize,
    pub delivered_count: usize,
    pub skipped_cooldown: Vec<String>,
    pub failures: Vec<StudentFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOutcome {
    pub manifest: CampaignManifest,
    pub at_risk: Vec<AtRiskEntry>,
    pub drafts: Vec<EmailDraft>,
    pub records: Vec<InterventionRecord>,
}

fn in_cooldown(prior: &[InterventionRecord], student_id: &str, config: &CampaignConfig) -> bool {
    prior.iter().any(|r| {
        r.student_id == student_id
            && (r.campaign_id == config.campaign_id
                || (config.day as i64 - r.sent_day as i64) < config.cooldown_days as i64)
    })
}

/// Run the full loop once: select, compose, deliver, record. Generation is
/// parallel under the in-flight limit; delivery stays serialized.
pub fn run_campaign(
    log: &CourseLog,
    predictor: &Predictor<'_>,
    email_client: &dyn TextModelClient,
    template: &EmailTemplate,
    sink: &mut dyn MailSink,
    prior_records: &[InterventionRecord],
    config: &CampaignConfig,
) -> CampaignOutcome {
    let chapters = current_chapters(log);
    let report = at_risk(log, &chapters, predictor, config.probability_floor);
    let mut failures = report.failures.clone();

    let mut skipped_cooldown = Vec::new();
    let mut target_ids = Vec::new();
    for entry in &report.flagged {
        if in_cooldown(prior_records, &entry.student_id, config) {
            skipped_cooldown.push(entry.student_id.clone());
        } else {
            target_ids.push(entry.student_id.clone());
        }
    }

    let composed = map_bounded(&target_ids, config.in_flight, |_, student_id| {
        compose_email(log, student_id, email_client, template, &config.params, config.retry_budget)
    });

    let mut drafts = Vec::new();
    for (student_id, result) in target_ids.iter().zip(composed) {
        match result {
            Ok(draft) => drafts.push(draft),
            Err(err) => failures
                .push(StudentFailure { student_id: student_id.clone(), message: err.to_string() }),
        }
    }

    let mut records = Vec::new();
    for draft in &drafts {
        let email = OutboundEmail {
            student_id: draft.student_id.clone(),
            to_address: format!("{}@{}", draft.student_id, config.mail_domain),
            subject: draft.subject.clone(),
            body: draft.body.clone(),
        };
        match deliver(
            sink,
            &email,
            config.delivery_attempts,
            Duration::from_millis(config.delivery_base_delay_ms),
        ) {
            Ok(outcome) => records.push(InterventionRecord {
                student_id: draft.student_id.clone(),
                campaign_id: config.campaign_id.clone(),
                sent_day: config.day,
                channel: sink.name().to_string(),
                receipt_id: outcome.receipt.receipt_id,
            }),
            Err(err) => failures.push(StudentFailure {
                student_id: draft.student_id.clone(),
                message: err.to_string(),
            }),
        }
    }

    CampaignOutcome {
        manifest: CampaignManifest {
            campaign_id: config.campaign_id.clone(),
            day: config.day,
            channel: sink.name().to_string(),
            at_risk_count: report.flagged.len(),
            delivered_count: records.len(),
            skipped_cooldown,
            failures,
        },
        at_risk: report.flagged,
        drafts,
        records,
    }
}
