//! Prompt construction and response parsing for prompted predictors.
//!
//! Templates are plain text with `@section` headers so course staff can edit
//! them without touching code. Rendering is purely deterministic; the model
//! must answer with a `VERDICT:` line for predictions or `SUBJECT:`/`BODY:`
//! lines for emails, and parsing tolerates surrounding prose.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DecodingParams, PredictError, TextModelClient};
use crate::dataset::PredictionInstance;

/// Verdict line for a predicted dropout.
pub const VERDICT_DROPOUT: &str = "VERDICT: DROPOUT";
/// Verdict line for a predicted retention.
pub const VERDICT_RETAIN: &str = "VERDICT: RETAIN";
/// Marker preceding every transcript block in a prompt.
pub const TRANSCRIPT_BEGIN: &str = "--- BEGIN TRANSCRIPT ---";
/// Marker following every transcript block in a prompt.
pub const TRANSCRIPT_END: &str = "--- END TRANSCRIPT ---";
/// Prefix of the answer line attached to each few-shot example.
pub const ANSWER_PREFIX: &str = "Answer: ";

/// Default number of retries after a failed model call.
pub const DEFAULT_RETRY_BUDGET: usize = 2;

/// Errors in template files.
#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("line {line}: unknown section directive `{directive}`")]
    UnknownSection { line: usize, directive: String },
    #[error("text before the first @section header")]
    LeadingText,
    #[error("missing section `@{0}`")]
    MissingSection(&'static str),
}

/// Sections of a dropout prediction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// Scene-setting first paragraph.
    pub system: String,
    /// What the model is being asked to judge.
    pub task: String,
    /// Header introducing the example list.
    pub examples_header: String,
    /// Header introducing the student under prediction.
    pub query_header: String,
    /// Closing instruction pinning the answer format.
    pub verdict: String,
}

impl PromptTemplate {
    /// Built-in template used when no file is supplied.
    pub fn default_dropout() -> PromptTemplate {
        PromptTemplate {
            system: "You are an early-warning assistant for an online course. You read a \
                     student's chat transcript with the course agents and judge dropout risk."
                .to_string(),
            task: "Given the transcript of all chapters the student has studied so far, decide \
                   whether the student will have dropped out of the course by the end of the \
                   stated horizon chapter. Sparse, short, or absent messages in recent chapters \
                   usually signal disengagement; frequent substantive questions signal \
                   persistence."
                .to_string(),
            examples_header: "### Examples".to_string(),
            query_header: "### Student under review".to_string(),
            verdict: format!(
                "Answer with exactly one line: `{VERDICT_DROPOUT}` if the student will have \
                 dropped out by the horizon chapter, or `{VERDICT_RETAIN}` if they will still \
                 be active."
            ),
        }
    }

    /// Parse a template file: sections start at `@system`, `@task`,
    /// `@examples_header`, `@query_header`, or `@verdict` lines.
    pub fn parse(text: &str) -> Result<PromptTemplate, TemplateError> {
        let sections = parse_sections(
            text,
            &["system", "task", "examples_header", "query_header", "verdict"],
        )?;
        Ok(PromptTemplate {
            system: sections[0].clone(),
            task: sections[1].clone(),
            examples_header: sections[2].clone(),
            query_header: sections[3].clone(),
            verdict: sections[4].clone(),
        })
    }

    /// Serialize back to the `@section` file format.
    pub fn to_file_text(&self) -> String {
        format!(
            "@system\n{}\n\n@task\n{}\n\n@examples_header\n{}\n\n@query_header\n{}\n\n@verdict\n{}\n",
            self.system, self.task, self.examples_header, self.query_header, self.verdict
        )
    }
}

/// Sections of an intervention email prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailTemplate {
    pub system: String,
    pub task: String,
    /// Closing instruction pinning the SUBJECT/BODY answer format.
    pub format: String,
}

impl EmailTemplate {
    /// Built-in template used when no file is supplied.
    pub fn default_email() -> EmailTemplate {
        EmailTemplate {
            system: "You are the teaching team of an online course writing a short, warm \
                     re-engagement email to one student."
                .to_string(),
            task: "Write an email that mentions something specific the student asked about, \
                   names the chapter they last completed, and invites them to continue with \
                   the next chapter. Keep it under 150 words and do not guilt-trip."
                .to_string(),
            format: "Respond with a line `SUBJECT: <subject>` followed by a line `BODY:` and \
                     then the email body."
                .to_string(),
        }
    }

    /// Parse a template file with `@system`, `@task`, and `@format` sections.
    pub fn parse(text: &str) -> Result<EmailTemplate, TemplateError> {
        let sections = parse_sections(text, &["system", "task", "format"])?;
        Ok(EmailTemplate {
            system: sections[0].clone(),
            task: sections[1].clone(),
            format: sections[2].clone(),
        })
    }

    pub fn to_file_text(&self) -> String {
        format!("@system\n{}\n\n@task\n{}\n\n@format\n{}\n", self.system, self.task, self.format)
    }
}

fn parse_sections(text: &str, names: &'static [&'static str]) -> Result<Vec<String>, TemplateError> {
    let mut bodies: Vec<Option<String>> = vec![None; names.len()];
    let mut current: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        if let Some(directive) = line.strip_prefix('@') {
            let directive = directive.trim();
            match names.iter().position(|n| *n == directive) {
                Some(pos) => {
                    bodies[pos] = Some(String::new());
                    current = Some(pos);
                }
                None => {
                    return Err(TemplateError::UnknownSection {
                        line: idx + 1,
                        directive: directive.to_string(),
                    })
                }
            }
        } else {
            match current {
                Some(pos) => {
                    let body = bodies[pos].as_mut().expect("section started");
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(line);
                }
                None if line.trim().is_empty() => {}
                None => return Err(TemplateError::LeadingText),
            }
        }
    }
    names
        .iter()
        .zip(bodies)
        .map(|(name, body)| body.map(|b| b.trim().to_string()).ok_or(TemplateError::MissingSection(name)))
        .collect()
}

fn render_instance_block(c_h: u32, c_p: u32, transcript: &str) -> String {
    format!(
        "Known history: chapters before chapter {c_h}. Horizon: end of chapter {c_p}.\n\
         {TRANSCRIPT_BEGIN}\n{transcript}\n{TRANSCRIPT_END}"
    )
}

/// Render a full dropout prediction prompt.
///
/// With an empty example list the examples section is omitted entirely,
/// which is the zero-shot form. Examples appear in the given order, each
/// with its answer line.
pub fn render_prompt(
    template: &PromptTemplate,
    examples: &[&PredictionInstance],
    query: &PredictionInstance,
) -> String {
    let mut sections = vec![template.system.clone(), template.task.clone()];
    if !examples.is_empty() {
        let mut block = template.examples_header.clone();
        for (i, ex) in examples.iter().enumerate() {
            let verdict = if ex.label { VERDICT_DROPOUT } else { VERDICT_RETAIN };
            block.push_str(&format!(
                "\nExample {}:\n{}\n{ANSWER_PREFIX}{verdict}",
                i + 1,
                render_instance_block(ex.c_h, ex.c_p, &ex.transcript)
            ));
        }
        sections.push(block);
    }
    sections.push(format!(
        "{}\n{}",
        template.query_header,
        render_instance_block(query.c_h, query.c_p, &query.transcript)
    ));
    sections.push(template.verdict.clone());
    sections.join("\n\n")
}

/// Extract the first verdict in a model response, scanning case-insensitively
/// and ignoring surrounding prose. Returns true for dropout.
pub fn parse_verdict(response: &str) -> Option<bool> {
    let lower = response.to_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<(usize, bool)> = None;
    let mut from = 0;
    while let Some(pos) = lower[from..].find("verdict") {
        let at = from + pos;
        let mut rest = at + "verdict".len();
        while rest < bytes.len() && (bytes[rest] == b' ' || bytes[rest] == b'\t') {
            rest += 1;
        }
        if rest < bytes.len() && bytes[rest] == b':' {
            rest += 1;
            while rest < bytes.len() && (bytes[rest] == b' ' || bytes[rest] == b'\t') {
                rest += 1;
            }
            let verdict = if lower[rest..].starts_with("dropout") {
                Some(true)
            } else if lower[rest..].starts_with("retain") {
                Some(false)
            } else {
                None
            };
            if let Some(v) = verdict {
                if best.is_none() {
                    best = Some((at, v));
                }
            }
        }
        from = at + "verdict".len();
    }
    best.map(|(_, v)| v)
}

/// Extract `SUBJECT:` and `BODY:` from an email response. Both parts must be
/// non-empty; the body is everything after the `BODY:` marker.
pub fn parse_email_response(response: &str) -> Option<(String, String)> {
    let mut subject = None;
    let mut body_start = None;
    for (offset, line) in response.lines().map(|l| (line_offset(response, l), l)) {
        let upper = line.trim_start();
        if subject.is_none() {
            if let Some(rest) = strip_prefix_ci(upper, "SUBJECT:") {
                let s = rest.trim();
                if !s.is_empty() {
                    subject = Some(s.to_string());
                }
            }
        }
        if body_start.is_none() {
            if let Some(rest) = strip_prefix_ci(upper, "BODY:") {
                let after_line = offset + line.len();
                let mut body = rest.trim_start().to_string();
                let tail = response[after_line..].trim_start_matches(['\r', '\n']);
                if !tail.is_empty() {
                    if !body.is_empty() {
                        body.push('\n');
                    }
                    body.push_str(tail.trim_end());
                }
                let body = body.trim().to_string();
                if !body.is_empty() {
                    body_start = Some(body);
                }
                break;
            }
        }
    }
    match (subject, body_start) {
        (Some(s), Some(b)) => Some((s, b)),
        _ => None,
    }
}

fn line_offset(haystack: &str, line: &str) -> usize {
    line.as_ptr() as usize - haystack.as_ptr() as usize
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

/// Call a text model and parse a verdict, retrying on transport errors and
/// malformed responses up to `retry_budget` extra attempts.
pub fn ask_for_verdict(
    client: &dyn TextModelClient,
    prompt: &str,
    params: &DecodingParams,
    retry_budget: usize,
) -> Result<(bool, String), PredictError> {
    let attempts = retry_budget + 1;
    let mut last_transport = None;
    let mut last_response = None;
    for _ in 0..attempts {
        match client.complete(prompt, params) {
            Err(e) => last_transport = Some(e),
            Ok(response) => match parse_verdict(&response) {
                Some(verdict) => return Ok((verdict, response)),
                None => last_response = Some(response),
            },
        }
    }
    match (last_response, last_transport) {
        // Prefer reporting garbage output over an earlier transport blip.
        (Some(last), _) => Err(PredictError::MalformedResponse { attempts, last }),
        (None, Some(e)) => Err(PredictError::Transport(e)),
        (None, None) => unreachable!("at least one attempt happened"),
    }
}
