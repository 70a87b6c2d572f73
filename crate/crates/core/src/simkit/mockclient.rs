//! Deterministic stand-ins for text model endpoints.
//!
//! Each client answers from the prompt text alone, so identical prompts get
//! identical responses and cached runs replay bit-for-bit. The diversity
//! sensitive client grades prompts the way the accuracy ordering experiments
//! assume: richer example structure earns a higher chance of answering
//! correctly against a ground-truth key.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::courselog::TranscriptStats;
use crate::dataset::PredictionInstance;
use crate::hashing::sha256_hex;
use crate::predict::{
    parse_verdict, DecodingParams, TextModelClient, TransportError, ANSWER_PREFIX,
    TRANSCRIPT_BEGIN, TRANSCRIPT_END, VERDICT_DROPOUT, VERDICT_RETAIN,
};

/// Chance of a correct answer for a zero-shot prompt.
pub const Q_ZERO: f64 = 0.60;
/// Chance for examples without special structure.
pub const Q_RANDOM: f64 = 0.62;
/// Chance when every example is a retention case.
pub const Q_ONLY_FALSE: f64 = 0.74;
/// Chance for exactly one engagement-extreme contrast pair.
pub const Q_SPECIAL_PAIR: f64 = 0.84;
/// Chance for the contrast pair plus typical companions.
pub const Q_SPECIAL_CASUAL: f64 = 0.94;

/// Scripted behavior selector, the serializable face of the mock clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockScript {
    Fixed { dropout: bool },
    #[serde(rename = "echo_majority_example_label")]
    EchoMajority,
    LengthHeuristic { dropout_below_chars: usize },
    DiversitySensitive { seed: u64 },
    Failing { failures: usize, then: Box<MockScript> },
    EmailEcho,
}

/// Build a client from a script. `truth` feeds the diversity-sensitive
/// answer key and is ignored by every other behavior.
pub fn build_mock_client(
    script: &MockScript,
    truth: &[PredictionInstance],
) -> Box<dyn TextModelClient> {
    match script {
        MockScript::Fixed { dropout } => Box::new(FixedVerdictClient { dropout: *dropout }),
        MockScript::EchoMajority => Box::new(EchoMajorityClient),
        MockScript::LengthHeuristic { dropout_below_chars } => {
            Box::new(LengthHeuristicClient { dropout_below_chars: *dropout_below_chars })
        }
        MockScript::DiversitySensitive { seed } => {
            Box::new(DiversitySensitiveClient::new(truth, *seed))
        }
        MockScript::Failing { failures, then } => {
            Box::new(FailingClient::new(*failures, build_mock_client(then, truth)))
        }
        MockScript::EmailEcho => Box::new(EmailEchoClient),
    }
}

fn verdict(dropout: bool) -> String {
    if dropout { VERDICT_DROPOUT.to_string() } else { VERDICT_RETAIN.to_string() }
}

/// Transcript blocks in prompt order, each with the example answer that
/// follows it, if any. The block without an answer is the query.
fn parse_blocks(prompt: &str) -> Vec<(String, Option<bool>)> {
    let begin = format!("{TRANSCRIPT_BEGIN}\n");
    let end = format!("\n{TRANSCRIPT_END}");
    let mut out = Vec::new();
    let mut rest = prompt;
    while let Some(b) = rest.find(&begin) {
        let after = &rest[b + begin.len()..];
        let Some(e) = after.find(&end) else { break };
        let transcript = &after[..e];
        let trailer_all = &after[e + end.len()..];
        let trailer = &trailer_all[..trailer_all.find(&begin).unwrap_or(trailer_all.len())];
        let answer = trailer
            .lines()
            .find(|l| l.trim_start().starts_with(ANSWER_PREFIX.trim_end()))
            .and_then(parse_verdict);
        out.push((transcript.to_string(), answer));
        rest = trailer_all;
    }
    out
}

fn query_transcript(prompt: &str) -> Option<String> {
    parse_blocks(prompt).pop().map(|(t, _)| t)
}

fn number_before(line: &str, prefix: &str, stop: char) -> Option<u32> {
    let rest = &line[line.find(prefix)? + prefix.len()..];
    rest[..rest.find(stop)?].trim().parse().ok()
}

/// History cutoff and horizon of the final transcript block, read from the
/// `Known history:` line that precedes it.
fn query_frame(prompt: &str) -> Option<(u32, u32)> {
    let begin_at = prompt.rfind(TRANSCRIPT_BEGIN)?;
    let header = prompt[..begin_at].lines().rev().find(|l| l.contains("Known history:"))?;
    let c_h = number_before(header, "before chapter ", '.')?;
    let c_p = number_before(header, "end of chapter ", '.')?;
    Some((c_h, c_p))
}

/// Always answers the same verdict.
pub struct FixedVerdictClient {
    pub dropout: bool,
}

impl TextModelClient for FixedVerdictClient {
    fn tag(&self) -> &str {
        if self.dropout { "mock-fixed-dropout" } else { "mock-fixed-retain" }
    }
    fn complete(&self, _prompt: &str, _params: &DecodingParams) -> Result<String, TransportError> {
        Ok(verdict(self.dropout))
    }
}

/// Answers with the majority label among the prompt's examples; ties and
/// zero-shot prompts fall back to retain.
pub struct EchoMajorityClient;

impl TextModelClient for EchoMajorityClient {
    fn tag(&self) -> &str {
        "mock-echo-majority"
    }
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, TransportError> {
        let mut dropout = 0usize;
        let mut retain = 0usize;
        for (_, answer) in parse_blocks(prompt) {
            match answer {
                Some(true) => dropout += 1,
                Some(false) => retain += 1,
                None => {}
            }
        }
        Ok(verdict(dropout > retain))
    }
}

/// Flags dropout when the query transcript is short.
pub struct LengthHeuristicClient {
    pub dropout_below_chars: usize,
}

impl TextModelClient for LengthHeuristicClient {
    fn tag(&self) -> &str {
        "mock-length-heuristic"
    }
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, TransportError> {
        let chars = query_transcript(prompt).map_or(0, |t| t.chars().count());
        Ok(verdict(chars < self.dropout_below_chars))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PromptTier {
    Zero,
    Random,
    OnlyFalse,
    SpecialPair,
    SpecialCasual,
}

impl PromptTier {
    fn accuracy(self) -> f64 {
        match self {
            PromptTier::Zero => Q_ZERO,
            PromptTier::Random => Q_RANDOM,
            PromptTier::OnlyFalse => Q_ONLY_FALSE,
            PromptTier::SpecialPair => Q_SPECIAL_PAIR,
            PromptTier::SpecialCasual => Q_SPECIAL_CASUAL,
        }
    }
}

/// Grade a prompt's example structure. The contrast tiers require the prompt
/// to open with a dropout case from the least engaged band of the answer key
/// and follow it with a retention case from the most engaged band, the shape
/// the pair selection strategies emit; a few-shot prompt whose mixed examples
/// merely happen to span both labels stays in the random tier.
pub(crate) fn prompt_tier(
    prompt: &str,
    low_band: Option<f64>,
    high_band: Option<f64>,
) -> PromptTier {
    let blocks = parse_blocks(prompt);
    let examples: Vec<(f64, bool)> = blocks
        .iter()
        .filter_map(|(t, answer)| {
            answer.map(|label| (TranscriptStats::scan(t).msgs_per_chapter(), label))
        })
        .collect();
    if examples.is_empty() {
        return PromptTier::Zero;
    }
    if let (Some(low), Some(high)) = (low_band, high_band) {
        if examples.len() >= 2 {
            let (lead_engagement, lead_dropout) = examples[0];
            let (next_engagement, next_dropout) = examples[1];
            let contrast = lead_dropout
                && !next_dropout
                && lead_engagement <= low
                && next_engagement >= high
                && lead_engagement < next_engagement;
            if contrast {
                return if examples.len() == 2 {
                    PromptTier::SpecialPair
                } else {
                    PromptTier::SpecialCasual
                };
            }
        }
    }
    if examples.iter().all(|&(_, dropout)| !dropout) {
        PromptTier::OnlyFalse
    } else {
        PromptTier::Random
    }
}

/// Value at quantile `q` of a sorted sample, nearest lower rank.
fn band_value(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    Some(sorted[((sorted.len() - 1) as f64 * q).floor() as usize])
}

fn hash_fraction(seed: u64, text: &str) -> f64 {
    let mut data = seed.to_le_bytes().to_vec();
    data.extend_from_slice(text.as_bytes());
    let hex = sha256_hex(&data);
    let bits = u64::from_str_radix(&hex[..16], 16).expect("hex digest");
    bits as f64 / (u64::MAX as f64 + 1.0)
}

/// Knows the true label for every (history cutoff, horizon, transcript)
/// question it was given and answers correctly with a probability set by the
/// prompt's example structure. The coin is a hash of the prompt, so reruns
/// repeat exactly, and word-for-word identical questions share one answer.
/// Contrast grading compares example engagement against the bottom dropout
/// band and the top retention band of the answer key.
pub struct DiversitySensitiveClient {
    truth: HashMap<(u32, u32, String), bool>,
    low_band: Option<f64>,
    high_band: Option<f64>,
    seed: u64,
}

impl DiversitySensitiveClient {
    pub fn new(truth: &[PredictionInstance], seed: u64) -> DiversitySensitiveClient {
        fn engagement(inst: &PredictionInstance) -> f64 {
            TranscriptStats::scan(&inst.transcript).msgs_per_chapter()
        }
        let mut dropped: Vec<f64> = truth.iter().filter(|i| i.label).map(engagement).collect();
        let mut retained: Vec<f64> = truth.iter().filter(|i| !i.label).map(engagement).collect();
        dropped.sort_by(f64::total_cmp);
        retained.sort_by(f64::total_cmp);
        DiversitySensitiveClient {
            truth: truth
                .iter()
                .map(|inst| {
                    ((inst.c_h, inst.c_p, sha256_hex(inst.transcript.as_bytes())), inst.label)
                })
                .collect(),
            low_band: band_value(&dropped, 0.05),
            high_band: band_value(&retained, 0.95),
            seed,
        }
    }
}

impl TextModelClient for DiversitySensitiveClient {
    fn tag(&self) -> &str {
        "mock-diversity-sensitive"
    }
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, TransportError> {
        let truth = query_transcript(prompt)
            .zip(query_frame(prompt))
            .and_then(|(t, (c_h, c_p))| {
                self.truth.get(&(c_h, c_p, sha256_hex(t.as_bytes()))).copied()
            })
            .unwrap_or(false);
        let tier = prompt_tier(prompt, self.low_band, self.high_band);
        let correct = hash_fraction(self.seed, prompt) < tier.accuracy();
        Ok(verdict(if correct { truth } else { !truth }))
    }
}

/// Returns transport errors for the first n calls, then delegates.
pub struct FailingClient {
    remaining: Mutex<usize>,
    inner: Box<dyn TextModelClient>,
}

impl FailingClient {
    pub fn new(failures: usize, inner: Box<dyn TextModelClient>) -> FailingClient {
        FailingClient { remaining: Mutex::new(failures), inner }
    }
}

impl TextModelClient for FailingClient {
    fn tag(&self) -> &str {
        "mock-failing"
    }
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, TransportError> {
        {
            let mut remaining = self.remaining.lock().expect("no poisoned lock");
            if *remaining > 0 {
                *remaining -= 1;
                return Err(TransportError::new("scripted outage"));
            }
        }
        self.inner.complete(prompt, params)
    }
}

fn line_value<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .map(|v| v.strip_suffix('.').unwrap_or(v))
}

/// Writes an email that echoes the student's own excerpts and the chapter
/// titles named in the generation prompt, so drafts stay checkable against
/// the inputs without a real model.
pub struct EmailEchoClient;

impl TextModelClient for EmailEchoClient {
    fn tag(&self) -> &str {
        "mock-email-echo"
    }
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, TransportError> {
        let name = line_value(prompt, "Student name: ").unwrap_or("there");
        let excerpts: Vec<&str> = prompt
            .lines()
            .filter_map(|l| l.strip_prefix("- \""))
            .map(|l| l.strip_suffix('"').unwrap_or(l))
            .collect();
        let last_completed = line_value(prompt, "Last completed chapter: ");
        let current = prompt
            .lines()
            .find(|l| l.starts_with("Currently studying chapter "))
            .and_then(|l| l.split_once(": "))
            .map(|(_, title)| title.strip_suffix('.').unwrap_or(title));
        let first_outline = prompt
            .lines()
            .skip_while(|l| *l != "Course outline:")
            .nth(1)
            .and_then(|l| l.split_once(". "))
            .map(|(_, title)| title);

        let mut body = String::new();
        if let Some(first) = excerpts.first() {
            body.push_str(&format!("You asked: \"{first}\""));
            for more in &excerpts[1..] {
                body.push_str(&format!(" and \"{more}\""));
            }
            body.push_str(", and those threads are still open. ");
        }
        if let Some(done) = last_completed {
            body.push_str(&format!("You already finished {done}. "));
        }
        match (current, first_outline) {
            (Some(next), _) => body.push_str(&format!("{next} is ready whenever you are.")),
            (None, Some(first)) => body.push_str(&format!("{first} is a great place to start.")),
            (None, None) => body.push_str("Your course is ready whenever you are."),
        }
        Ok(format!("SUBJECT: {name}, your course is waiting\nBODY: {}", body.trim_end()))
    }
}
