//! TOML configuration with environment-variable credentials.
//!
//! The file carries everything reproducible: seeds, stage policy, client
//! selection, mail routing, and the workspace path. Secrets never live in
//! the file; the API key and SMTP login come from `RETAIN_TEXT_API_KEY`,
//! `RETAIN_SMTP_USER`, and `RETAIN_SMTP_PASS`, and `RETAIN_SMTP_HOST`,
//! `RETAIN_SMTP_PORT`, and `RETAIN_SMTP_FROM` override their config keys
//! for deploy-time rerouting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use retain_core::cpadp::StagePolicy;
use retain_core::predict::DecodingParams;
use retain_core::simkit::MockScript;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsConfig {
    /// Every stage derives its own stream from this master seed.
    pub master: u64,
}

impl Default for SeedsConfig {
    fn default() -> SeedsConfig {
        SeedsConfig { master: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub few_shot_min: usize,
    pub fine_tune_min: usize,
    pub fallback_enabled: bool,
    pub probability_floor: f64,
    pub cooldown_days: u32,
    pub few_shot_k: usize,
    pub few_shot_strategy: String,
}

impl Default for PolicyConfig {
    fn default() -> PolicyConfig {
        let stage = StagePolicy::default();
        PolicyConfig {
            few_shot_min: stage.few_shot_min,
            fine_tune_min: stage.fine_tune_min,
            fallback_enabled: stage.fallback_enabled,
            probability_floor: 0.5,
            cooldown_days: 14,
            few_shot_k: 4,
            few_shot_strategy: "special_plus_casual".to_string(),
        }
    }
}

impl PolicyConfig {
    pub fn stage_policy(&self) -> StagePolicy {
        StagePolicy {
            few_shot_min: self.few_shot_min,
            fine_tune_min: self.fine_tune_min,
            fallback_enabled: self.fallback_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientsConfig {
    /// "mock" answers from scripted local clients; "http" calls an endpoint.
    pub text: String,
    pub http_endpoint: String,
    pub http_timeout_secs: u64,
    /// Verdict behavior when `text = "mock"`.
    pub verdict_script: MockScript,
    pub embed_dim: usize,
    pub retry_budget: usize,
    pub in_flight: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ClientsConfig {
    fn default() -> ClientsConfig {
        ClientsConfig {
            text: "mock".to_string(),
            http_endpoint: String::new(),
            http_timeout_secs: 30,
            verdict_script: MockScript::LengthHeuristic { dropout_below_chars: 1000 },
            embed_dim: 16,
            retry_budget: 2,
            in_flight: 4,
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

impl ClientsConfig {
    pub fn decoding_params(&self) -> DecodingParams {
        DecodingParams { temperature: self.temperature, max_tokens: self.max_tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MailConfig {
    /// "file" writes messages into the workspace; "smtp" talks to a relay.
    pub sink: String,
    pub smtp_host: String,
    pub smtp_port: u16,
    pub helo_domain: String,
    pub from_address: String,
    /// Domain appended to student ids to form recipient addresses.
    pub mail_domain: String,
    pub delivery_attempts: usize,
    pub delivery_base_delay_ms: u64,
}

impl Default for MailConfig {
    fn default() -> MailConfig {
        MailConfig {
            sink: "file".to_string(),
            smtp_host: String::new(),
            smtp_port: 25,
            helo_domain: "retain.local".to_string(),
            from_address: "course-team@retain.local".to_string(),
            mail_domain: "students.example.edu".to_string(),
            delivery_attempts: 3,
            delivery_base_delay_ms: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub workspace: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> PathsConfig {
        PathsConfig { workspace: PathBuf::from("workspace") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetainConfig {
    pub seeds: SeedsConfig,
    pub policy: PolicyConfig,
    pub clients: ClientsConfig,
    pub mail: MailConfig,
    pub paths: PathsConfig,
}

impl RetainConfig {
    /// Read and validate a config file; a missing path means defaults.
    pub fn load(path: Option<&Path>) -> Result<RetainConfig, CliError> {
        let mut config = match path {
            None => RetainConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        config.apply_env();
        config.validate()?;
        Ok(config)
    }

    fn apply_env(&mut self) {
        if let Ok(host) = std::env::var("RETAIN_SMTP_HOST") {
            self.mail.smtp_host = host;
        }
        if let Ok(port) = std::env::var("RETAIN_SMTP_PORT") {
            if let Ok(port) = port.parse() {
                self.mail.smtp_port = port;
            }
        }
        if let Ok(from) = std::env::var("RETAIN_SMTP_FROM") {
            self.mail.from_address = from;
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !matches!(self.clients.text.as_str(), "mock" | "http") {
            return Err(CliError::Config(format!(
                "clients.text must be \"mock\" or \"http\", got {:?}",
                self.clients.text
            )));
        }
        if self.clients.text == "http" && self.clients.http_endpoint.is_empty() {
            return Err(CliError::Config(
                "clients.text = \"http\" requires clients.http_endpoint".to_string(),
            ));
        }
        if !matches!(self.mail.sink.as_str(), "file" | "smtp") {
            return Err(CliError::Config(format!(
                "mail.sink must be \"file\" or \"smtp\", got {:?}",
                self.mail.sink
            )));
        }
        if self.policy.few_shot_min > self.policy.fine_tune_min {
            return Err(CliError::Config(format!(
                "policy.few_shot_min {} exceeds policy.fine_tune_min {}",
                self.policy.few_shot_min, self.policy.fine_tune_min
            )));
        }
        if !(0.0..=1.0).contains(&self.policy.probability_floor) {
            return Err(CliError::Config(format!(
                "policy.probability_floor must be within [0, 1], got {}",
                self.policy.probability_floor
            )));
        }
        if self.clients.embed_dim < 2 {
            return Err(CliError::Config(format!(
                "clients.embed_dim must be at least 2, got {}",
                self.clients.embed_dim
            )));
        }
        if self.clients.in_flight == 0 {
            return Err(CliError::Config("clients.in_flight must be at least 1".to_string()));
        }
        Ok(())
    }

    /// API key for the HTTP text client; never read from the file.
    pub fn api_key(&self) -> Option<String> {
        std::env::var("RETAIN_TEXT_API_KEY").ok().filter(|k| !k.is_empty())
    }

    /// SMTP login; never read from the file.
    pub fn smtp_credentials(&self) -> Option<(String, String)> {
        let user = std::env::var("RETAIN_SMTP_USER").ok().filter(|v| !v.is_empty())?;
        let pass = std::env::var("RETAIN_SMTP_PASS").ok().filter(|v| !v.is_empty())?;
        Some((user, pass))
    }
}
