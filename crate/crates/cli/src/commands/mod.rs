//! Subcommand implementations.
//!
//! Each command is a function from parsed arguments and loaded config to a
//! `CliError`-classed result, writing artifacts through the workspace and
//! printing a short human summary to stdout.

pub mod analyze;
pub mod dataset;
pub mod evaluate;
pub mod ingest;
pub mod intervene;
pub mod measure;
pub mod predict;
pub mod simulate;
pub mod train;

use std::time::Duration;

use retain_core::dataset::PredictionInstance;
use retain_core::predict::TextModelClient;
use retain_core::simkit::{build_mock_client, HashEmbedder, MockScript};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::http::HttpTextClient;

/// Model endpoints resolved from config: a verdict client for predictions
/// and a drafting client for emails.
pub struct Clients {
    pub verdict: Box<dyn TextModelClient>,
    pub email: Box<dyn TextModelClient>,
}

/// Build clients per config. `truth` seeds the diversity-sensitive mock's
/// answer key and is ignored by every other behavior.
pub fn build_clients(
    config: &RetainConfig,
    truth: &[PredictionInstance],
) -> Result<Clients, CliError> {
    match config.clients.text.as_str() {
        "mock" => Ok(Clients {
            verdict: build_mock_client(&config.clients.verdict_script, truth),
            email: build_mock_client(&MockScript::EmailEcho, &[]),
        }),
        "http" => {
            let timeout = Duration::from_secs(config.clients.http_timeout_secs);
            let make = || {
                HttpTextClient::new(&config.clients.http_endpoint, config.api_key(), timeout)
                    .map_err(|e| CliError::Config(e.to_string()))
            };
            Ok(Clients { verdict: Box::new(make()?), email: Box::new(make()?) })
        }
        other => Err(CliError::Config(format!("unsupported clients.text {other:?}"))),
    }
}

/// The hash embedder configured for this run.
pub fn build_embedder(config: &RetainConfig) -> Result<HashEmbedder, CliError> {
    let seed = retain_core::hashing::derive_seed(config.seeds.master, "embed");
    HashEmbedder::new(config.clients.embed_dim, seed).map_err(|e| CliError::Config(e.to_string()))
}
