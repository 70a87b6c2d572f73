//! HTTP text-model client.
//!
//! Speaks a minimal completion protocol: POST a JSON body with the prompt
//! and decoding controls, read back `{"text": "..."}`. The bearer token is
//! supplied by the environment, never by configuration files.

use std::time::Duration;

use serde::Deserialize;

use retain_core::predict::{DecodingParams, TextModelClient, TransportError};

pub struct HttpTextClient {
    endpoint: String,
    api_key: Option<String>,
    agent: reqwest::blocking::Client,
    tag: String,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpTextClient {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<HttpTextClient, TransportError> {
        let endpoint = endpoint.into();
        let agent = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::new(format!("building http client: {e}")))?;
        let tag = format!("http:{endpoint}");
        Ok(HttpTextClient { endpoint, api_key, agent, tag })
    }
}

impl TextModelClient for HttpTextClient {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, TransportError> {
        let body = serde_json::json!({
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut request = self.agent.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| TransportError::new(format!("POST {}: {e}", self.endpoint)))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::new(format!(
                "{} returned {}",
                self.endpoint,
                status.as_u16()
            )));
        }
        let parsed: CompletionResponse = response
            .json()
            .map_err(|e| TransportError::new(format!("decoding completion response: {e}")))?;
        Ok(parsed.text)
    }
}
