use std::time::Duration;

use super::client::{Completion, CompletionClient, CompletionRequest};
use crate::error::Result;
use crate::http::JsonEndpoint;

/// HTTP completion backend.
///
/// `POST {"prompt", "max_tokens", "want_token_scores"}` →
/// `{"text", "token_scores"?: [{"token", "logprob", "top_alternatives"}]}`.
#[derive(Debug)]
pub struct RemoteCompletionClient {
    endpoint: JsonEndpoint,
    identity: String,
    token_scores: bool,
}

impl RemoteCompletionClient {
    pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

    pub fn new(
        url: impl Into<String>,
        token: Option<String>,
        max_in_flight: usize,
        supports_token_scores: bool,
    ) -> Result<Self> {
        let endpoint = JsonEndpoint::new(url, token, max_in_flight, Duration::from_secs(120))?;
        let identity = format!("remote/1 {}", endpoint.url());
        Ok(RemoteCompletionClient {
            endpoint,
            identity,
            token_scores: supports_token_scores,
        })
    }
}

impl CompletionClient for RemoteCompletionClient {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn supports_token_scores(&self) -> bool {
        self.token_scores
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        self.endpoint.post(request)
    }
}
