//! Blocking JSON-over-HTTP plumbing shared by the remote backends.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limit::InFlightLimit;

#[derive(Debug)]
pub(crate) struct JsonEndpoint {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
    limit: InFlightLimit,
}

impl JsonEndpoint {
    pub(crate) fn new(
        url: impl Into<String>,
        token: Option<String>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Result<Self> {
        let url = url.into();
        if url.trim().is_empty() {
            return Err(Error::Config("backend url is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(JsonEndpoint {
            url,
            token,
            client,
            limit: InFlightLimit::new(max_in_flight),
        })
    }

    pub(crate) fn url(&self) -> &str {
        &self.url
    }

    pub(crate) fn max_in_flight(&self) -> usize {
        self.limit.max()
    }

    pub(crate) fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let _permit = self.limit.acquire();
        let mut request = self.client.post(&self.url).json(body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.url)))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(Error::BackendUnavailable(format!(
                "{} returned {status}: {}",
                self.url,
                text.chars().take(200).collect::<String>()
            )));
        }
        response.json().map_err(|e| {
            Error::BackendUnavailable(format!("{}: malformed response: {e}", self.url))
        })
    }

    pub(crate) fn get<Resp: DeserializeOwned>(&self, query: &[(&str, String)]) -> Result<Resp> {
        let _permit = self.limit.acquire();
        let mut request = self.client.get(&self.url).query(query);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.url)))?;
        response.json().map_err(|e| {
            Error::BackendUnavailable(format!("{}: malformed response: {e}", self.url))
        })
    }
}
