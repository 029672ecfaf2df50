use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{check_text, Embedding, Encoder};
use crate::error::{Error, Result};
use crate::http::JsonEndpoint;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

/// Client for an HTTP embedding service.
///
/// `POST {"input": [text, ...]}` → `{"data": [{"embedding": [...]}, ...]}`,
/// one datum per input in order.
#[derive(Debug)]
pub struct RemoteEncoder {
    endpoint: JsonEndpoint,
    dim: usize,
    identity: String,
}

impl RemoteEncoder {
    pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

    pub fn new(
        url: impl Into<String>,
        token: Option<String>,
        dim: usize,
        max_in_flight: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("remote encoder dim must be positive".into()));
        }
        let endpoint = JsonEndpoint::new(url, token, max_in_flight, Duration::from_secs(60))?;
        let identity = format!("remote/1 {} dim={dim}", endpoint.url());
        Ok(RemoteEncoder {
            endpoint,
            dim,
            identity,
        })
    }

    pub fn max_in_flight(&self) -> usize {
        self.endpoint.max_in_flight()
    }
}

impl Encoder for RemoteEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn identity(&self) -> &str {
        &self.identity
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        for t in texts {
            check_text(t)?;
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let response: EmbedResponse = self.endpoint.post(&EmbedRequest { input: texts })?;
        if response.data.len() != texts.len() {
            return Err(Error::BackendUnavailable(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                response.data.len()
            )));
        }
        response
            .data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dim {
                    return Err(Error::BackendUnavailable(format!(
                        "expected dimension {}, got {}",
                        self.dim,
                        d.embedding.len()
                    )));
                }
                Embedding::new(d.embedding)
                    .map_err(|e| Error::BackendUnavailable(format!("bad embedding: {e}")))
            })
            .collect()
    }
}
