//! Scripted completion backend for offline runs and tests.
//!
//! A script is line-delimited JSON, one rule per line:
//!
//! ```json
//! {"fingerprint": "<sha256 hex of prompt>", "response": "TAG: Seals"}
//! {"contains": ["## Tag", "Name: Seals"], "response": "Yes", "token_scores": [...]}
//! {"responses": ["garbled", "TAG: Seals"]}
//! ```
//!
//! Fingerprint rules are consulted first, then the remaining rules in file
//! order; a rule without `fingerprint` or `contains` matches everything.
//! `contains` takes a string or a list of strings that must all occur in the
//! prompt. With `responses`, the n-th call answered by that rule gets the
//! n-th entry (the last one repeats).

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::client::{Completion, CompletionClient, CompletionRequest, TokenScore};
use crate::error::{Error, Result};
use crate::jsonl;

/// Hex SHA-256 of the prompt text.
pub fn prompt_fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Needles {
    One(String),
    All(Vec<String>),
}

impl Needles {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Needles::One(s) => prompt.contains(s.as_str()),
            Needles::All(v) => v.iter().all(|s| prompt.contains(s.as_str())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<Needles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_scores: Option<Vec<TokenScore>>,
}

impl MockRule {
    pub fn reply(response: impl Into<String>) -> Self {
        MockRule {
            fingerprint: None,
            contains: None,
            response: Some(response.into()),
            responses: Vec::new(),
            token_scores: None,
        }
    }

    pub fn for_prompt(mut self, prompt: &str) -> Self {
        self.fingerprint = Some(prompt_fingerprint(prompt));
        self
    }

    pub fn when_contains<S: Into<String>>(mut self, needles: impl IntoIterator<Item = S>) -> Self {
        self.contains = Some(Needles::All(needles.into_iter().map(Into::into).collect()));
        self
    }

    pub fn then(mut self, responses: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.response = None;
        self.responses = responses.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_scores(mut self, scores: Vec<TokenScore>) -> Self {
        self.token_scores = Some(scores);
        self
    }

    /// A Yes/No judgment answer with the given logprobs.
    pub fn judgment(yes_logprob: f64, no_logprob: f64) -> Self {
        let first = TokenScore::yes_no(yes_logprob, no_logprob);
        MockRule::reply(first.token.clone()).with_scores(vec![first])
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.response.is_none() && self.responses.is_empty() {
            return Err(Error::InvalidRecord {
                index,
                reason: "rule needs `response` or `responses`".into(),
            });
        }
        if self.response.is_some() && !self.responses.is_empty() {
            return Err(Error::InvalidRecord {
                index,
                reason: "rule has both `response` and `responses`".into(),
            });
        }
        Ok(())
    }
}

struct Armed {
    rule: MockRule,
    calls: AtomicUsize,
}

/// Deterministic completion backend driven by [`MockRule`]s.
pub struct ScriptedClient {
    identity: String,
    token_scores: bool,
    rules: Vec<Armed>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(rules: Vec<MockRule>) -> Result<Self> {
        for (i, r) in rules.iter().enumerate() {
            r.validate(i + 1)?;
        }
        Ok(ScriptedClient {
            identity: "scripted/1".to_string(),
            token_scores: true,
            rules: rules
                .into_iter()
                .map(|rule| Armed {
                    rule,
                    calls: AtomicUsize::new(0),
                })
                .collect(),
            calls: AtomicUsize::new(0),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut client = ScriptedClient::new(jsonl::read_file(path.as_ref())?)?;
        client.identity = format!("scripted/1 {}", path.as_ref().display());
        Ok(client)
    }

    /// Makes the client behave like a backend without score support.
    pub fn without_token_scores(mut self) -> Self {
        self.token_scores = false;
        self
    }

    /// Total completions served.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn find(&self, prompt: &str) -> Option<&Armed> {
        let fp = prompt_fingerprint(prompt);
        self.rules
            .iter()
            .find(|a| a.rule.fingerprint.as_deref() == Some(fp.as_str()))
            .or_else(|| {
                self.rules.iter().find(|a| {
                    a.rule.fingerprint.is_none()
                        && a.rule.contains.as_ref().is_none_or(|n| n.matches(prompt))
                })
            })
    }
}

impl CompletionClient for ScriptedClient {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn supports_token_scores(&self) -> bool {
        self.token_scores
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let armed = self.find(&request.prompt).ok_or_else(|| {
            Error::BackendUnavailable(format!(
                "scripted client has no rule for prompt {}",
                prompt_fingerprint(&request.prompt)
            ))
        })?;
        let n = armed.calls.fetch_add(1, Ordering::SeqCst);
        let text = match &armed.rule.response {
            Some(r) => r.clone(),
            None => armed.rule.responses[n.min(armed.rule.responses.len() - 1)].clone(),
        };
        let token_scores = if request.want_token_scores && self.token_scores {
            armed.rule.token_scores.clone()
        } else {
            None
        };
        Ok(Completion { text, token_scores })
    }
}
