use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub want_token_scores: bool,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, max_tokens: u32) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            max_tokens,
            want_token_scores: false,
        }
    }

    pub fn with_token_scores(mut self) -> Self {
        self.want_token_scores = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAlternative {
    pub token: String,
    pub logprob: f64,
}

/// Score information for one generated position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub token: String,
    pub logprob: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top_alternatives: Vec<TokenAlternative>,
}

impl TokenScore {
    /// A Yes/No answer position: sampled token is whichever scores higher,
    /// the other appears as the alternative.
    pub fn yes_no(yes_logprob: f64, no_logprob: f64) -> Self {
        let (tok, lp, alt, alt_lp) = if yes_logprob >= no_logprob {
            ("Yes", yes_logprob, "No", no_logprob)
        } else {
            ("No", no_logprob, "Yes", yes_logprob)
        };
        TokenScore {
            token: tok.to_string(),
            logprob: lp,
            top_alternatives: vec![
                TokenAlternative {
                    token: tok.to_string(),
                    logprob: lp,
                },
                TokenAlternative {
                    token: alt.to_string(),
                    logprob: alt_lp,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_scores: Option<Vec<TokenScore>>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            token_scores: None,
        }
    }
}

/// An LLM backend. Implementations are shared across threads and bound
/// their own in-flight requests.
pub trait CompletionClient: Send + Sync {
    /// Backend name and version.
    fn identity(&self) -> &str;

    fn supports_token_scores(&self) -> bool;

    fn complete(&self, request: &CompletionRequest) -> Result<Completion>;
}
