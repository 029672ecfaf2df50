//! Tag confidence calibration.
//!
//! Each generated tag is judged by a Yes/No relevance prompt. The Yes and No
//! scores at the first answer position go through a two-way softmax; tags
//! under the threshold are pruned. Survivors keep the generator's order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genkit::{CompletionClient, CompletionRequest, PromptTemplates, TokenScore};
use crate::types::{Content, Tag, TagId, TagRepository};

/// Largest double below 1 and smallest positive normal double: confidences
/// are clamped into these so they never round onto an endpoint.
const CONF_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
const CONF_MIN: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Tags scoring strictly below this are removed.
    pub threshold: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { threshold: 0.5 }
    }
}

impl CalibrationConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        let c = CalibrationConfig { threshold };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "calibration threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Yes/No log-scores taken from one answer position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenScorePair {
    pub yes_logprob: f64,
    pub no_logprob: f64,
}

impl TokenScorePair {
    pub fn new(yes_logprob: f64, no_logprob: f64) -> Result<Self> {
        if !yes_logprob.is_finite() || !no_logprob.is_finite() {
            return Err(Error::ScoreUnavailable("non-finite token score".into()));
        }
        Ok(TokenScorePair {
            yes_logprob,
            no_logprob,
        })
    }

    pub fn confidence(&self) -> f64 {
        confidence_from_scores(self.yes_logprob, self.no_logprob)
    }
}

/// `exp(yes) / (exp(yes) + exp(no))`, evaluated after subtracting the max
/// and clamped into the open unit interval.
pub fn confidence_from_scores(yes: f64, no: f64) -> f64 {
    let m = yes.max(no);
    let ey = (yes - m).exp();
    let en = (no - m).exp();
    (ey / (ey + en)).clamp(CONF_MIN, CONF_MAX)
}

fn is_token(candidate: &str, word: &str) -> bool {
    candidate.trim().eq_ignore_ascii_case(word)
}

/// Finds the Yes/No scores at the first non-blank answer position,
/// checking the sampled token and then its alternatives. When a word occurs
/// several times (e.g. `Yes` and ` yes`) its highest score is used.
pub fn extract_yes_no(scores: &[TokenScore]) -> Result<TokenScorePair> {
    let position = scores
        .iter()
        .find(|s| !s.token.trim().is_empty())
        .ok_or_else(|| Error::ScoreUnavailable("completion has no answer token".into()))?;
    let best = |word: &str| {
        std::iter::once((position.token.as_str(), position.logprob))
            .chain(
                position
                    .top_alternatives
                    .iter()
                    .map(|a| (a.token.as_str(), a.logprob)),
            )
            .filter(|(tok, _)| is_token(tok, word))
            .map(|(_, lp)| lp)
            .reduce(f64::max)
    };
    match (best("yes"), best("no")) {
        (Some(yes), Some(no)) => TokenScorePair::new(yes, no),
        (None, None) => Err(Error::ScoreUnavailable(format!(
            "neither Yes nor No among answer token `{}` and its alternatives",
            position.token
        ))),
        (None, Some(_)) => Err(Error::ScoreUnavailable("no score reported for Yes".into())),
        (Some(_), None) => Err(Error::ScoreUnavailable("no score reported for No".into())),
    }
}

/// Scores one content–tag pair with the judgment prompt.
pub fn confidence(
    client: &dyn CompletionClient,
    templates: &PromptTemplates,
    content: &Content,
    tag: &Tag,
) -> Result<f64> {
    if !client.supports_token_scores() {
        return Err(Error::UnsupportedBackend(client.identity().to_string()));
    }
    let prompt = templates.render_confidence(content, tag);
    let completion = client.complete(&CompletionRequest::new(prompt, 1).with_token_scores())?;
    let scores = completion.token_scores.ok_or_else(|| {
        Error::ScoreUnavailable(format!("`{}` returned no token scores", client.identity()))
    })?;
    Ok(extract_yes_no(&scores)?.confidence())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTag {
    pub tag: TagId,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTag {
    pub tag: TagId,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Calibration {
    /// Survivors in the order the tags were given.
    pub kept: Vec<ScoredTag>,
    pub pruned: Vec<ScoredTag>,
    /// Tags whose scoring failed; never kept.
    pub failed: Vec<FailedTag>,
}

/// Splits scored tags at `threshold` (inclusive keep), preserving order.
pub fn prune(scored: &[ScoredTag], threshold: f64) -> (Vec<ScoredTag>, Vec<ScoredTag>) {
    scored
        .iter()
        .cloned()
        .partition(|s| s.confidence >= threshold)
}

/// Survivors ordered by confidence descending, ties by tag id.
pub fn rank_by_confidence(scored: &mut [ScoredTag]) {
    scored.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.tag.cmp(&b.tag))
    });
}

pub fn calibrate(
    client: &dyn CompletionClient,
    templates: &PromptTemplates,
    repo: &TagRepository,
    content: &Content,
    tags: &[TagId],
    config: &CalibrationConfig,
) -> Result<Calibration> {
    config.validate()?;
    let tags = tags
        .iter()
        .map(|id| repo.get(id))
        .collect::<Result<Vec<_>>>()?;
    let mut scored = Vec::new();
    let mut failed = Vec::new();
    for tag in tags {
        match confidence(client, templates, content, tag) {
            Ok(confidence) => scored.push(ScoredTag {
                tag: tag.id.clone(),
                confidence,
            }),
            Err(e) => {
                log::warn!("dropping `{}` for `{}`: {e}", tag.id, content.id);
                failed.push(FailedTag {
                    tag: tag.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let (kept, pruned) = prune(&scored, config.threshold);
    Ok(Calibration {
        kept,
        pruned,
        failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Judgment {
    Yes,
    No,
}

impl Judgment {
    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "Yes" => Some(Judgment::Yes),
            "No" => Some(Judgment::No),
            _ => None,
        }
    }
}

/// An expert judgment of one content–tag pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceExample {
    pub content: Content,
    pub tag: TagId,
    pub label: String,
}

/// `{"input": <judgment prompt>, "label": "Yes"|"No"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub input: String,
    pub label: Judgment,
}

pub fn export_confidence_dataset(
    examples: &[ConfidenceExample],
    templates: &PromptTemplates,
    repo: &TagRepository,
) -> Result<Vec<ConfidenceRecord>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let invalid = |reason: String| Error::InvalidRecord {
                index: i + 1,
                reason,
            };
            let label = Judgment::parse(&ex.label).ok_or_else(|| {
                invalid(format!(
                    "label `{}` is neither \"Yes\" nor \"No\"",
                    ex.label
                ))
            })?;
            let tag = repo.get(&ex.tag).map_err(|e| invalid(e.to_string()))?;
            Ok(ConfidenceRecord {
                input: templates.render_confidence(&ex.content, tag),
                label,
            })
        })
        .collect()
}
