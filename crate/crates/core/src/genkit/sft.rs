//! Supervised fine-tuning data export.

use serde::{Deserialize, Serialize};

use super::template::{PromptTemplates, NO_TAGS};
use crate::error::{Error, Result};
use crate::graph::CandidateSet;
use crate::types::{Content, TagId, TagRepository};

/// One annotated example: the content, the candidates it was shown and the
/// gold tags chosen among them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftExample {
    pub content: Content,
    pub candidates: CandidateSet,
    pub gold: Vec<TagId>,
}

/// `{"input": <basic prompt>, "target": <expected model output>}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub input: String,
    pub target: String,
}

/// The answer the model is trained to produce, in the same `TAG:` line
/// format the parser reads.
pub fn render_target(gold: &[TagId], repo: &TagRepository) -> Result<String> {
    if gold.is_empty() {
        return Ok(NO_TAGS.to_string());
    }
    let lines = gold
        .iter()
        .map(|id| repo.get(id).map(|t| format!("TAG: {}", t.name.trim())))
        .collect::<Result<Vec<_>>>()?;
    Ok(lines.join("\n"))
}

pub fn export_sft(
    examples: &[SftExample],
    templates: &PromptTemplates,
    repo: &TagRepository,
) -> Result<Vec<SftRecord>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let invalid = |reason: String| Error::InvalidRecord {
                index: i + 1,
                reason,
            };
            if ex.candidates.content != ex.content.id {
                return Err(invalid(format!(
                    "candidate set belongs to `{}`, content is `{}`",
                    ex.candidates.content, ex.content.id
                )));
            }
            if let Some(t) = ex.gold.iter().find(|t| !ex.candidates.contains(t)) {
                return Err(invalid(format!(
                    "gold tag `{t}` of `{}` is not among its candidates",
                    ex.content.id
                )));
            }
            let input = templates
                .render_basic(&ex.content, &ex.candidates, repo)
                .map_err(|e| invalid(e.to_string()))?;
            let target = render_target(&ex.gold, repo).map_err(|e| invalid(e.to_string()))?;
            Ok(SftRecord { input, target })
        })
        .collect()
}
