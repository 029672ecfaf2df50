use std::collections::HashMap;

use log::warn;

use super::client::{CompletionClient, CompletionRequest};
use super::knowledge::{Sample, Segment};
use super::template::{PromptTemplates, NO_TAGS};
use crate::error::{Error, Result};
use crate::graph::CandidateSet;
use crate::types::{normalize_name, Content, TagId, TagRepository};

pub const DEFAULT_MAX_TOKENS: u32 = 256;

/// Retrieved knowledge injected into the generation prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct Knowledge<'a> {
    pub samples: &'a [&'a Sample],
    pub segments: &'a [&'a Segment],
}

/// Outcome of parsing one completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedOutput {
    /// `TAG:` lines in output order (may repeat).
    Tags(Vec<String>),
    /// The explicit no-tag marker.
    NoTags,
    /// Neither `TAG:` lines nor the marker.
    Unparseable,
}

/// Reads `TAG: <name>` lines, ignoring everything else.
pub fn parse_output(text: &str) -> ParsedOutput {
    let mut names = Vec::new();
    let mut no_tags = false;
    for line in text.lines().map(str::trim) {
        if line == NO_TAGS {
            no_tags = true;
            continue;
        }
        let Some(prefix) = line.get(..4) else {
            continue;
        };
        if !prefix.eq_ignore_ascii_case("tag:") {
            continue;
        }
        let name = line[4..].trim().trim_matches(|c| c == '`' || c == '"');
        if !name.trim().is_empty() {
            names.push(name.trim().to_string());
        }
    }
    if !names.is_empty() {
        ParsedOutput::Tags(names)
    } else if no_tags {
        ParsedOutput::NoTags
    } else {
        ParsedOutput::Unparseable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Selected candidate tags in the model's order.
    pub tags: Vec<TagId>,
    /// Names the model produced that match no candidate.
    pub dropped: Vec<String>,
    pub attempts: usize,
}

/// Renders the retrieval prompt, asks the model and maps its answer back
/// onto the candidate set. Names outside the candidates are dropped. One
/// unparseable answer is retried; a second one fails the content.
pub fn generate_tags(
    client: &dyn CompletionClient,
    templates: &PromptTemplates,
    repo: &TagRepository,
    content: &Content,
    candidates: &CandidateSet,
    knowledge: Knowledge<'_>,
    max_tokens: u32,
) -> Result<Generation> {
    let prompt = templates.render_retrieval(
        content,
        candidates,
        knowledge.samples,
        knowledge.segments,
        repo,
    )?;
    let request = CompletionRequest::new(prompt, max_tokens);

    let mut by_name: HashMap<String, &TagId> = HashMap::new();
    for id in candidates.tags() {
        by_name.insert(normalize_name(&repo.get(id)?.name), id);
    }

    for attempt in 1..=2 {
        let completion = client.complete(&request)?;
        let names = match parse_output(&completion.text) {
            ParsedOutput::Tags(names) => names,
            ParsedOutput::NoTags => Vec::new(),
            ParsedOutput::Unparseable => {
                warn!(
                    "unparseable generation for `{}` (attempt {attempt})",
                    content.id
                );
                continue;
            }
        };
        let mut tags: Vec<TagId> = Vec::new();
        let mut dropped = Vec::new();
        for name in names {
            match by_name.get(&normalize_name(&name)) {
                Some(id) if !tags.contains(id) => tags.push((*id).clone()),
                Some(_) => {}
                None => dropped.push(name),
            }
        }
        return Ok(Generation {
            tags,
            dropped,
            attempts: attempt,
        });
    }
    Err(Error::GenerationFailed(format!(
        "unparseable model output for `{}` after retry",
        content.id
    )))
}
