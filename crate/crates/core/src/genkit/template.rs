//! Prompt templates.
//!
//! Every prompt is a sequence of sections joined by a blank line. The slot
//! layout of each template kind is fixed and versioned by
//! [`TEMPLATE_VERSION`]; changing any wording must bump it, since exported
//! training data depends on byte-exact prompts.

use serde::{Deserialize, Serialize};

use super::knowledge::{Sample, Segment};
use crate::error::{Error, Result};
use crate::graph::CandidateSet;
use crate::types::{Content, Tag, TagId, TagRepository};

pub const TEMPLATE_VERSION: &str = "v1";

pub const DEFAULT_PREAMBLE: &str =
    "You are a tagging assistant for an information retrieval system. You assign descriptive tags from a controlled vocabulary to content items.";

/// Marker the model writes when no candidate applies.
pub const NO_TAGS: &str = "NO_TAGS";

const OUTPUT_FORMAT: &str = "## Output format\n\
Select the candidate tags that describe the content, most relevant first. \
Write one tag per line as `TAG: <name>`, using the names exactly as listed above. \
If no candidate fits, write the single line `NO_TAGS`. Write nothing else.";

const QUESTION: &str = "## Question\n\
Is the tag relevant to the content? Answer with a single word: Yes or No.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Basic,
    Retrieval,
    Confidence,
}

impl TemplateKind {
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Basic => &["preamble", "content", "candidates", "output_format"],
            TemplateKind::Retrieval => &[
                "preamble",
                "content",
                "candidates",
                "knowledge",
                "output_format",
            ],
            TemplateKind::Confidence => &["preamble", "content", "tag", "question"],
        }
    }
}

/// The three prompt layouts sharing one scenario preamble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    preamble: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates::new(DEFAULT_PREAMBLE).expect("default preamble is non-empty")
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl PromptTemplates {
    pub fn new(preamble: impl Into<String>) -> Result<Self> {
        let preamble = preamble.into().trim().to_string();
        if preamble.is_empty() {
            return Err(Error::invalid("template preamble must be non-empty"));
        }
        Ok(PromptTemplates { preamble })
    }

    pub fn preamble(&self) -> &str {
        &self.preamble
    }

    fn content_section(c: &Content) -> String {
        let mut s = String::from("## Content");
        let mut field = |label: &str, value: &str| {
            let value = value.trim();
            if !value.is_empty() {
                s.push('\n');
                s.push_str(label);
                s.push_str(": ");
                s.push_str(value);
            }
        };
        field("Title", &c.title);
        field("Category", &c.category);
        field("Body", &c.body);
        for (k, v) in &c.extra {
            field(k, v);
        }
        s
    }

    fn candidate_section(candidates: &CandidateSet, repo: &TagRepository) -> Result<String> {
        if candidates.is_empty() {
            return Err(Error::invalid(format!(
                "no candidate tags for `{}`",
                candidates.content
            )));
        }
        let mut s = String::from("## Candidate tags");
        for (i, tag_id) in candidates.tags().enumerate() {
            let tag = repo.get(tag_id)?;
            s.push_str(&format!("\n{}. {}", i + 1, one_line(&tag.name)));
            let desc = one_line(&tag.description);
            if !desc.is_empty() {
                s.push_str(" - ");
                s.push_str(&desc);
            }
        }
        Ok(s)
    }

    fn tag_names(ids: &[TagId], repo: &TagRepository) -> Result<String> {
        if ids.is_empty() {
            return Ok("(none)".into());
        }
        let names = ids
            .iter()
            .map(|id| repo.get(id).map(|t| one_line(&t.name)))
            .collect::<Result<Vec<_>>>()?;
        Ok(names.join("; "))
    }

    fn knowledge_section(
        samples: &[&Sample],
        segments: &[&Segment],
        repo: &TagRepository,
    ) -> Result<String> {
        let mut s = String::from("## Retrieved knowledge");
        if samples.is_empty() && segments.is_empty() {
            s.push_str("\n(none)");
            return Ok(s);
        }
        for (i, sample) in samples.iter().enumerate() {
            s.push_str(&format!(
                "\n### Example {}\nContent: {}\nCorrect tags: {}\nIncorrect tags: {}",
                i + 1,
                one_line(&sample.content.canonical_text()),
                Self::tag_names(&sample.correct, repo)?,
                Self::tag_names(&sample.incorrect, repo)?,
            ));
        }
        for (i, seg) in segments.iter().enumerate() {
            s.push_str(&format!(
                "\n### Reference {} ({})\n{}",
                i + 1,
                seg.source.as_str(),
                seg.text.trim()
            ));
        }
        Ok(s)
    }

    /// Basic generation prompt: preamble, content, numbered candidates and
    /// the output-format instruction.
    pub fn render_basic(
        &self,
        c: &Content,
        candidates: &CandidateSet,
        repo: &TagRepository,
    ) -> Result<String> {
        Ok([
            self.preamble.clone(),
            Self::content_section(c),
            Self::candidate_section(candidates, repo)?,
            OUTPUT_FORMAT.to_string(),
        ]
        .join("\n\n"))
    }

    /// Basic layout with a retrieved-knowledge section before the output
    /// format: ICL samples first, then corpus segments.
    pub fn render_retrieval(
        &self,
        c: &Content,
        candidates: &CandidateSet,
        samples: &[&Sample],
        segments: &[&Segment],
        repo: &TagRepository,
    ) -> Result<String> {
        Ok([
            self.preamble.clone(),
            Self::content_section(c),
            Self::candidate_section(candidates, repo)?,
            Self::knowledge_section(samples, segments, repo)?,
            OUTPUT_FORMAT.to_string(),
        ]
        .join("\n\n"))
    }

    /// Yes/No relevance judgment for one content–tag pair.
    pub fn render_confidence(&self, c: &Content, t: &Tag) -> String {
        let mut tag = format!("## Tag\nName: {}", one_line(&t.name));
        let desc = one_line(&t.description);
        if !desc.is_empty() {
            tag.push_str("\nDescription: ");
            tag.push_str(&desc);
        }
        [
            self.preamble.clone(),
            Self::content_section(c),
            tag,
            QUESTION.to_string(),
        ]
        .join("\n\n")
    }
}
