//! Knowledge-enhanced tag generation: completion backends, prompt
//! templates, retrieved knowledge, output parsing and training-data export.

mod client;
mod generate;
mod knowledge;
mod mock;
mod remote;
mod sft;
mod template;

pub use client::{Completion, CompletionClient, CompletionRequest, TokenAlternative, TokenScore};
pub use generate::{
    generate_tags, parse_output, Generation, Knowledge, ParsedOutput, DEFAULT_MAX_TOKENS,
};
pub use knowledge::{
    chunk_text, rank_segments, CorpusKnowledgeBase, HttpSearchClient, Sample, SampleKnowledgeBase,
    SampleRecord, SearchClient, Segment, SegmentRecord, SegmentSource, DEFAULT_SEGMENT_MAX_CHARS,
};
pub use mock::{prompt_fingerprint, MockRule, Needles, ScriptedClient};
pub use remote::RemoteCompletionClient;
pub use sft::{export_sft, render_target, SftExample, SftRecord};
pub use template::{PromptTemplates, TemplateKind, DEFAULT_PREAMBLE, NO_TAGS, TEMPLATE_VERSION};
