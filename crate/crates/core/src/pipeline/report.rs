use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibrate::{FailedTag, ScoredTag};
use crate::error::Result;
use crate::graph::Candidate;
use crate::types::{ContentId, TagAssignment, TagId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntryStatus {
    Ok,
    /// Recall found nothing; the model was not called.
    NoCandidates,
    /// Processing failed; the graph was left as it was before.
    Error,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub embed_ms: f64,
    pub recall_ms: f64,
    pub generate_ms: f64,
    pub calibrate_ms: f64,
}

/// Outcome for one content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub content: ContentId,
    pub status: EntryStatus,
    /// Recalled candidate set.
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    /// Tags the model selected, in its order.
    #[serde(default)]
    pub generated: Vec<TagId>,
    /// Model outputs that matched no candidate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
    /// Calibrated survivors, committed as deterministic edges.
    #[serde(default)]
    pub assignments: Vec<TagAssignment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<ScoredTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed_tags: Vec<FailedTag>,
    /// New deterministic edges written.
    #[serde(default)]
    pub committed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl ReportEntry {
    pub fn failed(content: ContentId, error: impl ToString) -> Self {
        ReportEntry {
            content,
            status: EntryStatus::Error,
            candidates: Vec::new(),
            generated: Vec::new(),
            dropped: Vec::new(),
            assignments: Vec::new(),
            pruned: Vec::new(),
            failed_tags: Vec::new(),
            committed: 0,
            error: Some(error.to_string()),
            warnings: Vec::new(),
            timings: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub contents: usize,
    pub tagged: usize,
    pub no_candidates: usize,
    pub errors: usize,
    pub assignments: usize,
    pub committed_edges: usize,
}

impl Summary {
    pub fn record(&mut self, e: &ReportEntry) {
        self.contents += 1;
        match e.status {
            EntryStatus::Ok if !e.assignments.is_empty() => self.tagged += 1,
            EntryStatus::Ok => {}
            EntryStatus::NoCandidates => self.no_candidates += 1,
            EntryStatus::Error => self.errors += 1,
        }
        self.assignments += e.assignments.len();
        self.committed_edges += e.committed;
    }
}

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ReportLine {
    Content(ReportEntry),
    Summary(Summary),
}

/// Entries in input order plus aggregate counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggingReport {
    pub entries: Vec<ReportEntry>,
    pub summary: Summary,
}

impl TaggingReport {
    pub fn push(&mut self, e: ReportEntry) {
        self.summary.record(&e);
        self.entries.push(e);
    }

    /// JSONL: one `content` line per entry, then a `summary` line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for e in &self.entries {
            write_line(&mut out, &ReportLine::Content(e.clone()))?;
        }
        write_line(&mut out, &ReportLine::Summary(self.summary))?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }
}

pub(crate) fn write_line(out: &mut impl Write, line: &ReportLine) -> Result<()> {
    serde_json::to_writer(&mut *out, line).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}
