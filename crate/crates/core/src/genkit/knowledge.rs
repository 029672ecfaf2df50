//! Retrievable knowledge for short-term injection: annotated samples for
//! in-context examples and descriptive corpus segments.

use std::cmp::Ordering;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::encoder::{cosine, Embedding, Encoder};
use crate::error::{Error, Result};
use crate::http::JsonEndpoint;
use crate::types::{Content, TagId};

pub const DEFAULT_SEGMENT_MAX_CHARS: usize = 512;

/// A content with its annotated correct and incorrect tags.
#[derive(Debug, Clone)]
pub struct Sample {
    pub content: Content,
    pub correct: Vec<TagId>,
    pub incorrect: Vec<TagId>,
    pub embedding: Embedding,
}

/// On-disk form of a [`Sample`]; the embedding is recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub content: Content,
    #[serde(default)]
    pub correct: Vec<TagId>,
    #[serde(default)]
    pub incorrect: Vec<TagId>,
}

/// Append-only store of annotated samples.
#[derive(Debug, Clone, Default)]
pub struct SampleKnowledgeBase {
    entries: Vec<Sample>,
}

impl SampleKnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(
        &mut self,
        content: Content,
        correct: Vec<TagId>,
        incorrect: Vec<TagId>,
        encoder: &dyn Encoder,
    ) -> Result<()> {
        if let Some(t) = correct.iter().find(|t| incorrect.contains(t)) {
            return Err(Error::invalid(format!(
                "sample `{}` lists `{t}` as both correct and incorrect",
                content.id
            )));
        }
        if let Some(first) = self.entries.first() {
            if first.embedding.dim() != encoder.dim() {
                return Err(Error::invalid("sample embeddings must share one encoder"));
            }
        }
        let embedding = encoder.embed(&content.canonical_text())?;
        self.entries.push(Sample {
            content,
            correct,
            incorrect,
            embedding,
        });
        Ok(())
    }

    pub fn from_records(records: Vec<SampleRecord>, encoder: &dyn Encoder) -> Result<Self> {
        let mut kb = SampleKnowledgeBase::new();
        for (i, r) in records.into_iter().enumerate() {
            kb.add(r.content, r.correct, r.incorrect, encoder)
                .map_err(|e| Error::InvalidRecord {
                    index: i + 1,
                    reason: e.to_string(),
                })?;
        }
        Ok(kb)
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-`n` samples by cosine to `query`; ties keep insertion order.
    pub fn retrieve(&self, query: &Embedding, n: usize) -> Result<Vec<&Sample>> {
        let mut scored = Vec::with_capacity(self.entries.len());
        for (i, s) in self.entries.iter().enumerate() {
            scored.push((cosine(query, &s.embedding)?, i));
        }
        Ok(top_n(scored, n)
            .into_iter()
            .map(|i| &self.entries[i])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSource {
    Web,
    Domain,
}

impl SegmentSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentSource::Web => "web",
            SegmentSource::Domain => "domain",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub text: String,
    pub source: SegmentSource,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub text: String,
    #[serde(default = "default_source")]
    pub source: SegmentSource,
}

fn default_source() -> SegmentSource {
    SegmentSource::Domain
}

/// Descriptive text segments (terminology, tagging rules, web snippets).
#[derive(Debug, Clone)]
pub struct CorpusKnowledgeBase {
    max_chars: usize,
    segments: Vec<Segment>,
}

impl Default for CorpusKnowledgeBase {
    fn default() -> Self {
        CorpusKnowledgeBase::new(DEFAULT_SEGMENT_MAX_CHARS)
    }
}

impl CorpusKnowledgeBase {
    pub fn new(max_chars: usize) -> Self {
        CorpusKnowledgeBase {
            max_chars: max_chars.max(1),
            segments: Vec::new(),
        }
    }

    pub fn max_chars(&self) -> usize {
        self.max_chars
    }

    /// Adds one segment; rejects empty or over-long text.
    pub fn add_segment(
        &mut self,
        text: impl Into<String>,
        source: SegmentSource,
        encoder: &dyn Encoder,
    ) -> Result<()> {
        let text = text.into();
        let len = text.chars().count();
        if text.trim().is_empty() {
            return Err(Error::invalid("corpus segment is empty"));
        }
        if len > self.max_chars {
            return Err(Error::invalid(format!(
                "corpus segment has {len} characters, limit is {}",
                self.max_chars
            )));
        }
        let embedding = encoder.embed(&text)?;
        self.segments.push(Segment {
            text,
            source,
            embedding,
        });
        Ok(())
    }

    /// Splits `text` into segments within the length limit and adds them.
    /// Returns the number of segments added.
    pub fn add_document(
        &mut self,
        text: &str,
        source: SegmentSource,
        encoder: &dyn Encoder,
    ) -> Result<usize> {
        let chunks = chunk_text(text, self.max_chars);
        let n = chunks.len();
        for chunk in chunks {
            self.add_segment(chunk, source, encoder)?;
        }
        Ok(n)
    }

    pub fn from_records(
        records: Vec<SegmentRecord>,
        max_chars: usize,
        encoder: &dyn Encoder,
    ) -> Result<Self> {
        let mut kb = CorpusKnowledgeBase::new(max_chars);
        for (i, r) in records.into_iter().enumerate() {
            kb.add_document(&r.text, r.source, encoder)
                .map_err(|e| Error::InvalidRecord {
                    index: i + 1,
                    reason: e.to_string(),
                })?;
        }
        Ok(kb)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Top-`n` segments scored by the best cosine against the content or any
    /// candidate tag embedding. Ties keep insertion order.
    pub fn retrieve(
        &self,
        content: &Embedding,
        candidate_tags: &[&Embedding],
        n: usize,
    ) -> Result<Vec<&Segment>> {
        rank_segments(&self.segments, content, candidate_tags, n)
    }
}

/// Ranks any segment list the way [`CorpusKnowledgeBase::retrieve`] does.
pub fn rank_segments<'a>(
    segments: impl IntoIterator<Item = &'a Segment>,
    content: &Embedding,
    candidate_tags: &[&Embedding],
    n: usize,
) -> Result<Vec<&'a Segment>> {
    let segments: Vec<&Segment> = segments.into_iter().collect();
    let mut scored = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        let mut best = cosine(content, &seg.embedding)?;
        for t in candidate_tags {
            best = best.max(cosine(t, &seg.embedding)?);
        }
        scored.push((best, i));
    }
    Ok(top_n(scored, n).into_iter().map(|i| segments[i]).collect())
}

fn top_n(mut scored: Vec<(f64, usize)>, n: usize) -> Vec<usize> {
    scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    scored.into_iter().take(n).map(|(_, i)| i).collect()
}

/// Greedy word packing into chunks of at most `max_chars` characters.
/// Words longer than the limit are split.
pub fn chunk_text(text: &str, max_chars: usize) -> Vec<String> {
    let max_chars = max_chars.max(1);
    let mut chunks = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        while word.len() > max_chars {
            if current_len > 0 {
                chunks.push(std::mem::take(&mut current));
                current_len = 0;
            }
            let rest = word.split_off(max_chars);
            chunks.push(word.into_iter().collect());
            word = rest;
        }
        if word.is_empty() {
            continue;
        }
        let extra = word.len() + usize::from(current_len > 0);
        if current_len + extra > max_chars {
            chunks.push(std::mem::take(&mut current));
            current_len = 0;
        }
        if current_len > 0 {
            current.push(' ');
            current_len += 1;
        }
        current.extend(word.iter());
        current_len += word.len();
    }
    if current_len > 0 {
        chunks.push(current);
    }
    chunks
}

/// Live retrieval of descriptive text, merged with the corpus at query time.
pub trait SearchClient: Send + Sync {
    fn search(&self, query: &str, n: usize) -> Result<Vec<String>>;
}

#[derive(Deserialize)]
struct SearchResponse {
    results: Vec<SearchHit>,
}

#[derive(Deserialize)]
struct SearchHit {
    text: String,
}

/// `GET <url>?q=<query>&n=<n>` → `{"results": [{"text": ...}, ...]}`.
#[derive(Debug)]
pub struct HttpSearchClient {
    endpoint: JsonEndpoint,
}

impl HttpSearchClient {
    pub fn new(
        url: impl Into<String>,
        token: Option<String>,
        max_in_flight: usize,
    ) -> Result<Self> {
        Ok(HttpSearchClient {
            endpoint: JsonEndpoint::new(url, token, max_in_flight, Duration::from_secs(30))?,
        })
    }
}

impl SearchClient for HttpSearchClient {
    fn search(&self, query: &str, n: usize) -> Result<Vec<String>> {
        let response: SearchResponse = self
            .endpoint
            .get(&[("q", query.to_string()), ("n", n.to_string())])?;
        Ok(response.results.into_iter().map(|h| h.text).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{HashingEncoder, LookupEncoder};

    fn enc() -> HashingEncoder {
        HashingEncoder::new(64).unwrap()
    }

    #[test]
    fn icl_empty_and_undersupplied() {
        let e = enc();
        let q = e.embed("query").unwrap();
        let mut kb = SampleKnowledgeBase::new();
        assert!(kb.retrieve(&q, 3).unwrap().is_empty());
        for i in 0..2 {
            kb.add(
                Content::titled(&format!("s{i}"), &format!("text {i}")).unwrap(),
                vec![],
                vec![],
                &e,
            )
            .unwrap();
        }
        assert_eq!(kb.retrieve(&q, 3).unwrap().len(), 2);
        assert!(kb.retrieve(&q, 0).unwrap().is_empty());
    }

    #[test]
    fn icl_rejects_overlapping_labels() {
        let t = TagId::new("t").unwrap();
        let err = SampleKnowledgeBase::new()
            .add(
                Content::titled("s", "x").unwrap(),
                vec![t.clone()],
                vec![t],
                &enc(),
            )
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rag_scores_by_best_of_content_and_tags() {
        let e = LookupEncoder::new(3)
            .with("content", vec![1.0, 0.0, 0.0])
            .unwrap()
            .with("tag", vec![0.0, 1.0, 0.0])
            .unwrap()
            .with("defines the tag", vec![0.0, 0.95, 0.05])
            .unwrap()
            .with("unrelated", vec![0.1, 0.1, 1.0])
            .unwrap();
        let mut kb = CorpusKnowledgeBase::default();
        kb.add_segment("unrelated", SegmentSource::Web, &e).unwrap();
        kb.add_segment("defines the tag", SegmentSource::Domain, &e)
            .unwrap();
        let c = e.embed("content").unwrap();
        let t = e.embed("tag").unwrap();
        let got = kb.retrieve(&c, &[&t], 3).unwrap();
        assert_eq!(got[0].text, "defines the tag");
        assert!(kb.retrieve(&c, &[&t], 0).unwrap().is_empty());
        assert!(CorpusKnowledgeBase::default()
            .retrieve(&c, &[], 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn segment_length_bound() {
        let mut kb = CorpusKnowledgeBase::new(10);
        assert!(kb
            .add_segment("x".repeat(11), SegmentSource::Web, &enc())
            .is_err());
        assert!(kb.add_segment("  ", SegmentSource::Web, &enc()).is_err());
        assert_eq!(
            kb.add_document("alpha beta gamma delta", SegmentSource::Web, &enc())
                .unwrap(),
            3
        );
        assert!(kb.segments().iter().all(|s| s.text.chars().count() <= 10));
    }

    #[test]
    fn chunking() {
        assert_eq!(chunk_text("a bb ccc", 4), vec!["a bb", "ccc"]);
        assert_eq!(chunk_text("abcdefghij", 4), vec!["abcd", "efgh", "ij"]);
        assert_eq!(
            chunk_text("x abcdefgh y", 4),
            vec!["x", "abcd", "efgh", "y"]
        );
        assert!(chunk_text("   ", 4).is_empty());
    }
}
