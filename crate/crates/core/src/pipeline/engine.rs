use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use parking_lot::{Mutex, RwLock, RwLockReadGuard};
use serde::{Deserialize, Serialize};

use super::config::{Backends, GenerationConfig, PipelineConfig, RunConfig};
use super::report::{
    write_line, EntryStatus, ReportEntry, ReportLine, Summary, TaggingReport, Timings,
};
use crate::calibrate::{self, CalibrationConfig};
use crate::encoder::{Embedding, Encoder};
use crate::error::{Error, Result, VertexKind};
use crate::genkit::{
    generate_tags, rank_segments, CompletionClient, CorpusKnowledgeBase, Knowledge,
    PromptTemplates, SampleKnowledgeBase, SampleRecord, SearchClient, Segment, SegmentRecord,
    SegmentSource,
};
use crate::graph::{GraphConfig, TagGraph};
use crate::jsonl;
use crate::types::{Content, ContentId, Tag, TagAssignment, TagId, TagRepository};

/// Historical annotation: `{"content": "<id>", "tags": ["<id>", ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub content: ContentId,
    pub tags: Vec<TagId>,
}

/// Receives report lines as chunks complete.
pub trait ReportSink {
    fn entry(&mut self, entry: &ReportEntry) -> Result<()>;

    /// Called after each chunk's feedback is committed.
    fn checkpoint(&mut self, _engine: &Engine) -> Result<()> {
        Ok(())
    }
}

impl ReportSink for TaggingReport {
    fn entry(&mut self, entry: &ReportEntry) -> Result<()> {
        self.push(entry.clone());
        Ok(())
    }
}

/// Writes `content` lines to a writer, flushing after every chunk.
pub struct JsonlSink<W: std::io::Write> {
    out: W,
}

impl<W: std::io::Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        JsonlSink { out }
    }

    pub fn finish(mut self, summary: &Summary) -> Result<W> {
        write_line(&mut self.out, &ReportLine::Summary(*summary))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: std::io::Write> ReportSink for JsonlSink<W> {
    fn entry(&mut self, entry: &ReportEntry) -> Result<()> {
        write_line(&mut self.out, &ReportLine::Content(entry.clone()))
    }

    fn checkpoint(&mut self, _engine: &Engine) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub struct EngineBuilder {
    encoder: Arc<dyn Encoder>,
    completion: Option<Arc<dyn CompletionClient>>,
    search: Option<Arc<dyn SearchClient>>,
    graph: GraphConfig,
    calibration: CalibrationConfig,
    generation: GenerationConfig,
    run: RunConfig,
    samples: SampleKnowledgeBase,
    corpus: CorpusKnowledgeBase,
}

impl EngineBuilder {
    pub fn completion(mut self, client: Arc<dyn CompletionClient>) -> Self {
        self.completion = Some(client);
        self
    }

    pub fn search(mut self, client: Arc<dyn SearchClient>) -> Self {
        self.search = Some(client);
        self
    }

    pub fn graph_config(mut self, config: GraphConfig) -> Self {
        self.graph = config;
        self
    }

    pub fn calibration(mut self, config: CalibrationConfig) -> Self {
        self.calibration = config;
        self
    }

    pub fn generation(mut self, config: GenerationConfig) -> Self {
        self.generation = config;
        self
    }

    pub fn run_config(mut self, config: RunConfig) -> Self {
        self.run = config;
        self
    }

    pub fn parallelism(mut self, parallelism: usize) -> Self {
        self.run.parallelism = parallelism;
        self
    }

    pub fn samples(mut self, samples: SampleKnowledgeBase) -> Self {
        self.samples = samples;
        self
    }

    pub fn corpus(mut self, corpus: CorpusKnowledgeBase) -> Self {
        self.corpus = corpus;
        self
    }

    /// Records per-stage wall-clock timings in report entries. Off by
    /// default so reports are reproducible byte for byte.
    pub fn timings(mut self, on: bool) -> Self {
        self.run.timings = on;
        self
    }

    pub fn build(self) -> Result<Engine> {
        self.calibration.validate()?;
        if self.run.parallelism == 0 || self.run.chunk_size == 0 {
            return Err(Error::Config(
                "parallelism and chunk_size must be positive".into(),
            ));
        }
        let templates = PromptTemplates::new(self.generation.preamble.clone())?;
        Ok(Engine {
            graph: RwLock::new(TagGraph::new(self.graph)?),
            repo: RwLock::new(TagRepository::new()),
            writer: Mutex::new(()),
            templates,
            encoder: self.encoder,
            completion: self.completion,
            search: self.search,
            calibration: self.calibration,
            generation: self.generation,
            run: self.run,
            samples: self.samples,
            corpus: self.corpus,
        })
    }
}

/// The tagging pipeline: recall → generation → calibration → feedback.
///
/// Reads (recall, lookups) share the graph; every mutation goes through one
/// writer lock. Within a chunk all new contents are inserted first, then
/// analysed concurrently against that frozen graph, then their feedback is
/// committed in input order. Output is therefore independent of the
/// parallelism setting.
pub struct Engine {
    graph: RwLock<TagGraph>,
    repo: RwLock<TagRepository>,
    writer: Mutex<()>,
    templates: PromptTemplates,
    encoder: Arc<dyn Encoder>,
    completion: Option<Arc<dyn CompletionClient>>,
    search: Option<Arc<dyn SearchClient>>,
    calibration: CalibrationConfig,
    generation: GenerationConfig,
    run: RunConfig,
    samples: SampleKnowledgeBase,
    corpus: CorpusKnowledgeBase,
}

/// Result of analysing one content before its feedback is committed.
struct Analysis {
    entry: ReportEntry,
    commit: Vec<TagId>,
}

impl Engine {
    pub fn builder(encoder: Arc<dyn Encoder>) -> EngineBuilder {
        EngineBuilder {
            encoder,
            completion: None,
            search: None,
            graph: GraphConfig::default(),
            calibration: CalibrationConfig::default(),
            generation: GenerationConfig::default(),
            run: RunConfig::default(),
            samples: SampleKnowledgeBase::new(),
            corpus: CorpusKnowledgeBase::default(),
        }
    }

    /// Builds backends and loads knowledge files named by `config`.
    pub fn from_config(config: &PipelineConfig) -> Result<Engine> {
        config.validate()?;
        let Backends {
            encoder,
            completion,
            search,
        } = config.build_backends()?;
        let k = &config.knowledge;
        let samples = match &k.samples {
            Some(p) => {
                SampleKnowledgeBase::from_records(jsonl::read_file::<SampleRecord>(p)?, &*encoder)?
            }
            None => SampleKnowledgeBase::new(),
        };
        let corpus = match &k.corpus {
            Some(p) => CorpusKnowledgeBase::from_records(
                jsonl::read_file::<SegmentRecord>(p)?,
                k.segment_max_chars,
                &*encoder,
            )?,
            None => CorpusKnowledgeBase::new(k.segment_max_chars),
        };
        let mut b = Engine::builder(encoder)
            .graph_config(config.graph)
            .calibration(config.calibration)
            .generation(config.generation.clone())
            .run_config(config.pipeline.clone())
            .samples(samples)
            .corpus(corpus);
        if let Some(c) = completion {
            b = b.completion(c);
        }
        if let Some(s) = search {
            b = b.search(s);
        }
        b.build()
    }

    pub fn encoder(&self) -> &dyn Encoder {
        &*self.encoder
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    pub fn parallelism(&self) -> usize {
        self.run.parallelism
    }

    pub fn graph(&self) -> RwLockReadGuard<'_, TagGraph> {
        self.graph.read()
    }

    pub fn repository(&self) -> RwLockReadGuard<'_, TagRepository> {
        self.repo.read()
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        self.graph.read().snapshot_bytes()
    }

    /// Adds tags to the repository and graph. All-or-nothing.
    pub fn ingest_tags(&self, tags: Vec<Tag>) -> Result<usize> {
        let _w = self.writer.lock();
        let mut repo = self.repo.read().clone();
        for t in &tags {
            if repo.contains(&t.id) {
                return Err(Error::DuplicateVertex {
                    kind: VertexKind::Tag,
                    id: t.id.to_string(),
                });
            }
            repo.insert(t.clone())?;
        }
        let embeddings = self.embed_all(tags.iter().map(Tag::canonical_text).collect())?;
        let mut graph = self.graph.write();
        self.check_dim(&graph)?;
        for (t, e) in tags.iter().zip(embeddings) {
            graph.insert_tag(t.id.clone(), e)?;
        }
        *self.repo.write() = repo;
        info!("ingested {} tags", tags.len());
        Ok(tags.len())
    }

    /// Reads a JSONL tag file; parse errors cite the line.
    pub fn ingest_tags_file(&self, path: impl AsRef<Path>) -> Result<usize> {
        self.ingest_tags(jsonl::read_file(path)?)
    }

    /// Adds historical contents and their confirmed annotations without
    /// tagging them. All-or-nothing.
    pub fn ingest_contents(
        &self,
        contents: Vec<Content>,
        annotations: &[Annotation],
    ) -> Result<usize> {
        let _w = self.writer.lock();
        {
            let graph = self.graph.read();
            let repo = self.repo.read();
            let mut seen = HashSet::new();
            for c in &contents {
                if graph.has_content(&c.id) || !seen.insert(&c.id) {
                    return Err(Error::DuplicateVertex {
                        kind: VertexKind::Content,
                        id: c.id.to_string(),
                    });
                }
            }
            for a in annotations {
                if !seen.contains(&a.content) && !graph.has_content(&a.content) {
                    return Err(Error::unknown(VertexKind::Content, a.content.as_str()));
                }
                if let Some(t) = a.tags.iter().find(|t| !repo.contains(t)) {
                    return Err(Error::unknown(VertexKind::Tag, t.as_str()));
                }
            }
        }
        let embeddings = self.embed_all(contents.iter().map(Content::canonical_text).collect())?;
        let mut graph = self.graph.write();
        self.check_dim(&graph)?;
        for (c, e) in contents.iter().zip(embeddings) {
            graph.insert_content(c.id.clone(), e)?;
        }
        for a in annotations {
            graph.commit_tags(&a.content, &a.tags)?;
        }
        Ok(contents.len())
    }

    /// Replaces repository and graph, e.g. when restoring saved state.
    /// The graph's tag vertices must be exactly the repository's tags.
    pub fn restore(&self, repo: TagRepository, graph: TagGraph) -> Result<()> {
        let _w = self.writer.lock();
        let graph_tags: Vec<&TagId> = graph.tag_ids().collect();
        let repo_tags: Vec<&TagId> = repo.iter().map(|t| &t.id).collect();
        if let Some(t) = graph_tags.iter().find(|t| !repo.contains(t)) {
            return Err(Error::invalid(format!(
                "snapshot tag `{t}` is not in the repository"
            )));
        }
        if let Some(t) = repo_tags.iter().find(|t| !graph.has_tag(t)) {
            return Err(Error::invalid(format!(
                "repository tag `{t}` is missing from the snapshot"
            )));
        }
        self.check_dim(&graph)?;
        *self.graph.write() = graph;
        *self.repo.write() = repo;
        Ok(())
    }

    /// Loads a snapshot against the current repository.
    pub fn load_snapshot(&self, input: impl BufRead) -> Result<()> {
        let graph = TagGraph::read_snapshot(input)?;
        let repo = self.repo.read().clone();
        self.restore(repo, graph)
    }

    fn check_dim(&self, graph: &TagGraph) -> Result<()> {
        match graph.dim() {
            Some(d) if d != self.encoder.dim() => Err(Error::Config(format!(
                "graph holds {d}-dimensional embeddings but encoder `{}` produces {}",
                self.encoder.identity(),
                self.encoder.dim()
            ))),
            _ => Ok(()),
        }
    }

    fn embed_all(&self, texts: Vec<String>) -> Result<Vec<Embedding>> {
        par_map(&texts, self.run.parallelism, |t| self.encoder.embed(t))
            .into_iter()
            .collect()
    }

    pub fn candidates(&self, id: &ContentId) -> Result<crate::graph::CandidateSet> {
        self.graph.read().recall(id)
    }

    pub fn tag(&self, id: &TagId) -> Result<Tag> {
        self.repo.read().get(id).cloned()
    }

    /// Confidence that `tag` fits `content`.
    pub fn confidence(&self, content: &Content, tag: &TagId) -> Result<f64> {
        let tag = self.tag(tag)?;
        calibrate::confidence(self.client()?, &self.templates, content, &tag)
    }

    fn client(&self) -> Result<&dyn CompletionClient> {
        self.completion
            .as_deref()
            .ok_or_else(|| Error::Config("no completion backend configured".into()))
    }

    /// Tags one content. On failure the graph is left unchanged and the
    /// error is returned.
    pub fn tag_content(&self, content: Content) -> Result<ReportEntry> {
        self.process_chunk(vec![content])
            .pop()
            .expect("one result per content")
    }

    /// Tags a batch in memory; failures become error entries.
    pub fn run_batch(&self, contents: Vec<Content>) -> TaggingReport {
        let mut report = TaggingReport::default();
        for chunk in contents.chunks(self.run.chunk_size) {
            for (c, r) in chunk.iter().zip(self.process_chunk(chunk.to_vec())) {
                report.push(r.unwrap_or_else(|e| ReportEntry::failed(c.id.clone(), e)));
            }
        }
        report
    }

    /// Streams contents through the pipeline chunk by chunk. Entries reach
    /// `sink` in input order. An input or sink error stops the run after
    /// the entries already produced have been delivered.
    pub fn run_stream(
        &self,
        input: impl IntoIterator<Item = Result<Content>>,
        sink: &mut dyn ReportSink,
    ) -> Result<Summary> {
        let mut summary = Summary::default();
        let mut input = input.into_iter();
        loop {
            let mut chunk = Vec::with_capacity(self.run.chunk_size);
            let mut input_error = None;
            for item in input.by_ref() {
                match item {
                    Ok(c) => chunk.push(c),
                    Err(e) => {
                        input_error = Some(e);
                        break;
                    }
                }
                if chunk.len() == self.run.chunk_size {
                    break;
                }
            }
            let done = chunk.len() < self.run.chunk_size;
            if !chunk.is_empty() {
                let ids: Vec<ContentId> = chunk.iter().map(|c| c.id.clone()).collect();
                for (id, r) in ids.into_iter().zip(self.process_chunk(chunk)) {
                    let entry = r.unwrap_or_else(|e| ReportEntry::failed(id, e));
                    summary.record(&entry);
                    sink.entry(&entry)?;
                }
                sink.checkpoint(self)?;
            }
            if let Some(e) = input_error {
                return Err(e);
            }
            if done {
                return Ok(summary);
            }
        }
    }

    fn process_chunk(&self, contents: Vec<Content>) -> Vec<Result<ReportEntry>> {
        let _w = self.writer.lock();
        let n = contents.len();
        let mut results: Vec<Option<Result<ReportEntry>>> = (0..n).map(|_| None).collect();

        // Reject ids that already exist or repeat within the chunk.
        {
            let graph = self.graph.read();
            let mut seen = HashSet::new();
            for (i, c) in contents.iter().enumerate() {
                if graph.has_content(&c.id) || !seen.insert(&c.id) {
                    results[i] = Some(Err(Error::DuplicateVertex {
                        kind: VertexKind::Content,
                        id: c.id.to_string(),
                    }));
                }
            }
        }

        let pending: Vec<usize> = (0..n).filter(|i| results[*i].is_none()).collect();
        let embedded = par_map(&pending, self.run.parallelism, |&i| {
            let start = Instant::now();
            let e = self.encoder.embed(&contents[i].canonical_text());
            (e, start.elapsed().as_secs_f64() * 1e3)
        });

        let mut live: Vec<(usize, f64)> = Vec::new();
        {
            let mut graph = self.graph.write();
            for (&i, (e, ms)) in pending.iter().zip(embedded) {
                let inserted = e.and_then(|e| {
                    self.check_dim(&graph)?;
                    graph.insert_content(contents[i].id.clone(), e)
                });
                match inserted {
                    Ok(_) => live.push((i, ms)),
                    Err(e) => results[i] = Some(Err(e)),
                }
            }
        }

        let analyses = {
            let graph = self.graph.read();
            let repo = self.repo.read();
            par_map(&live, self.run.parallelism, |&(i, embed_ms)| {
                self.analyze(&graph, &repo, &contents[i], embed_ms)
            })
        };

        let mut graph = self.graph.write();
        for (&(i, _), analysis) in live.iter().zip(analyses) {
            let id = &contents[i].id;
            let outcome = analysis.and_then(|mut a| {
                a.entry.committed = graph.commit_tags(id, &a.commit)?;
                Ok(a.entry)
            });
            if outcome.is_err() {
                graph
                    .remove_content(id)
                    .expect("content inserted in this chunk");
            }
            results[i] = Some(outcome);
        }
        results
            .into_iter()
            .map(|r| r.expect("every content has a result"))
            .collect()
    }

    fn analyze(
        &self,
        graph: &TagGraph,
        repo: &TagRepository,
        content: &Content,
        embed_ms: f64,
    ) -> Result<Analysis> {
        let clock = Instant::now();
        let lap = || clock.elapsed().as_secs_f64() * 1e3;
        let mut timings = Timings {
            embed_ms,
            ..Timings::default()
        };
        let mut entry = ReportEntry {
            content: content.id.clone(),
            status: EntryStatus::Ok,
            candidates: Vec::new(),
            generated: Vec::new(),
            dropped: Vec::new(),
            assignments: Vec::new(),
            pruned: Vec::new(),
            failed_tags: Vec::new(),
            committed: 0,
            error: None,
            warnings: Vec::new(),
            timings: None,
        };

        let candidates = graph.recall(&content.id)?;
        timings.recall_ms = lap();
        entry.candidates = candidates.entries.clone();
        if candidates.is_empty() {
            entry.status = EntryStatus::NoCandidates;
            entry.timings = self.run.timings.then_some(timings);
            return Ok(Analysis {
                entry,
                commit: Vec::new(),
            });
        }

        let client = self.client()?;
        if !client.supports_token_scores() {
            return Err(Error::UnsupportedBackend(client.identity().to_string()));
        }
        let embedding = graph.content_embedding(&content.id)?;
        let samples = if self.generation.icl_n > 0 {
            self.samples.retrieve(embedding, self.generation.icl_n)?
        } else {
            Vec::new()
        };
        let tag_embeddings = candidates
            .tags()
            .map(|t| graph.tag_embedding(t))
            .collect::<Result<Vec<_>>>()?;
        let web = self.web_segments(content, &mut entry.warnings);
        let segments: Vec<&Segment> = if self.generation.rag_n > 0 {
            rank_segments(
                self.corpus.segments().iter().chain(web.segments()),
                embedding,
                &tag_embeddings,
                self.generation.rag_n,
            )?
        } else {
            Vec::new()
        };

        let before = lap();
        let generation = generate_tags(
            client,
            &self.templates,
            repo,
            content,
            &candidates,
            Knowledge {
                samples: &samples,
                segments: &segments,
            },
            self.generation.max_tokens,
        )?;
        timings.generate_ms = lap() - before;
        entry.generated = generation.tags.clone();
        entry.dropped = generation.dropped;

        let before = lap();
        let calibration = calibrate::calibrate(
            client,
            &self.templates,
            repo,
            content,
            &generation.tags,
            &self.calibration,
        )?;
        timings.calibrate_ms = lap() - before;

        let mut commit = Vec::with_capacity(calibration.kept.len());
        for s in &calibration.kept {
            let provenance = candidates
                .get(&s.tag)
                .expect("generated tags come from the candidates")
                .provenance;
            entry.assignments.push(TagAssignment::new(
                content.id.clone(),
                s.tag.clone(),
                Some(s.confidence),
                provenance,
            )?);
            commit.push(s.tag.clone());
        }
        entry.pruned = calibration.pruned;
        entry.failed_tags = calibration.failed;
        entry.timings = self.run.timings.then_some(timings);
        Ok(Analysis { entry, commit })
    }

    /// Live search results for `content`, chunked into web segments.
    /// Search failures are reported as warnings, not errors.
    fn web_segments(&self, content: &Content, warnings: &mut Vec<String>) -> CorpusKnowledgeBase {
        let mut kb = CorpusKnowledgeBase::new(self.corpus.max_chars());
        let Some(search) = &self.search else {
            return kb;
        };
        match search.search(&content.canonical_text(), self.generation.rag_n) {
            Ok(texts) => {
                for text in texts {
                    if let Err(e) = kb.add_document(&text, SegmentSource::Web, &*self.encoder) {
                        warnings.push(format!("search result skipped: {e}"));
                    }
                }
            }
            Err(e) => {
                warn!("search for `{}` failed: {e}", content.id);
                warnings.push(format!("search failed: {e}"));
            }
        }
        kb
    }
}

/// Order-preserving map over at most `workers` scoped threads.
fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            return done;
                        }
                        done.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every item mapped"))
        .collect()
}
