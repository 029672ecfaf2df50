//! The content–tag semantic graph.
//!
//! Vertices are contents and tags. Deterministic edges record confirmed
//! annotations (content–tag only). Similarity edges link content–tag pairs
//! whose cosine is at least `delta_ct` and content–content pairs at least
//! `delta_cc`; they are discovered by an exhaustive scan whenever a vertex is
//! inserted, so the edge set depends only on the vertex set, never on the
//! insertion order.
//!
//! Candidate tags are recalled along two meta-paths: C2T (one similarity
//! hop) and C2C2T (similarity hop to a neighbouring content, then its
//! deterministic tags).

mod recall;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::encoder::{cosine_unchecked, Embedding, Encoder};
use crate::error::{Error, Result, VertexKind};
use crate::types::{Content, ContentId, Tag, TagId};

pub use recall::{Candidate, CandidateSet};
pub use snapshot::SNAPSHOT_FORMAT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Minimum content–tag cosine for a similarity edge.
    pub delta_ct: f64,
    /// Minimum content–content cosine for a similarity edge.
    pub delta_cc: f64,
    /// Maximum tags recalled along C2T.
    pub cap_c2t: usize,
    /// Maximum tags recalled along C2C2T.
    pub cap_c2c2t: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            delta_ct: 0.5,
            delta_cc: 0.8,
            cap_c2t: 15,
            cap_c2c2t: 5,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("delta_ct", self.delta_ct), ("delta_cc", self.delta_cc)] {
            if !(d > -1.0 && d <= 1.0) {
                return Err(Error::Config(format!("{name} = {d} outside (-1, 1]")));
            }
        }
        if self.cap_c2t == 0 || self.cap_c2c2t == 0 {
            return Err(Error::Config("recall caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Typed reference to a graph vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexRef {
    Content(ContentId),
    Tag(TagId),
}

impl VertexRef {
    pub fn kind(&self) -> VertexKind {
        match self {
            VertexRef::Content(_) => VertexKind::Content,
            VertexRef::Tag(_) => VertexKind::Tag,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            VertexRef::Content(c) => c.as_str(),
            VertexRef::Tag(t) => t.as_str(),
        }
    }
}

impl std::fmt::Display for VertexRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind(), self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Deterministic,
    Similarity,
}

/// An undirected edge as reported by [`TagGraph::edges`]. `a` sorts before `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub a: VertexRef,
    pub b: VertexRef,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone)]
struct ContentNode {
    embedding: Embedding,
    sim_tags: HashMap<TagId, f64>,
    sim_contents: HashMap<ContentId, f64>,
    det_tags: BTreeSet<TagId>,
}

#[derive(Debug, Clone)]
struct TagNode {
    embedding: Embedding,
    sim_contents: BTreeSet<ContentId>,
    det_contents: BTreeSet<ContentId>,
}

/// Shared-reader / exclusive-writer: wrap in a lock when recall and
/// mutation can overlap.
#[derive(Debug, Clone)]
pub struct TagGraph {
    config: GraphConfig,
    dim: Option<usize>,
    contents: BTreeMap<ContentId, ContentNode>,
    tags: BTreeMap<TagId, TagNode>,
}

impl TagGraph {
    pub fn new(config: GraphConfig) -> Result<Self> {
        config.validate()?;
        Ok(TagGraph {
            config,
            dim: None,
            contents: BTreeMap::new(),
            tags: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn content_count(&self) -> usize {
        self.contents.len()
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.contents.len() + self.tags.len()
    }

    pub fn has_content(&self, id: &ContentId) -> bool {
        self.contents.contains_key(id)
    }

    pub fn has_tag(&self, id: &TagId) -> bool {
        self.tags.contains_key(id)
    }

    pub fn content_ids(&self) -> impl Iterator<Item = &ContentId> {
        self.contents.keys()
    }

    pub fn tag_ids(&self) -> impl Iterator<Item = &TagId> {
        self.tags.keys()
    }

    pub fn content_embedding(&self, id: &ContentId) -> Result<&Embedding> {
        Ok(&self.content(id)?.embedding)
    }

    pub fn tag_embedding(&self, id: &TagId) -> Result<&Embedding> {
        self.tags
            .get(id)
            .map(|n| &n.embedding)
            .ok_or_else(|| Error::unknown(VertexKind::Tag, id.as_str()))
    }

    /// Tags deterministically attached to `id`.
    pub fn deterministic_tags(&self, id: &ContentId) -> Result<impl Iterator<Item = &TagId>> {
        Ok(self.content(id)?.det_tags.iter())
    }

    fn content(&self, id: &ContentId) -> Result<&ContentNode> {
        self.contents
            .get(id)
            .ok_or_else(|| Error::unknown(VertexKind::Content, id.as_str()))
    }

    fn check_dim(&self, e: &Embedding) -> Result<()> {
        match self.dim {
            Some(d) if d != e.dim() => Err(Error::invalid(format!(
                "embedding dimension {} does not match graph dimension {d}",
                e.dim()
            ))),
            _ => Ok(()),
        }
    }

    /// Embeds `canonical_text(tag)` and inserts the tag vertex.
    pub fn add_tag(&mut self, tag: &Tag, encoder: &dyn Encoder) -> Result<VertexRef> {
        if self.tags.contains_key(&tag.id) {
            return Err(duplicate(VertexKind::Tag, tag.id.as_str()));
        }
        let embedding = encoder.embed(&tag.canonical_text())?;
        self.insert_tag(tag.id.clone(), embedding)
    }

    /// Embeds `canonical_text(content)` and inserts the content vertex.
    pub fn add_content(&mut self, content: &Content, encoder: &dyn Encoder) -> Result<VertexRef> {
        if self.contents.contains_key(&content.id) {
            return Err(duplicate(VertexKind::Content, content.id.as_str()));
        }
        let embedding = encoder.embed(&content.canonical_text())?;
        self.insert_content(content.id.clone(), embedding)
    }

    /// Inserts a tag vertex with a precomputed embedding and links it to every
    /// content at cosine ≥ `delta_ct`.
    pub fn insert_tag(&mut self, id: TagId, embedding: Embedding) -> Result<VertexRef> {
        if self.tags.contains_key(&id) {
            return Err(duplicate(VertexKind::Tag, id.as_str()));
        }
        self.check_dim(&embedding)?;
        let mut sim_contents = BTreeSet::new();
        for (cid, node) in self.contents.iter_mut() {
            let w = cosine_unchecked(&node.embedding, &embedding);
            if w >= self.config.delta_ct {
                node.sim_tags.insert(id.clone(), w);
                sim_contents.insert(cid.clone());
            }
        }
        self.dim = Some(embedding.dim());
        self.tags.insert(
            id.clone(),
            TagNode {
                embedding,
                sim_contents,
                det_contents: BTreeSet::new(),
            },
        );
        Ok(VertexRef::Tag(id))
    }

    /// Inserts a content vertex with a precomputed embedding, linking it to
    /// tags at cosine ≥ `delta_ct` and contents at cosine ≥ `delta_cc`.
    pub fn insert_content(&mut self, id: ContentId, embedding: Embedding) -> Result<VertexRef> {
        if self.contents.contains_key(&id) {
            return Err(duplicate(VertexKind::Content, id.as_str()));
        }
        self.check_dim(&embedding)?;
        let mut sim_tags = HashMap::new();
        for (tid, node) in self.tags.iter_mut() {
            let w = cosine_unchecked(&embedding, &node.embedding);
            if w >= self.config.delta_ct {
                sim_tags.insert(tid.clone(), w);
                node.sim_contents.insert(id.clone());
            }
        }
        let mut sim_contents = HashMap::new();
        for (cid, node) in self.contents.iter_mut() {
            let w = cosine_unchecked(&embedding, &node.embedding);
            if w >= self.config.delta_cc {
                sim_contents.insert(cid.clone(), w);
                node.sim_contents.insert(id.clone(), w);
            }
        }
        self.dim = Some(embedding.dim());
        self.contents.insert(
            id.clone(),
            ContentNode {
                embedding,
                sim_tags,
                sim_contents,
                det_tags: BTreeSet::new(),
            },
        );
        Ok(VertexRef::Content(id))
    }

    /// Removes a content vertex and every incident edge.
    pub fn remove_content(&mut self, id: &ContentId) -> Result<()> {
        let node = self
            .contents
            .remove(id)
            .ok_or_else(|| Error::unknown(VertexKind::Content, id.as_str()))?;
        for t in node.sim_tags.keys() {
            if let Some(tn) = self.tags.get_mut(t) {
                tn.sim_contents.remove(id);
            }
        }
        for t in &node.det_tags {
            if let Some(tn) = self.tags.get_mut(t) {
                tn.det_contents.remove(id);
            }
        }
        for c in node.sim_contents.keys() {
            if let Some(cn) = self.contents.get_mut(c) {
                cn.sim_contents.remove(id);
            }
        }
        if self.contents.is_empty() && self.tags.is_empty() {
            self.dim = None;
        }
        Ok(())
    }

    /// Records a confirmed annotation. Returns whether the edge is new.
    pub fn add_deterministic(&mut self, content: &ContentId, tag: &TagId) -> Result<bool> {
        self.add_deterministic_between(
            &VertexRef::Content(content.clone()),
            &VertexRef::Tag(tag.clone()),
        )
    }

    /// Like [`add_deterministic`](Self::add_deterministic) for untyped
    /// endpoints; only content–tag pairs (either order) are accepted.
    pub fn add_deterministic_between(&mut self, a: &VertexRef, b: &VertexRef) -> Result<bool> {
        let (c, t) = match (a, b) {
            (VertexRef::Content(c), VertexRef::Tag(t))
            | (VertexRef::Tag(t), VertexRef::Content(c)) => (c, t),
            _ => {
                return Err(Error::InvalidEdge(format!(
                    "deterministic edges connect a content and a tag, got {a} and {b}"
                )))
            }
        };
        self.content(c)?;
        if !self.tags.contains_key(t) {
            return Err(Error::unknown(VertexKind::Tag, t.as_str()));
        }
        let inserted = self
            .contents
            .get_mut(c)
            .expect("checked above")
            .det_tags
            .insert(t.clone());
        self.tags
            .get_mut(t)
            .expect("checked above")
            .det_contents
            .insert(c.clone());
        Ok(inserted)
    }

    /// Writes final tags back as deterministic edges. All-or-nothing: any
    /// unknown vertex aborts before a single edge is added. Returns the
    /// number of new edges.
    pub fn commit_tags(&mut self, content: &ContentId, tags: &[TagId]) -> Result<usize> {
        self.content(content)?;
        if let Some(t) = tags.iter().find(|t| !self.tags.contains_key(*t)) {
            return Err(Error::unknown(VertexKind::Tag, t.as_str()));
        }
        let mut added = 0;
        for t in tags {
            if self.add_deterministic(content, t)? {
                added += 1;
            }
        }
        Ok(added)
    }

    /// Every edge, sorted by kind then endpoints.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (cid, node) in &self.contents {
            let c = VertexRef::Content(cid.clone());
            for t in &node.det_tags {
                out.push(Edge {
                    kind: EdgeKind::Deterministic,
                    a: c.clone(),
                    b: VertexRef::Tag(t.clone()),
                    weight: None,
                });
            }
            for (other, w) in &node.sim_contents {
                if cid < other {
                    out.push(Edge {
                        kind: EdgeKind::Similarity,
                        a: c.clone(),
                        b: VertexRef::Content(other.clone()),
                        weight: Some(*w),
                    });
                }
            }
            for (t, w) in &node.sim_tags {
                out.push(Edge {
                    kind: EdgeKind::Similarity,
                    a: c.clone(),
                    b: VertexRef::Tag(t.clone()),
                    weight: Some(*w),
                });
            }
        }
        out.sort_by(|x, y| (x.kind, &x.a, &x.b).cmp(&(y.kind, &y.a, &y.b)));
        out
    }

    pub fn edge_count(&self) -> usize {
        let (mut single, mut doubled) = (0, 0);
        for n in self.contents.values() {
            single += n.det_tags.len() + n.sim_tags.len();
            // content–content edges are stored on both endpoints
            doubled += n.sim_contents.len();
        }
        single + doubled / 2
    }

    pub fn deterministic_edge_count(&self) -> usize {
        self.contents.values().map(|n| n.det_tags.len()).sum()
    }
}

fn duplicate(kind: VertexKind, id: &str) -> Error {
    Error::DuplicateVertex {
        kind,
        id: id.to_string(),
    }
}
