//! Line-delimited JSON snapshots.
//!
//! Layout: a header record, then vertex records (contents, then tags, each
//! sorted by id), then edge records sorted by kind and endpoints. Endpoints
//! are written as `content:<id>` or `tag:<id>`. Loading re-checks every
//! graph invariant, including that no similarity edge is missing.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ContentNode, EdgeKind, GraphConfig, TagGraph, TagNode, VertexRef};
use crate::encoder::{cosine_unchecked, Embedding};
use crate::error::{Error, Result};
use crate::types::{ContentId, TagId};

pub const SNAPSHOT_FORMAT: &str = "graphtag-snapshot";
const SNAPSHOT_VERSION: u32 = 1;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        format: String,
        version: u32,
        #[serde(skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        delta_ct: f64,
        delta_cc: f64,
        cap_c2t: usize,
        cap_c2c2t: usize,
    },
    Content {
        id: ContentId,
        embedding: Vec<f64>,
    },
    Tag {
        id: TagId,
        embedding: Vec<f64>,
    },
    Deterministic {
        a: String,
        b: String,
    },
    Similarity {
        a: String,
        b: String,
        weight: f64,
    },
}

fn endpoint(v: &VertexRef) -> String {
    v.to_string()
}

fn parse_endpoint(s: &str) -> std::result::Result<VertexRef, String> {
    let (kind, id) = s
        .split_once(':')
        .ok_or_else(|| format!("endpoint `{s}` lacks a `content:`/`tag:` prefix"))?;
    match kind {
        "content" => ContentId::new(id)
            .map(VertexRef::Content)
            .map_err(|e| e.to_string()),
        "tag" => TagId::new(id)
            .map(VertexRef::Tag)
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown vertex kind `{other}`")),
    }
}

impl TagGraph {
    pub fn write_snapshot(&self, mut out: impl Write) -> Result<()> {
        let mut line = |r: &Record| -> Result<()> {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
            Ok(())
        };
        line(&Record::Header {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            dim: self.dim,
            delta_ct: self.config.delta_ct,
            delta_cc: self.config.delta_cc,
            cap_c2t: self.config.cap_c2t,
            cap_c2c2t: self.config.cap_c2c2t,
        })?;
        for (id, node) in &self.contents {
            line(&Record::Content {
                id: id.clone(),
                embedding: node.embedding.values().to_vec(),
            })?;
        }
        for (id, node) in &self.tags {
            line(&Record::Tag {
                id: id.clone(),
                embedding: node.embedding.values().to_vec(),
            })?;
        }
        for edge in self.edges() {
            let (a, b) = (endpoint(&edge.a), endpoint(&edge.b));
            match edge.kind {
                EdgeKind::Deterministic => line(&Record::Deterministic { a, b })?,
                EdgeKind::Similarity => line(&Record::Similarity {
                    a,
                    b,
                    weight: edge.weight.expect("similarity edges carry a weight"),
                })?,
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// Parses and validates a snapshot. Any violated invariant is reported
    /// with the offending line.
    pub fn read_snapshot(input: impl BufRead) -> Result<TagGraph> {
        let mut loader: Option<Loader> = None;
        let mut last_line = 0;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            last_line = lineno;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| Error::CorruptSnapshot {
                line: lineno,
                message,
            };
            let record: Record = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            match (&mut loader, record) {
                (
                    None,
                    Record::Header {
                        format,
                        version,
                        dim,
                        delta_ct,
                        delta_cc,
                        cap_c2t,
                        cap_c2c2t,
                    },
                ) => {
                    if format != SNAPSHOT_FORMAT || version != SNAPSHOT_VERSION {
                        return Err(corrupt(format!("unsupported snapshot {format} v{version}")));
                    }
                    let config = GraphConfig {
                        delta_ct,
                        delta_cc,
                        cap_c2t,
                        cap_c2c2t,
                    };
                    config.validate().map_err(|e| corrupt(e.to_string()))?;
                    loader = Some(Loader::new(config, dim));
                }
                (None, _) => return Err(corrupt("first record must be the header".into())),
                (Some(_), Record::Header { .. }) => return Err(corrupt("duplicate header".into())),
                (Some(l), record) => l.accept(record).map_err(corrupt)?,
            }
        }
        let loader = loader.ok_or(Error::CorruptSnapshot {
            line: last_line,
            message: "empty snapshot".into(),
        })?;
        loader.finish().map_err(|message| Error::CorruptSnapshot {
            line: last_line,
            message,
        })
    }
}

struct Loader {
    graph: TagGraph,
    seen_edges: bool,
    ct_pairs: HashSet<(ContentId, TagId)>,
    cc_pairs: HashSet<(ContentId, ContentId)>,
}

impl Loader {
    fn new(config: GraphConfig, dim: Option<usize>) -> Self {
        Loader {
            graph: TagGraph {
                config,
                dim,
                contents: BTreeMap::new(),
                tags: BTreeMap::new(),
            },
            seen_edges: false,
            ct_pairs: HashSet::new(),
            cc_pairs: HashSet::new(),
        }
    }

    fn embedding(&self, values: Vec<f64>) -> std::result::Result<Embedding, String> {
        let e = Embedding::new(values).map_err(|e| e.to_string())?;
        match self.graph.dim {
            Some(d) if d != e.dim() => Err(format!(
                "embedding dimension {} differs from header dimension {d}",
                e.dim()
            )),
            None => Err("header declares no dimension but vertices are present".into()),
            _ => Ok(e),
        }
    }

    fn accept(&mut self, record: Record) -> std::result::Result<(), String> {
        match record {
            Record::Header { .. } => unreachable!("handled by caller"),
            Record::Content { id, embedding } => {
                self.vertex_phase()?;
                let embedding = self.embedding(embedding)?;
                if self.graph.contents.contains_key(&id) {
                    return Err(format!("duplicate content vertex `{id}`"));
                }
                self.graph.contents.insert(
                    id,
                    ContentNode {
                        embedding,
                        sim_tags: HashMap::new(),
                        sim_contents: HashMap::new(),
                        det_tags: BTreeSet::new(),
                    },
                );
            }
            Record::Tag { id, embedding } => {
                self.vertex_phase()?;
                let embedding = self.embedding(embedding)?;
                if self.graph.tags.contains_key(&id) {
                    return Err(format!("duplicate tag vertex `{id}`"));
                }
                self.graph.tags.insert(
                    id,
                    TagNode {
                        embedding,
                        sim_contents: BTreeSet::new(),
                        det_contents: BTreeSet::new(),
                    },
                );
            }
            Record::Deterministic { a, b } => {
                self.seen_edges = true;
                let (a, b) = (parse_endpoint(&a)?, parse_endpoint(&b)?);
                match self.graph.add_deterministic_between(&a, &b) {
                    Ok(true) => {}
                    Ok(false) => return Err(format!("duplicate deterministic edge {a} – {b}")),
                    Err(e) => return Err(e.to_string()),
                }
            }
            Record::Similarity { a, b, weight } => {
                self.seen_edges = true;
                let (a, b) = (parse_endpoint(&a)?, parse_endpoint(&b)?);
                self.similarity(a, b, weight)?;
            }
        }
        Ok(())
    }

    fn vertex_phase(&self) -> std::result::Result<(), String> {
        if self.seen_edges {
            return Err("vertex record after edge records".into());
        }
        Ok(())
    }

    fn similarity(
        &mut self,
        a: VertexRef,
        b: VertexRef,
        weight: f64,
    ) -> std::result::Result<(), String> {
        let g = &mut self.graph;
        match (a, b) {
            (VertexRef::Content(c), VertexRef::Tag(t))
            | (VertexRef::Tag(t), VertexRef::Content(c)) => {
                let cn = g.contents.get(&c).ok_or(format!("unknown content `{c}`"))?;
                let tn = g.tags.get(&t).ok_or(format!("unknown tag `{t}`"))?;
                let expected = cosine_unchecked(&cn.embedding, &tn.embedding);
                check_weight(weight, expected, g.config.delta_ct)?;
                if !self.ct_pairs.insert((c.clone(), t.clone())) {
                    return Err(format!("duplicate similarity edge content:{c} – tag:{t}"));
                }
                g.contents
                    .get_mut(&c)
                    .unwrap()
                    .sim_tags
                    .insert(t.clone(), weight);
                g.tags.get_mut(&t).unwrap().sim_contents.insert(c);
            }
            (VertexRef::Content(x), VertexRef::Content(y)) => {
                if x == y {
                    return Err(format!("self-loop on content `{x}`"));
                }
                let xn = g.contents.get(&x).ok_or(format!("unknown content `{x}`"))?;
                let yn = g.contents.get(&y).ok_or(format!("unknown content `{y}`"))?;
                let expected = cosine_unchecked(&xn.embedding, &yn.embedding);
                check_weight(weight, expected, g.config.delta_cc)?;
                let key = if x < y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                };
                if !self.cc_pairs.insert(key) {
                    return Err(format!(
                        "duplicate similarity edge content:{x} – content:{y}"
                    ));
                }
                g.contents
                    .get_mut(&x)
                    .unwrap()
                    .sim_contents
                    .insert(y.clone(), weight);
                g.contents
                    .get_mut(&y)
                    .unwrap()
                    .sim_contents
                    .insert(x, weight);
            }
            (VertexRef::Tag(x), VertexRef::Tag(y)) => {
                return Err(format!("tag–tag edge tag:{x} – tag:{y} is not allowed"))
            }
        }
        Ok(())
    }

    /// Verifies no similarity edge is missing.
    fn finish(self) -> std::result::Result<TagGraph, String> {
        let g = self.graph;
        let cfg = g.config;
        let contents: Vec<_> = g.contents.iter().collect();
        for (i, (cid, cn)) in contents.iter().enumerate() {
            for (tid, tn) in &g.tags {
                let w = cosine_unchecked(&cn.embedding, &tn.embedding);
                if w >= cfg.delta_ct && !cn.sim_tags.contains_key(tid) {
                    return Err(format!(
                        "missing similarity edge content:{cid} – tag:{tid} (cosine {w} ≥ {})",
                        cfg.delta_ct
                    ));
                }
            }
            for (oid, on) in &contents[i + 1..] {
                let w = cosine_unchecked(&cn.embedding, &on.embedding);
                if w >= cfg.delta_cc && !cn.sim_contents.contains_key(*oid) {
                    return Err(format!(
                        "missing similarity edge content:{cid} – content:{oid} (cosine {w} ≥ {})",
                        cfg.delta_cc
                    ));
                }
            }
        }
        Ok(g)
    }
}

fn check_weight(weight: f64, expected: f64, threshold: f64) -> std::result::Result<(), String> {
    if !weight.is_finite() || (weight - expected).abs() > WEIGHT_TOLERANCE {
        return Err(format!(
            "similarity weight {weight} does not match endpoint cosine {expected}"
        ));
    }
    if expected < threshold {
        return Err(format!(
            "similarity weight {weight} below threshold {threshold}"
        ));
    }
    Ok(())
}
