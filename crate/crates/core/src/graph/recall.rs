use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::TagGraph;
use crate::encoder::cosine_unchecked;
use crate::error::{Error, Result};
use crate::types::{ContentId, Provenance, TagId};

/// One recalled tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tag: TagId,
    pub score: f64,
    pub provenance: Provenance,
}

/// Ranked, deduplicated candidate tags for one content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CandidateSetRecord")]
pub struct CandidateSet {
    pub content: ContentId,
    pub entries: Vec<Candidate>,
}

#[derive(Deserialize)]
struct CandidateSetRecord {
    content: ContentId,
    entries: Vec<Candidate>,
}

impl TryFrom<CandidateSetRecord> for CandidateSet {
    type Error = Error;

    fn try_from(r: CandidateSetRecord) -> Result<Self> {
        CandidateSet::new(r.content, r.entries)
    }
}

impl CandidateSet {
    /// Keeps the given order; rejects duplicate tags.
    pub fn new(content: ContentId, entries: Vec<Candidate>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.tag) {
                return Err(Error::invalid(format!(
                    "candidate tag `{}` listed twice for `{content}`",
                    e.tag
                )));
            }
        }
        Ok(CandidateSet { content, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, tag: &TagId) -> bool {
        self.entries.iter().any(|e| &e.tag == tag)
    }

    pub fn get(&self, tag: &TagId) -> Option<&Candidate> {
        self.entries.iter().find(|e| &e.tag == tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &TagId> {
        self.entries.iter().map(|e| &e.tag)
    }
}

fn by_score_then_id(a: &(TagId, f64), b: &(TagId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn provenance_rank(p: Provenance) -> u8 {
    match p {
        Provenance::Both => 0,
        Provenance::C2T => 1,
        Provenance::C2C2T => 2,
        Provenance::Feedback => 3,
    }
}

impl TagGraph {
    /// Tags one similarity hop away, by weight descending (ties by id),
    /// truncated to `cap_c2t`.
    pub fn recall_c2t(&self, content: &ContentId) -> Result<Vec<(TagId, f64)>> {
        let node = self.content(content)?;
        let mut out: Vec<(TagId, f64)> =
            node.sim_tags.iter().map(|(t, w)| (t.clone(), *w)).collect();
        out.sort_by(by_score_then_id);
        out.truncate(self.config.cap_c2t);
        Ok(out)
    }

    /// Deterministic tags of similar contents. A tag reached through several
    /// neighbours keeps the highest content–content weight.
    pub fn recall_c2c2t(&self, content: &ContentId) -> Result<Vec<(TagId, f64)>> {
        let node = self.content(content)?;
        let mut best: BTreeMap<&TagId, f64> = BTreeMap::new();
        for (neighbour, w) in &node.sim_contents {
            let Some(n) = self.contents.get(neighbour) else {
                continue;
            };
            for t in &n.det_tags {
                best.entry(t).and_modify(|s| *s = s.max(*w)).or_insert(*w);
            }
        }
        let mut out: Vec<(TagId, f64)> = best.into_iter().map(|(t, w)| (t.clone(), w)).collect();
        out.sort_by(by_score_then_id);
        out.truncate(self.config.cap_c2c2t);
        Ok(out)
    }

    /// Match-based baseline: every tag ranked by direct cosine to the
    /// content (ties by id), top `n`. Ignores thresholds and edges.
    pub fn recall_match(&self, content: &ContentId, n: usize) -> Result<Vec<(TagId, f64)>> {
        let node = self.content(content)?;
        let mut out: Vec<(TagId, f64)> = self
            .tags
            .iter()
            .map(|(t, tn)| (t.clone(), cosine_unchecked(&node.embedding, &tn.embedding)))
            .collect();
        out.sort_by(by_score_then_id);
        out.truncate(n);
        Ok(out)
    }

    /// Union of both meta-paths after their caps. Tags found by both keep
    /// the larger score and provenance `BOTH`. Ordered by score descending,
    /// then `BOTH` < `C2T` < `C2C2T`, then tag id.
    pub fn recall(&self, content: &ContentId) -> Result<CandidateSet> {
        let c2t = self.recall_c2t(content)?;
        let c2c2t = self.recall_c2c2t(content)?;

        let mut merged: BTreeMap<TagId, Candidate> = BTreeMap::new();
        for (tag, score) in c2t {
            merged.insert(
                tag.clone(),
                Candidate {
                    tag,
                    score,
                    provenance: Provenance::C2T,
                },
            );
        }
        for (tag, score) in c2c2t {
            merged
                .entry(tag.clone())
                .and_modify(|c| {
                    c.score = c.score.max(score);
                    c.provenance = Provenance::Both;
                })
                .or_insert(Candidate {
                    tag,
                    score,
                    provenance: Provenance::C2C2T,
                });
        }
        let mut entries: Vec<Candidate> = merged.into_values().collect();
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| provenance_rank(a.provenance).cmp(&provenance_rank(b.provenance)))
                .then_with(|| a.tag.cmp(&b.tag))
        });
        Ok(CandidateSet {
            content: content.clone(),
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Embedding;
    use crate::graph::GraphConfig;

    fn cid(s: &str) -> ContentId {
        ContentId::new(s).unwrap()
    }

    fn tid(s: &str) -> TagId {
        TagId::new(s).unwrap()
    }

    /// Unit vector in the plane at angle whose cosine to (1,0,0) is `c`.
    fn at_cos(c: f64) -> Embedding {
        Embedding::new(vec![c, (1.0 - c * c).sqrt(), 0.0]).unwrap()
    }

    fn graph(cap_c2t: usize) -> TagGraph {
        TagGraph::new(GraphConfig {
            cap_c2t,
            ..GraphConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn c2t_orders_by_weight() {
        let mut g = graph(15);
        for (id, c) in [("t1", 0.6), ("t2", 0.9), ("t3", 0.7)] {
            g.insert_tag(tid(id), at_cos(c)).unwrap();
        }
        g.insert_content(cid("c"), at_cos(1.0)).unwrap();
        let got: Vec<_> = g
            .recall_c2t(&cid("c"))
            .unwrap()
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        assert_eq!(got, vec![tid("t2"), tid("t3"), tid("t1")]);
    }

    #[test]
    fn c2t_truncates_to_cap() {
        let mut g = graph(15);
        for i in 0..20 {
            g.insert_tag(tid(&format!("t{i:02}")), at_cos(0.6 + 0.01 * i as f64))
                .unwrap();
        }
        g.insert_content(cid("c"), at_cos(1.0)).unwrap();
        let got = g.recall_c2t(&cid("c")).unwrap();
        assert_eq!(got.len(), 15);
        assert_eq!(got[0].0, tid("t19"));
        assert_eq!(got[14].0, tid("t05"));
    }

    #[test]
    fn c2c2t_single_path_and_max_dedup() {
        let mut g = graph(15);
        g.insert_tag(tid("t1"), Embedding::new(vec![0.0, 0.0, 1.0]).unwrap())
            .unwrap();
        g.insert_content(cid("c"), at_cos(1.0)).unwrap();
        g.insert_content(cid("n1"), at_cos(0.9)).unwrap();
        g.add_deterministic(&cid("n1"), &tid("t1")).unwrap();
        let got = g.recall_c2c2t(&cid("c")).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].1 - 0.9).abs() < 1e-12);

        // second neighbour at 0.82 through a different direction
        let e = Embedding::new(vec![0.82, 0.0, (1.0f64 - 0.82 * 0.82).sqrt()]).unwrap();
        g.insert_content(cid("n2"), e).unwrap();
        g.add_deterministic(&cid("n2"), &tid("t1")).unwrap();
        let got = g.recall_c2c2t(&cid("c")).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn unknown_content() {
        let g = graph(15);
        assert!(matches!(
            g.recall(&cid("x")),
            Err(Error::UnknownVertex { .. })
        ));
        assert!(g.recall_c2t(&cid("x")).is_err());
        assert!(g.recall_c2c2t(&cid("x")).is_err());
    }

    #[test]
    fn union_merges_overlap() {
        let mut g = graph(15);
        g.insert_content(cid("c"), at_cos(1.0)).unwrap();
        // t shared: C2T weight 0.7, C2C2T weight 0.9
        g.insert_tag(tid("t"), at_cos(0.7)).unwrap();
        g.insert_tag(tid("only_c2t"), at_cos(0.6)).unwrap();
        g.insert_tag(
            tid("only_c2c2t"),
            Embedding::new(vec![0.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap();
        g.insert_content(
            cid("n"),
            Embedding::new(vec![0.9, 0.0, (1.0f64 - 0.81).sqrt()]).unwrap(),
        )
        .unwrap();
        g.commit_tags(&cid("n"), &[tid("t"), tid("only_c2c2t")])
            .unwrap();

        let set = g.recall(&cid("c")).unwrap();
        let shared = set.get(&tid("t")).unwrap();
        assert_eq!(shared.provenance, Provenance::Both);
        assert!((shared.score - 0.9).abs() < 1e-12);
        assert_eq!(set.len(), 3);
        // 0.9 BOTH before 0.9 C2C2T
        assert_eq!(set.entries[0].tag, tid("t"));
        assert_eq!(set.entries[1].tag, tid("only_c2c2t"));
        assert_eq!(set.entries[2].provenance, Provenance::C2T);
    }

    #[test]
    fn candidate_set_rejects_duplicates() {
        let c = Candidate {
            tag: tid("t"),
            score: 0.5,
            provenance: Provenance::C2T,
        };
        assert!(CandidateSet::new(cid("c"), vec![c.clone(), c]).is_err());
    }
}
