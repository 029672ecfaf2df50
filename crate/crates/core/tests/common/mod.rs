//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod feedback;

use std::collections::{BTreeMap, BTreeSet};

use graphtag_core::encoder::Embedding;
use graphtag_core::graph::{GraphConfig, TagGraph};
use graphtag_core::types::{ContentId, Provenance, TagId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A graph described by plain data, independent of `TagGraph`.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub config: GraphConfig,
    pub contents: Vec<(String, Vec<f64>)>,
    pub tags: Vec<(String, Vec<f64>)>,
    pub deterministic: BTreeSet<(String, String)>,
}

pub fn random_graph(rng: &mut ChaCha8Rng, max_vertices: usize) -> GraphSpec {
    let dim = rng.random_range(2..=6);
    let n_contents = rng.random_range(1..max_vertices / 2);
    let n_tags = rng.random_range(1..=max_vertices - n_contents);
    // Integer coordinates make exact score ties common.
    let integer = rng.random_bool(0.5);
    let vector = |rng: &mut ChaCha8Rng| loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                if integer {
                    f64::from(rng.random_range(-2i32..=2))
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        if v.iter().any(|x| *x != 0.0) {
            return v;
        }
    };
    let contents: Vec<(String, Vec<f64>)> = (0..n_contents)
        .map(|i| (format!("c{i}"), vector(rng)))
        .collect();
    let tags: Vec<(String, Vec<f64>)> = (0..n_tags)
        .map(|i| (format!("t{i}"), vector(rng)))
        .collect();
    let mut deterministic = BTreeSet::new();
    let planted = rng.random_range(0..=n_contents * 2);
    for _ in 0..planted {
        let c = &contents[rng.random_range(0..n_contents)].0;
        let t = &tags[rng.random_range(0..n_tags)].0;
        deterministic.insert((c.clone(), t.clone()));
    }
    let config = GraphConfig {
        delta_ct: rng.random_range(-0.2..0.95),
        delta_cc: rng.random_range(0.0..0.95),
        cap_c2t: rng.random_range(1..=20),
        cap_c2c2t: rng.random_range(1..=10),
    };
    GraphSpec {
        config,
        contents,
        tags,
        deterministic,
    }
}

/// Builds a `TagGraph`, inserting vertices in a shuffled order when
/// `order_seed` is given.
pub fn build(spec: &GraphSpec, order_seed: Option<u64>) -> TagGraph {
    let mut g = TagGraph::new(spec.config).unwrap();
    let mut order: Vec<(bool, usize)> = (0..spec.contents.len())
        .map(|i| (true, i))
        .chain((0..spec.tags.len()).map(|i| (false, i)))
        .collect();
    if let Some(seed) = order_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    for (is_content, i) in order {
        if is_content {
            let (id, v) = &spec.contents[i];
            g.insert_content(
                ContentId::new(id.as_str()).unwrap(),
                Embedding::new(v.clone()).unwrap(),
            )
            .unwrap();
        } else {
            let (id, v) = &spec.tags[i];
            g.insert_tag(
                TagId::new(id.as_str()).unwrap(),
                Embedding::new(v.clone()).unwrap(),
            )
            .unwrap();
        }
    }
    let mut det: Vec<&(String, String)> = spec.deterministic.iter().collect();
    if let Some(seed) = order_seed {
        det.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xdead));
    }
    for (c, t) in det {
        g.add_deterministic(
            &ContentId::new(c.as_str()).unwrap(),
            &TagId::new(t.as_str()).unwrap(),
        )
        .unwrap();
    }
    g
}

pub fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

fn rank(mut v: Vec<(String, f64)>, cap: usize) -> Vec<(String, f64)> {
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.truncate(cap);
    v
}

fn vector<'a>(list: &'a [(String, Vec<f64>)], id: &str) -> &'a [f64] {
    &list.iter().find(|(i, _)| i == id).unwrap().1
}

/// Every tag within `delta_ct` of the content, best first, capped.
pub fn oracle_c2t(spec: &GraphSpec, content: &str) -> Vec<(String, f64)> {
    let cv = vector(&spec.contents, content);
    let hits = spec
        .tags
        .iter()
        .map(|(t, tv)| (t.clone(), cos(cv, tv)))
        .filter(|(_, s)| *s >= spec.config.delta_ct)
        .collect();
    rank(hits, spec.config.cap_c2t)
}

/// Annotated tags of every other content within `delta_cc`, scored by the
/// best such content, capped.
pub fn oracle_c2c2t(spec: &GraphSpec, content: &str) -> Vec<(String, f64)> {
    let cv = vector(&spec.contents, content);
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for (other, ov) in &spec.contents {
        if other == content {
            continue;
        }
        let s = cos(cv, ov);
        if s < spec.config.delta_cc {
            continue;
        }
        for (c, t) in &spec.deterministic {
            if c == other {
                let e = best.entry(t.clone()).or_insert(f64::NEG_INFINITY);
                if s > *e {
                    *e = s;
                }
            }
        }
    }
    rank(best.into_iter().collect(), spec.config.cap_c2c2t)
}

pub fn oracle_recall(spec: &GraphSpec, content: &str) -> Vec<(String, f64, Provenance)> {
    let a = oracle_c2t(spec, content);
    let b = oracle_c2c2t(spec, content);
    let mut out: Vec<(String, f64, Provenance)> = Vec::new();
    for (t, s) in &a {
        match b.iter().find(|(u, _)| u == t) {
            Some((_, s2)) => out.push((t.clone(), s.max(*s2), Provenance::Both)),
            None => out.push((t.clone(), *s, Provenance::C2T)),
        }
    }
    for (t, s) in &b {
        if !a.iter().any(|(u, _)| u == t) {
            out.push((t.clone(), *s, Provenance::C2C2T));
        }
    }
    let order = |p: &Provenance| match p {
        Provenance::Both => 0,
        Provenance::C2T => 1,
        _ => 2,
    };
    out.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .unwrap()
            .then(order(&x.2).cmp(&order(&y.2)))
            .then(x.0.cmp(&y.0))
    });
    out
}

/// Literal Acc@k: for each content, the sum over its first `min(k, |T|)`
/// tags of `I(right) / min(k, |T|)`; empty outputs count 0; averaged.
pub fn oracle_acc(judgments: &[Vec<bool>], k: usize) -> f64 {
    let mut total = 0.0;
    for j in judgments {
        let k_eff = k.min(j.len());
        let mut s = 0.0;
        for x in j.iter().take(k_eff) {
            if *x {
                s += 1.0 / k_eff as f64;
            }
        }
        total += s;
    }
    total / judgments.len() as f64
}

pub fn oracle_coverage(judgments: &[Vec<bool>], k: usize) -> f64 {
    let mut covered = 0.0;
    for j in judgments {
        if j.len() >= k {
            covered += 1.0;
        }
    }
    covered / judgments.len() as f64
}

/// (precision, recall, f1) for single-tag predictions.
pub fn oracle_prf(rows: &[(Option<u32>, u32)]) -> (f64, f64, f64) {
    let predicted = rows.iter().filter(|(p, _)| p.is_some()).count() as f64;
    let correct = rows.iter().filter(|(p, g)| *p == Some(*g)).count() as f64;
    let total = rows.len() as f64;
    let p = if predicted == 0.0 {
        0.0
    } else {
        correct / predicted
    };
    let r = if total == 0.0 { 0.0 } else { correct / total };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

/// (#Right, HR#k for each k) from per-content correct-candidate counts.
pub fn oracle_recall_quality(hits: &[usize], ks: &[usize]) -> (f64, Vec<f64>) {
    let n = hits.len() as f64;
    let right = hits.iter().map(|h| *h as f64).sum::<f64>() / n;
    let hr = ks
        .iter()
        .map(|k| hits.iter().filter(|h| **h >= *k).count() as f64 / n)
        .collect();
    (right, hr)
}

/// Random evaluation inputs in both plain and library form.
pub struct MetricFixture {
    pub judgments: Vec<Vec<bool>>,
    pub multi: Vec<graphtag_core::eval::JudgedResult>,
    pub single_rows: Vec<(Option<u32>, u32)>,
    pub single: Vec<graphtag_core::eval::JudgedResult>,
    pub hits: Vec<usize>,
    pub recall: Vec<graphtag_core::eval::RecallJudgment>,
}

pub fn random_metric_fixture(rng: &mut ChaCha8Rng) -> MetricFixture {
    use graphtag_core::eval::{JudgedResult, RecallJudgment, SingleTagResult};

    let n = rng.random_range(1..40);
    let judgments: Vec<Vec<bool>> = (0..n)
        .map(|_| {
            let len = rng.random_range(0..8);
            (0..len).map(|_| rng.random_bool(0.6)).collect()
        })
        .collect();
    let multi = judgments
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let tags = (0..j.len())
                .map(|k| TagId::new(format!("t{k}")).unwrap())
                .collect();
            JudgedResult::multi(ContentId::new(format!("c{i}")).unwrap(), tags, j.clone()).unwrap()
        })
        .collect();

    let single_rows: Vec<(Option<u32>, u32)> = (0..n)
        .map(|_| {
            let gold = rng.random_range(0..4);
            let pred = if rng.random_bool(0.8) {
                Some(rng.random_range(0..4))
            } else {
                None
            };
            (pred, gold)
        })
        .collect();
    let single = single_rows
        .iter()
        .enumerate()
        .map(|(i, (p, g))| {
            JudgedResult::Single(SingleTagResult {
                content: ContentId::new(format!("s{i}")).unwrap(),
                predicted: p.map(|p| TagId::new(format!("t{p}")).unwrap()),
                gold: TagId::new(format!("t{g}")).unwrap(),
            })
        })
        .collect();

    let mut hits = Vec::new();
    let recall = (0..n)
        .map(|i| {
            let pool = rng.random_range(0..10);
            let candidates: Vec<TagId> = (0..pool)
                .map(|k| TagId::new(format!("t{k}")).unwrap())
                .collect();
            let correct: Vec<TagId> = (0..12)
                .filter(|_| rng.random_bool(0.3))
                .map(|k| TagId::new(format!("t{k}")).unwrap())
                .collect();
            hits.push(candidates.iter().filter(|c| correct.contains(c)).count());
            RecallJudgment {
                content: ContentId::new(format!("r{i}")).unwrap(),
                candidates,
                correct,
            }
        })
        .collect();
    MetricFixture {
        judgments,
        multi,
        single_rows,
        single,
        hits,
        recall,
    }
}

/// Compares every metric against the literal oracles; returns the largest
/// absolute difference seen.
pub fn metric_max_error(f: &MetricFixture) -> f64 {
    use graphtag_core::eval;

    let mut worst: f64 = 0.0;
    let mut see = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for k in 1..=5 {
        see(
            eval::acc_at_k(&f.multi, k).unwrap().value,
            oracle_acc(&f.judgments, k),
        );
        see(
            eval::coverage_at_k(&f.multi, k).unwrap(),
            oracle_coverage(&f.judgments, k),
        );
    }
    let prf = eval::precision_recall_f1(&f.single).unwrap();
    let (p, r, f1) = oracle_prf(&f.single_rows);
    see(prf.precision, p);
    see(prf.recall, r);
    see(prf.f1, f1);
    let ks = [1, 2, 3];
    let q = eval::recall_quality(&f.recall, &ks).unwrap();
    let (right, hr) = oracle_recall_quality(&f.hits, &ks);
    see(q.num_right, right);
    for (k, want) in ks.iter().zip(hr) {
        see(q.hit_rate[k], want);
    }
    worst
}
