//! Two-content feedback fixture: `a` is tagged first, and `b` can only reach
//! those tags through `a`'s committed edges.

use std::sync::Arc;

use graphtag_core::encoder::LookupEncoder;
use graphtag_core::genkit::{MockRule, ScriptedClient};
use graphtag_core::graph::{EdgeKind, TagGraph, VertexRef};
use graphtag_core::pipeline::Engine;
use graphtag_core::types::{Content, Tag};

use super::GraphSpec;

pub const TAGS: [(&str, &str, [f64; 4]); 3] = [
    ("seals", "Seals", [1.0, 0.0, 0.0, 0.0]),
    ("boats", "Boats", [0.0, 1.0, 0.0, 0.0]),
    ("weather", "Weather", [0.0, 0.0, 1.0, 0.0]),
];

/// `a` is close to seals and boats; `b` is close to `a` only; `z` is
/// close to nothing.
pub const CONTENTS: [(&str, &str, [f64; 4]); 3] = [
    ("a", "Harbour seals at dawn", [0.55, 0.55, 0.0, 0.63]),
    ("b", "Seal pups on the slipway", [0.3, 0.3, 0.0, 0.905]),
    ("z", "Quarterly tax rules", [0.0, 0.0, -1.0, 0.0]),
];

pub fn encoder() -> Arc<LookupEncoder> {
    let mut enc = LookupEncoder::new(4);
    for (_, text, v) in TAGS.iter().chain(&CONTENTS) {
        enc.insert(*text, v.to_vec()).unwrap();
    }
    Arc::new(enc)
}

pub fn tags() -> Vec<Tag> {
    TAGS.iter()
        .map(|(id, name, _)| Tag::named(id, name).unwrap())
        .collect()
}

pub fn content(id: &str) -> Content {
    let (id, title, _) = CONTENTS.iter().find(|c| c.0 == id).unwrap();
    Content::titled(id, title).unwrap()
}

fn generation(title: &str, answer: &str) -> MockRule {
    MockRule::reply(answer)
        .when_contains(["## Output format".to_string(), format!("Title: {title}\n")])
}

fn judgment(title: &str, tag: &str, yes: f64, no: f64) -> MockRule {
    MockRule::judgment(yes, no).when_contains([
        "## Question".to_string(),
        format!("Title: {title}\n"),
        format!("Name: {tag}\n"),
    ])
}

/// `a` gets Seals and Boats, `b` gets Boats. `b`'s Seals judgment is
/// scripted low so it is pruned.
pub fn script() -> Vec<MockRule> {
    let a = CONTENTS[0].1;
    let b = CONTENTS[1].1;
    vec![
        generation(a, "TAG: Seals\nTAG: Boats"),
        generation(b, "TAG: Boats\nTAG: Seals"),
        judgment(a, "Seals", -0.05, -3.0),
        judgment(a, "Boats", -0.2, -2.0),
        judgment(b, "Boats", -0.1, -2.5),
        judgment(b, "Seals", -3.0, -0.05),
    ]
}

pub fn engine_with(client: ScriptedClient, parallelism: usize) -> Engine {
    let engine = Engine::builder(encoder())
        .completion(Arc::new(client))
        .parallelism(parallelism)
        .build()
        .unwrap();
    engine.ingest_tags(tags()).unwrap();
    engine
}

pub fn engine(parallelism: usize) -> Engine {
    engine_with(ScriptedClient::new(script()).unwrap(), parallelism)
}

/// Plain-data copy of a graph for the brute-force recall oracles.
pub fn spec_of(g: &TagGraph) -> GraphSpec {
    let contents = g
        .content_ids()
        .map(|c| {
            (
                c.to_string(),
                g.content_embedding(c).unwrap().values().to_vec(),
            )
        })
        .collect();
    let tags = g
        .tag_ids()
        .map(|t| (t.to_string(), g.tag_embedding(t).unwrap().values().to_vec()))
        .collect();
    let deterministic = g
        .edges()
        .into_iter()
        .filter(|e| e.kind == EdgeKind::Deterministic)
        .filter_map(|e| match (e.a, e.b) {
            (VertexRef::Content(c), VertexRef::Tag(t))
            | (VertexRef::Tag(t), VertexRef::Content(c)) => Some((c.to_string(), t.to_string())),
            _ => None,
        })
        .collect();
    GraphSpec {
        config: *g.config(),
        contents,
        tags,
        deterministic,
    }
}
