//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::feedback::{self, content, spec_of};
use common::{
    build, metric_max_error, oracle_acc, oracle_c2c2t, oracle_c2t, oracle_recall, random_graph,
    random_metric_fixture,
};
use graphtag_core::calibrate::{confidence_from_scores, CalibrationConfig};
use graphtag_core::encoder::Embedding;
use graphtag_core::eval::{acc_at_k, coverage_at_k, recall_quality, JudgedResult, RecallJudgment};
use graphtag_core::genkit::ScriptedClient;
use graphtag_core::graph::{GraphConfig, TagGraph};
use graphtag_core::pipeline::{Engine, EntryStatus, JsonlSink, RunConfig};
use graphtag_core::synth::{
    recall_fixture, tagging_fixture, RecallFixtureSpec, TaggingFixtureSpec,
};
use graphtag_core::types::{ContentId, Provenance, TagId};
use graphtag_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.1?}, limit {limit:?}")
    })
}

fn graph_recall_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0usize;
    for g in 0..1000 {
        let spec = random_graph(&mut rng, 200);
        let graph = build(&spec, None);
        for (c, _) in &spec.contents {
            let id = ContentId::new(c.as_str()).unwrap();
            let same = |got: Vec<(TagId, f64)>, want: Vec<(String, f64)>| {
                got.len() == want.len()
                    && got
                        .iter()
                        .zip(&want)
                        .all(|((t, a), (u, b))| t.as_str() == u && (a - b).abs() < 1e-12)
            };
            ensure(
                same(graph.recall_c2t(&id).unwrap(), oracle_c2t(&spec, c)),
                || format!("graph {g}: c2t differs for `{c}`"),
            )?;
            ensure(
                same(graph.recall_c2c2t(&id).unwrap(), oracle_c2c2t(&spec, c)),
                || format!("graph {g}: c2c2t differs for `{c}`"),
            )?;
            let got = graph.recall(&id).unwrap();
            let want = oracle_recall(&spec, c);
            let ok = got.len() == want.len()
                && got.entries.iter().zip(&want).all(|(x, (t, s, p))| {
                    x.tag.as_str() == t && x.provenance == *p && (x.score - s).abs() < 1e-12
                });
            ensure(ok, || format!("graph {g}: recall differs for `{c}`"))?;
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "1000 graphs, {checked} contents, {:.1?}",
        start.elapsed()
    ))
}

fn recall_direction() -> Outcome {
    let start = Instant::now();
    let f = recall_fixture(&RecallFixtureSpec::default()).map_err(|e| e.to_string())?;
    let mut graph_j = Vec::new();
    let mut match_j = Vec::new();
    for c in &f.contents {
        let correct = f.correct[c].clone();
        let graph_c: Vec<TagId> = f.graph.recall(c).unwrap().tags().cloned().collect();
        let match_c: Vec<TagId> = f
            .graph
            .recall_match(c, f.match_n)
            .unwrap()
            .into_iter()
            .map(|(t, _)| t)
            .collect();
        graph_j.push(RecallJudgment {
            content: c.clone(),
            candidates: graph_c,
            correct: correct.clone(),
        });
        match_j.push(RecallJudgment {
            content: c.clone(),
            candidates: match_c,
            correct,
        });
    }
    let g = recall_quality(&graph_j, &[1, 2, 3]).unwrap();
    let m = recall_quality(&match_j, &[1, 2, 3]).unwrap();
    let (g_hr3, m_hr3) = (g.hit_rate[&3], m.hit_rate[&3]);
    ensure(g.num_right > m.num_right && g_hr3 > m_hr3, || {
        format!(
            "graph #Right {} HR#3 {g_hr3} vs match #Right {} HR#3 {m_hr3}",
            g.num_right, m.num_right
        )
    })?;
    ensure(
        g.num_right == f.expected.graph_right as f64
            && m.num_right == f.expected.match_right as f64,
        || {
            format!(
                "fixture expected #Right {} vs {}, measured {} vs {}",
                f.expected.graph_right, f.expected.match_right, g.num_right, m.num_right
            )
        },
    )?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{} contents x {} tags: #Right {} vs {}, HR#3 {g_hr3} vs {m_hr3}, margin {}, {:.1?}",
        f.contents.len(),
        f.graph.tag_count(),
        g.num_right,
        m.num_right,
        f.expected.margin(),
        start.elapsed()
    ))
}

fn confidence_formula() -> Outcome {
    ensure(confidence_from_scores(0.0, 0.0) == 0.5, || {
        "equal logits are not 0.5".into()
    })?;
    ensure(confidence_from_scores(-7.25, -7.25) == 0.5, || {
        "equal logits are not 0.5".into()
    })?;
    let a = confidence_from_scores(2.0, 0.0);
    let b = confidence_from_scores(-1.0, 1.0);
    ensure((a - 0.880797).abs() < 1e-6, || format!("(2,0) gave {a}"))?;
    ensure((b - 0.119203).abs() < 1e-6, || format!("(-1,1) gave {b}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100_000 {
        let y: f64 = rng.random_range(-20.0..0.0);
        let n: f64 = rng.random_range(-20.0..0.0);
        let d: f64 = rng.random_range(0.0..5.0);
        let c = confidence_from_scores(y, n);
        let literal = y.exp() / (y.exp() + n.exp());
        ensure((c - literal).abs() < 1e-12, || {
            format!("({y},{n}) gave {c}, formula {literal}")
        })?;
        ensure(confidence_from_scores(y + d, n) >= c, || {
            format!("not monotone in yes at ({y},{n})")
        })?;
        ensure(confidence_from_scores(y, n + d) <= c, || {
            format!("not monotone in no at ({y},{n})")
        })?;
        let swapped = confidence_from_scores(n, y);
        ensure((c + swapped - 1.0).abs() < 1e-12, || {
            format!("swap at ({y},{n}) sums to {}", c + swapped)
        })?;
    }
    Ok("exact points and 100000 random pairs".into())
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let f = random_metric_fixture(&mut rng);
        let err = metric_max_error(&f);
        ensure(err <= 1e-12, || format!("fixture {i}: error {err}"))?;
        worst = worst.max(err);
    }
    let r = JudgedResult::multi(
        ContentId::new("c").unwrap(),
        vec![TagId::new("right").unwrap(), TagId::new("wrong").unwrap()],
        vec![true, false],
    )
    .unwrap();
    let got = acc_at_k(&[r], 3).unwrap().value;
    ensure(
        got == 0.5 && oracle_acc(&[vec![true, false]], 3) == 0.5,
        || format!("worked example gave {got}"),
    )?;
    Ok(format!(
        "1000 fixtures, max error {worst:e}, worked example 0.5"
    ))
}

fn calibration_monotonicity() -> Outcome {
    let start = Instant::now();
    let spec = TaggingFixtureSpec {
        contents: 200,
        ..TaggingFixtureSpec::default()
    };
    let f = tagging_fixture(&spec).map_err(|e| e.to_string())?;
    let mut points = Vec::new();
    for step in 0..=9 {
        let threshold = step as f64 / 10.0;
        let e = Engine::builder(f.encoder.clone())
            .completion(Arc::new(ScriptedClient::new(f.script.clone()).unwrap()))
            .calibration(CalibrationConfig::new(threshold).unwrap())
            .parallelism(4)
            .build()
            .unwrap();
        e.ingest_tags(f.tags.clone()).unwrap();
        e.ingest_contents(f.history.clone(), &f.annotations)
            .unwrap();
        let report = e.run_batch(f.contents.clone());
        let mut results = Vec::new();
        for entry in &report.entries {
            ensure(entry.status == EntryStatus::Ok, || {
                format!("`{}` ended with {:?}", entry.content, entry.status)
            })?;
            let good = &f.planted[&entry.content].good;
            let tags: Vec<TagId> = entry.assignments.iter().map(|a| a.tag.clone()).collect();
            let judgments = tags.iter().map(|t| good.contains(t)).collect();
            results.push(JudgedResult::multi(entry.content.clone(), tags, judgments).unwrap());
        }
        let acc = acc_at_k(&results, 1).unwrap().value;
        let cov = coverage_at_k(&results, 1).unwrap();
        points.push((threshold, acc, cov));
    }
    for w in points.windows(2) {
        let ((t0, a0, c0), (t1, a1, c1)) = (w[0], w[1]);
        ensure(c1 <= c0, || {
            format!("Coverage@1 rose from {c0} at {t0} to {c1} at {t1}")
        })?;
        ensure(a1 >= a0, || {
            format!("Acc@1 fell from {a0} at {t0} to {a1} at {t1}")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    let (first, last) = (points[0], points[points.len() - 1]);
    ensure(last.1 > first.1 && last.2 < first.2, || {
        "sweep shows no trade-off at all".into()
    })?;
    Ok(format!(
        "Acc@1 {:.3} -> {:.3}, Coverage@1 {:.3} -> {:.3}, {:.1?}",
        first.1,
        last.1,
        first.2,
        last.2,
        start.elapsed()
    ))
}

fn end_to_end_determinism() -> Outcome {
    let f = tagging_fixture(&TaggingFixtureSpec::default()).map_err(|e| e.to_string())?;
    let run = |parallelism: usize| -> (Vec<u8>, Vec<u8>) {
        let e = Engine::builder(f.encoder.clone())
            .completion(Arc::new(ScriptedClient::new(f.script.clone()).unwrap()))
            .run_config(RunConfig {
                parallelism,
                chunk_size: 8,
                ..Default::default()
            })
            .build()
            .unwrap();
        e.ingest_tags(f.tags.clone()).unwrap();
        e.ingest_contents(f.history.clone(), &f.annotations)
            .unwrap();
        let mut sink = JsonlSink::new(Vec::new());
        let summary = e
            .run_stream(f.contents.iter().cloned().map(Ok), &mut sink)
            .unwrap();
        (sink.finish(&summary).unwrap(), e.snapshot_bytes())
    };
    let reference = run(1);
    for (label, p) in [("parallelism 4", 4), ("repeat at 1", 1), ("repeat at 4", 4)] {
        let (report, snapshot) = run(p);
        ensure(report == reference.0, || {
            format!("{label}: report bytes differ")
        })?;
        ensure(snapshot == reference.1, || {
            format!("{label}: snapshot bytes differ")
        })?;
    }
    Ok(format!(
        "{} contents, report {} bytes, snapshot {} bytes",
        f.contents.len(),
        reference.0.len(),
        reference.1.len()
    ))
}

fn feedback_loop() -> Outcome {
    let e = feedback::engine(1);
    let first = e.tag_content(content("a")).map_err(|e| e.to_string())?;
    ensure(first.committed == 2, || {
        format!("first content committed {}", first.committed)
    })?;
    let second = e.tag_content(content("b")).map_err(|e| e.to_string())?;
    let spec = spec_of(&e.graph());
    let want = oracle_recall(&spec, "b");
    let got: Vec<(String, Provenance)> = second
        .candidates
        .iter()
        .map(|c| (c.tag.to_string(), c.provenance))
        .collect();
    let want: Vec<(String, Provenance)> = want.into_iter().map(|(t, _, p)| (t, p)).collect();
    ensure(got == want, || {
        format!("candidates {got:?}, oracle {want:?}")
    })?;
    let via_neighbour = got.iter().filter(|(_, p)| *p == Provenance::C2C2T).count();
    ensure(via_neighbour == 2, || {
        format!("{via_neighbour} C2C2T candidates")
    })?;
    ensure(second.committed == 1, || {
        format!("second content committed {}", second.committed)
    })?;
    Ok("committed tags recalled through the neighbour".into())
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    Embedding::new(v).unwrap()
}

fn snapshot_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut largest = 0;
    for (contents, tags, dim) in [(10, 10, 8), (400, 600, 16), (4000, 6000, 32)] {
        let mut g = TagGraph::new(GraphConfig::default()).unwrap();
        for i in 0..tags {
            g.insert_tag(
                TagId::new(format!("t{i}")).unwrap(),
                random_unit(&mut rng, dim),
            )
            .unwrap();
        }
        for i in 0..contents {
            let id = ContentId::new(format!("c{i}")).unwrap();
            g.insert_content(id.clone(), random_unit(&mut rng, dim))
                .unwrap();
            let t = TagId::new(format!("t{}", rng.random_range(0..tags))).unwrap();
            g.add_deterministic(&id, &t).unwrap();
        }
        let bytes = g.snapshot_bytes();
        let loaded = TagGraph::read_snapshot(bytes.as_slice()).map_err(|e| e.to_string())?;
        ensure(loaded.snapshot_bytes() == bytes, || {
            format!("{} vertices: bytes differ", g.vertex_count())
        })?;
        largest = g.vertex_count();
    }

    // Hand-corrupted variants of a small graph.
    let mut g = TagGraph::new(GraphConfig::default()).unwrap();
    let e = |v: &[f64]| Embedding::new(v.to_vec()).unwrap();
    g.insert_tag(TagId::new("t1").unwrap(), e(&[1.0, 0.0]))
        .unwrap();
    g.insert_tag(TagId::new("t2").unwrap(), e(&[0.0, 1.0]))
        .unwrap();
    g.insert_content(ContentId::new("a").unwrap(), e(&[1.0, 0.1]))
        .unwrap();
    g.insert_content(ContentId::new("b").unwrap(), e(&[1.0, 0.2]))
        .unwrap();
    g.add_deterministic(&ContentId::new("a").unwrap(), &TagId::new("t2").unwrap())
        .unwrap();
    let text = String::from_utf8(g.snapshot_bytes()).unwrap();
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    let map_lines = |f: &dyn Fn(&str) -> Vec<String>| -> String {
        lines
            .iter()
            .flat_map(|l| f(l))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let edit_json = |l: &str, key: &str, value: serde_json::Value| {
        let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
        v[key] = value;
        v.to_string()
    };
    let is = |l: &str, kind: &str| l.contains(&format!("\"kind\":\"{kind}\""));
    let cases: Vec<(&str, String)> = vec![
        ("missing header", map_lines(&|l| if is(l, "header") { vec![] } else { vec![l.into()] })),
        ("wrong format", map_lines(&|l| {
            vec![if is(l, "header") { edit_json(l, "format", "other".into()) } else { l.into() }]
        })),
        ("tampered weight", map_lines(&|l| {
            vec![if is(l, "similarity") { edit_json(l, "weight", 0.99.into()) } else { l.into() }]
        })),
        ("missing similarity edge", map_lines(&|l| {
            if is(l, "similarity") && l.contains("content:b") && l.contains("tag:t1") { vec![] } else { vec![l.into()] }
        })),
        ("duplicate vertex", map_lines(&|l| {
            if is(l, "content") { vec![l.into(), l.into()] } else { vec![l.into()] }
        })),
        ("wrong dimension", map_lines(&|l| {
            vec![if is(l, "tag") && l.contains("\"t1\"") { edit_json(l, "embedding", serde_json::json!([1.0, 0.0, 0.0])) } else { l.into() }]
        })),
        ("edge to unknown vertex", format!("{text}{{\"kind\":\"deterministic\",\"a\":\"content:a\",\"b\":\"tag:zz\"}}\n")),
        ("tag-tag edge", format!("{text}{{\"kind\":\"similarity\",\"a\":\"tag:t1\",\"b\":\"tag:t2\",\"weight\":0.0}}\n")),
        ("truncated record", format!("{}{{\"kind\":\"determ", text)),
    ];
    for (name, bad) in &cases {
        match TagGraph::read_snapshot(bad.as_bytes()) {
            Err(Error::CorruptSnapshot { line, message }) if !message.is_empty() => {
                ensure(line > 0 || !message.is_empty(), || {
                    format!("{name}: no diagnostic")
                })?;
            }
            Err(other) => return Err(format!("{name}: unexpected error kind: {other}")),
            Ok(_) => return Err(format!("{name}: accepted")),
        }
    }
    Ok(format!(
        "up to {largest} vertices byte-identical, {} corruptions rejected",
        cases.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            "graph recall matches brute-force oracles",
            graph_recall_oracle,
        ),
        ("graph recall beats match-based recall", recall_direction),
        ("confidence formula", confidence_formula),
        ("metrics match literal formulas", metric_oracles),
        (
            "calibration threshold sweep is monotone",
            calibration_monotonicity,
        ),
        ("end-to-end determinism", end_to_end_determinism),
        ("feedback loop", feedback_loop),
        (
            "snapshot round trip and corruption checks",
            snapshot_round_trip,
        ),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
