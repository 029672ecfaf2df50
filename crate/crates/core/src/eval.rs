//! Evaluation metrics: Acc@k and Coverage@k for multi-tag output,
//! precision/recall/F1 for single-tag output, #Right and HR#k for candidate
//! recall quality, and relative improvement over a baseline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ContentId, TagId};

/// Generated tags of one content with a right/wrong judgment per tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiTagResult {
    pub content: ContentId,
    pub tags: Vec<TagId>,
    pub judgments: Vec<bool>,
}

/// At most one predicted tag against a single gold tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleTagResult {
    pub content: ContentId,
    #[serde(default)]
    pub predicted: Option<TagId>,
    pub gold: TagId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JudgedResult {
    Multi(MultiTagResult),
    Single(SingleTagResult),
}

impl JudgedResult {
    pub fn multi(content: ContentId, tags: Vec<TagId>, judgments: Vec<bool>) -> Result<Self> {
        if tags.len() != judgments.len() {
            return Err(Error::invalid(format!(
                "`{content}` has {} tags but {} judgments",
                tags.len(),
                judgments.len()
            )));
        }
        Ok(JudgedResult::Multi(MultiTagResult {
            content,
            tags,
            judgments,
        }))
    }

    pub fn content(&self) -> &ContentId {
        match self {
            JudgedResult::Multi(m) => &m.content,
            JudgedResult::Single(s) => &s.content,
        }
    }
}

/// Candidate tags of one content against its known-correct tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallJudgment {
    pub content: ContentId,
    pub candidates: Vec<TagId>,
    pub correct: Vec<TagId>,
}

impl RecallJudgment {
    pub fn hits(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.candidates
            .iter()
            .filter(|t| seen.insert(*t) && self.correct.contains(t))
            .count()
    }
}

fn multi_only(results: &[JudgedResult]) -> Result<Vec<&MultiTagResult>> {
    if results.is_empty() {
        return Err(Error::invalid("no results to evaluate"));
    }
    results
        .iter()
        .map(|r| match r {
            JudgedResult::Multi(m) if m.tags.len() == m.judgments.len() => Ok(m),
            JudgedResult::Multi(m) => Err(Error::invalid(format!(
                "`{}` has {} tags but {} judgments",
                m.content,
                m.tags.len(),
                m.judgments.len()
            ))),
            JudgedResult::Single(s) => Err(Error::invalid(format!(
                "`{}` is a single-tag result in a multi-tag metric",
                s.content
            ))),
        })
        .collect()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccAtK {
    pub value: f64,
    /// Contents with no generated tags; each contributed 0.
    pub empty: Vec<ContentId>,
}

/// Mean over contents of the right fraction among the first
/// `min(k, |T|)` tags.
pub fn acc_at_k(results: &[JudgedResult], k: usize) -> Result<AccAtK> {
    check_k(k)?;
    let results = multi_only(results)?;
    let mut total = 0.0;
    let mut empty = Vec::new();
    for r in &results {
        let k_eff = k.min(r.tags.len());
        if k_eff == 0 {
            empty.push(r.content.clone());
            continue;
        }
        let right = r.judgments[..k_eff].iter().filter(|j| **j).count();
        total += right as f64 / k_eff as f64;
    }
    Ok(AccAtK {
        value: total / results.len() as f64,
        empty,
    })
}

/// Fraction of contents left with at least `k` tags.
pub fn coverage_at_k(results: &[JudgedResult], k: usize) -> Result<f64> {
    check_k(k)?;
    let results = multi_only(results)?;
    let covered = results.iter().filter(|r| r.tags.len() >= k).count();
    Ok(covered as f64 / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a metric to 0.
    pub degenerate: bool,
}

/// Single-tag precision (correct / predicted), recall (correct / total) and
/// their harmonic mean.
pub fn precision_recall_f1(results: &[JudgedResult]) -> Result<Prf> {
    let mut total = 0usize;
    let mut predicted = 0usize;
    let mut correct = 0usize;
    for r in results {
        let JudgedResult::Single(s) = r else {
            return Err(Error::invalid(format!(
                "`{}` is a multi-tag result in a single-tag metric",
                r.content()
            )));
        };
        total += 1;
        if let Some(p) = &s.predicted {
            predicted += 1;
            if *p == s.gold {
                correct += 1;
            }
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, total);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
        degenerate,
    })
}

pub const DEFAULT_HIT_KS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct RecallQuality {
    /// Mean number of correct tags among candidates.
    pub num_right: f64,
    /// k → fraction of contents with at least k correct candidates.
    pub hit_rate: BTreeMap<usize, f64>,
}

pub fn recall_quality(judgments: &[RecallJudgment], ks: &[usize]) -> Result<RecallQuality> {
    if judgments.is_empty() {
        return Err(Error::invalid("no recall judgments"));
    }
    for k in ks {
        check_k(*k)?;
    }
    let hits: Vec<usize> = judgments.iter().map(RecallJudgment::hits).collect();
    let n = judgments.len() as f64;
    let num_right = hits.iter().sum::<usize>() as f64 / n;
    let hit_rate = ks
        .iter()
        .map(|&k| (k, hits.iter().filter(|h| **h >= k).count() as f64 / n))
        .collect();
    Ok(RecallQuality {
        num_right,
        hit_rate,
    })
}

/// Mean of `(ours - baseline) / baseline` over paired metrics.
pub fn relative_improvement(ours: &[f64], baseline: &[f64]) -> Result<f64> {
    if ours.is_empty() || ours.len() != baseline.len() {
        return Err(Error::invalid(format!(
            "need equally many metric values, got {} and {}",
            ours.len(),
            baseline.len()
        )));
    }
    if let Some(b) = baseline.iter().find(|b| !b.is_finite() || **b <= 0.0) {
        return Err(Error::invalid(format!(
            "baseline value {b} is not positive"
        )));
    }
    if let Some(o) = ours.iter().find(|o| !o.is_finite()) {
        return Err(Error::invalid(format!("metric value {o} is not finite")));
    }
    let sum: f64 = ours.iter().zip(baseline).map(|(o, b)| (o - b) / b).sum();
    Ok(sum / ours.len() as f64)
}

/// A metric requested by name: `acc@K`, `coverage@K`, `precision`,
/// `recall`, `f1`, `prf`, `right`, `hr@K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricSpec {
    Acc(usize),
    Coverage(usize),
    Precision,
    Recall,
    F1,
    Right,
    HitRate(usize),
}

impl MetricSpec {
    pub fn parse_list(list: &str) -> Result<Vec<MetricSpec>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item.eq_ignore_ascii_case("prf") {
                out.extend([MetricSpec::Precision, MetricSpec::Recall, MetricSpec::F1]);
            } else {
                out.push(item.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::invalid("empty metric list"));
        }
        Ok(out)
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let with_k = |prefix: &str| -> Option<Result<usize>> {
            lower.strip_prefix(prefix).map(|k| {
                k.parse::<usize>()
                    .ok()
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| Error::invalid(format!("bad k in metric `{s}`")))
            })
        };
        if let Some(k) = with_k("acc@") {
            return Ok(MetricSpec::Acc(k?));
        }
        if let Some(k) = with_k("coverage@") {
            return Ok(MetricSpec::Coverage(k?));
        }
        if let Some(k) = with_k("hr@").or_else(|| with_k("hr#")) {
            return Ok(MetricSpec::HitRate(k?));
        }
        match lower.as_str() {
            "precision" => Ok(MetricSpec::Precision),
            "recall" => Ok(MetricSpec::Recall),
            "f1" => Ok(MetricSpec::F1),
            "right" | "#right" => Ok(MetricSpec::Right),
            _ => Err(Error::invalid(format!("unknown metric `{s}`"))),
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Acc(k) => write!(f, "Acc@{k}"),
            MetricSpec::Coverage(k) => write!(f, "Coverage@{k}"),
            MetricSpec::Precision => f.write_str("Precision"),
            MetricSpec::Recall => f.write_str("Recall"),
            MetricSpec::F1 => f.write_str("F1"),
            MetricSpec::Right => f.write_str("#Right"),
            MetricSpec::HitRate(k) => write!(f, "HR#{k}"),
        }
    }
}

/// One line of an evaluation input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvalRecord {
    Judged(JudgedResult),
    Recall(RecallJudgment),
}

/// Pairs a reported metric with a baseline value for relative improvement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiPair {
    pub metric: String,
    pub baseline: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub flags: BTreeMap<String, Vec<String>>,
}

/// Computes the requested metrics over mixed evaluation records.
pub fn evaluate(records: &[EvalRecord], metrics: &[MetricSpec]) -> Result<EvalReport> {
    let judged: Vec<JudgedResult> = records
        .iter()
        .filter_map(|r| match r {
            EvalRecord::Judged(j) => Some(j.clone()),
            EvalRecord::Recall(_) => None,
        })
        .collect();
    let recall: Vec<RecallJudgment> = records
        .iter()
        .filter_map(|r| match r {
            EvalRecord::Recall(j) => Some(j.clone()),
            EvalRecord::Judged(_) => None,
        })
        .collect();
    let multi: Vec<JudgedResult> = judged
        .iter()
        .filter(|j| matches!(j, JudgedResult::Multi(_)))
        .cloned()
        .collect();
    let single: Vec<JudgedResult> = judged
        .iter()
        .filter(|j| matches!(j, JudgedResult::Single(_)))
        .cloned()
        .collect();

    let mut report = EvalReport::default();
    let mut prf: Option<Prf> = None;
    let hit_ks: Vec<usize> = metrics
        .iter()
        .filter_map(|m| match m {
            MetricSpec::HitRate(k) => Some(*k),
            _ => None,
        })
        .collect();
    let quality = if metrics
        .iter()
        .any(|m| matches!(m, MetricSpec::Right | MetricSpec::HitRate(_)))
    {
        Some(recall_quality(&recall, &hit_ks)?)
    } else {
        None
    };

    for m in metrics {
        let value = match *m {
            MetricSpec::Acc(k) => {
                let acc = acc_at_k(&multi, k)?;
                if !acc.empty.is_empty() {
                    report.flags.insert(
                        "empty_results".into(),
                        acc.empty.iter().map(ToString::to_string).collect(),
                    );
                }
                acc.value
            }
            MetricSpec::Coverage(k) => coverage_at_k(&multi, k)?,
            MetricSpec::Precision | MetricSpec::Recall | MetricSpec::F1 => {
                if single.is_empty() {
                    return Err(Error::invalid("no single-tag results to evaluate"));
                }
                let p = match prf {
                    Some(p) => p,
                    None => *prf.insert(precision_recall_f1(&single)?),
                };
                if p.degenerate {
                    report.flags.insert(
                        "zero_denominator".into(),
                        vec!["precision/recall/f1".into()],
                    );
                }
                match m {
                    MetricSpec::Precision => p.precision,
                    MetricSpec::Recall => p.recall,
                    _ => p.f1,
                }
            }
            MetricSpec::Right => quality.as_ref().expect("computed above").num_right,
            MetricSpec::HitRate(k) => quality.as_ref().expect("computed above").hit_rate[&k],
        };
        report.metrics.insert(m.to_string(), value);
    }
    Ok(report)
}

/// Adds `RI` to the report from explicitly paired baseline values.
pub fn add_relative_improvement(report: &mut EvalReport, pairs: &[RiPair]) -> Result<f64> {
    let mut ours = Vec::with_capacity(pairs.len());
    let mut base = Vec::with_capacity(pairs.len());
    for p in pairs {
        let value = report.metrics.get(&p.metric).ok_or_else(|| {
            Error::invalid(format!(
                "baseline pairs metric `{}` which is not in the report",
                p.metric
            ))
        })?;
        ours.push(*value);
        base.push(p.baseline);
    }
    let ri = relative_improvement(&ours, &base)?;
    report.metrics.insert("RI".into(), ri);
    Ok(ri)
}
