//! HR@k / NDCG@k over ranked prediction files.
//!
//! Leave-one-out evaluation has a single relevant item per query, so the
//! ideal DCG is 1 and NDCG reduces to the discounted gain of the hit rank.
//! Queries with a truth entry but no prediction count as misses and are
//! reported in a coverage counter rather than silently dropped.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap as OrderedMap;
use thiserror::Error;

use crate::genrec::RankedList;
use crate::num::{real, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("line {line}: duplicate query {query:?}")]
    DuplicateQuery { query: String, line: usize },
    #[error("line {line}: item {item:?} listed twice for query {query:?}")]
    DuplicateItemInList {
        query: String,
        item: String,
        line: usize,
    },
    #[error("line {line}: expected `query_id<TAB>ranked items` / `query_id<TAB>item`")]
    MalformedLine { line: usize },
    #[error("no queries to evaluate")]
    NoQueries,
}

/// Ranked predictions keyed by query ID.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    lists: OrderedMap<String, RankedList>,
}

impl PredictionSet {
    pub fn get(&self, query_id: &str) -> Option<&RankedList> {
        self.lists.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RankedList> {
        self.lists.values()
    }
}

/// Parse prediction lines: `query_id<TAB>item1 item2 ... itemK`.
pub fn parse_predictions(text: &str) -> Result<PredictionSet, EvalError> {
    let mut lists: OrderedMap<String, RankedList> = OrderedMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (query, items_text) = line
            .split_once('\t')
            .ok_or(EvalError::MalformedLine { line: line_no })?;
        if query.is_empty() {
            return Err(EvalError::MalformedLine { line: line_no });
        }
        let items: Vec<String> = items_text
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if items.is_empty() {
            return Err(EvalError::MalformedLine { line: line_no });
        }
        let mut seen = std::collections::HashSet::new();
        for item in &items {
            if !seen.insert(item.clone()) {
                return Err(EvalError::DuplicateItemInList {
                    query: query.to_string(),
                    item: item.clone(),
                    line: line_no,
                });
            }
        }
        if lists.contains_key(query) {
            return Err(EvalError::DuplicateQuery {
                query: query.to_string(),
                line: line_no,
            });
        }
        lists.insert(
            query.to_string(),
            RankedList {
                query_id: query.to_string(),
                items,
            },
        );
    }
    Ok(PredictionSet { lists })
}

/// Parse truth lines: `query_id<TAB>item_id`.
pub fn parse_truths(text: &str) -> Result<Vec<(String, String)>, EvalError> {
    let mut truths = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (query, item) = line
            .split_once('\t')
            .ok_or(EvalError::MalformedLine { line: line_no })?;
        if query.is_empty() || item.is_empty() || item.contains('\t') {
            return Err(EvalError::MalformedLine { line: line_no });
        }
        if !seen.insert(query.to_string()) {
            return Err(EvalError::DuplicateQuery {
                query: query.to_string(),
                line: line_no,
            });
        }
        truths.push((query.to_string(), item.to_string()));
    }
    Ok(truths)
}

/// Hit indicator and discounted gain of `truth` within the top `k` entries.
///
/// The gain is `1 / log2(rank + 1)` with 1-based rank, zero on a miss.
pub fn hit_and_gain<F: Real>(ranked: &RankedList, truth: &str, k: usize) -> (bool, F) {
    assert!(k >= 1, "k must be >= 1");
    match ranked.items.iter().take(k).position(|item| item == truth) {
        Some(pos) => {
            let rank = pos + 1;
            (true, F::one() / real::<F>((rank as f64) + 1.0).log2())
        }
        None => (false, F::zero()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPoint<F> {
    pub hr: F,
    pub ndcg: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics<F> {
    pub per_k: BTreeMap<usize, MetricPoint<F>>,
    pub n_queries: usize,
    /// Truth queries that had no prediction line (counted as misses).
    pub missing_predictions: usize,
}

/// Aggregated metrics per group label.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics<F> {
    pub groups: BTreeMap<String, GroupMetrics<F>>,
}

impl<F: Real> Metrics<F> {
    pub fn group(&self, label: &str) -> Option<&GroupMetrics<F>> {
        self.groups.get(label)
    }
}

/// Evaluate predictions against truths for each cutoff, as one group "all".
pub fn evaluate<F: Real>(
    preds: &PredictionSet,
    truths: &[(String, String)],
    ks: &[usize],
) -> Result<Metrics<F>, EvalError> {
    evaluate_grouped(preds, truths, ks, None)
}

/// Evaluate with optional per-query group labels (e.g. task/exposure pairs);
/// unlabeled queries fall into group "all".
///
/// Queries are accumulated in sorted-query order within each group, so the
/// result is invariant to input ordering, bit for bit.
pub fn evaluate_grouped<F: Real>(
    preds: &PredictionSet,
    truths: &[(String, String)],
    ks: &[usize],
    groups: Option<&HashMap<String, String>>,
) -> Result<Metrics<F>, EvalError> {
    if truths.is_empty() {
        return Err(EvalError::NoQueries);
    }
    assert!(!ks.is_empty(), "need at least one cutoff");

    let mut by_group: BTreeMap<String, Vec<&(String, String)>> = BTreeMap::new();
    for entry in truths {
        let label = groups
            .and_then(|g| g.get(&entry.0).cloned())
            .unwrap_or_else(|| "all".to_string());
        by_group.entry(label).or_default().push(entry);
    }

    let mut out = BTreeMap::new();
    for (label, mut entries) in by_group {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let n = entries.len();
        let mut missing = 0usize;
        let mut hits = vec![0u64; ks.len()];
        let mut gains = vec![F::zero(); ks.len()];
        for (query, truth) in entries {
            match preds.get(query) {
                Some(ranked) => {
                    for (slot, &k) in ks.iter().enumerate() {
                        let (hit, gain) = hit_and_gain::<F>(ranked, truth, k);
                        if hit {
                            hits[slot] += 1;
                        }
                        gains[slot] += gain;
                    }
                }
                None => missing += 1,
            }
        }
        let denom = real::<F>(n as f64);
        let per_k = ks
            .iter()
            .enumerate()
            .map(|(slot, &k)| {
                (
                    k,
                    MetricPoint {
                        hr: real::<F>(hits[slot] as f64) / denom,
                        ndcg: gains[slot] / denom,
                    },
                )
            })
            .collect();
        out.insert(
            label,
            GroupMetrics {
                per_k,
                n_queries: n,
                missing_predictions: missing,
            },
        );
    }
    Ok(Metrics { groups: out })
}

/// Aligned text table plus machine-readable key-value lines.
pub fn render_report<F: Real>(metrics: &Metrics<F>, ks: &[usize]) -> String {
    let mut header = format!("{:<24}", "group");
    for &k in ks {
        header.push_str(&format!("{:>10}{:>10}", format!("HR@{k}"), format!("NDCG@{k}")));
    }
    header.push_str(&format!("{:>10}{:>9}\n", "queries", "missing"));
    let mut out = header;
    for (label, group) in &metrics.groups {
        out.push_str(&format!("{label:<24}"));
        for &k in ks {
            let point = &group.per_k[&k];
            out.push_str(&format!(
                "{:>10.4}{:>10.4}",
                point.hr.to_f64().unwrap_or(f64::NAN),
                point.ndcg.to_f64().unwrap_or(f64::NAN)
            ));
        }
        out.push_str(&format!(
            "{:>10}{:>9}\n",
            group.n_queries, group.missing_predictions
        ));
    }
    for (label, group) in &metrics.groups {
        for &k in ks {
            let point = &group.per_k[&k];
            out.push_str(&format!(
                "metric group={label} k={k} hr={:.6} ndcg={:.6} n={} missing={}\n",
                point.hr.to_f64().unwrap_or(f64::NAN),
                point.ndcg.to_f64().unwrap_or(f64::NAN),
                group.n_queries,
                group.missing_predictions
            ));
        }
    }
    out
}
