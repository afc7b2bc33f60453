//! ID-constrained generation: item-token trie, beam decoding restricted to
//! trie paths, and a popularity-smoothed first-order Markov baseline.
//!
//! Decoding can only terminate on a root-to-terminal path of the trie, so
//! every emitted ID decodes to a real item: hallucinated IDs are impossible
//! by construction, whichever model supplies the scores.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::indexing::ItemIndex;
use crate::ingest::SplitLog;
use crate::num::{real, Real};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenrecError {
    /// One item's token sequence is a (possibly equal) prefix of another's.
    #[error("token sequence of item {item:?} collides with a prefix of another item")]
    PrefixCollision { item: String },
    #[error("cannot build a trie over an empty index")]
    EmptyMap,
}

#[derive(Debug, Clone)]
struct TrieNode {
    children: Vec<(String, usize)>,
    terminal: Option<String>,
}

/// Prefix trie over item token sequences; one terminal per item.
#[derive(Debug, Clone)]
pub struct ItemTrie {
    nodes: Vec<TrieNode>,
    item_count: usize,
}

impl ItemTrie {
    pub const ROOT: usize = 0;

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn children(&self, node: usize) -> &[(String, usize)] {
        &self.nodes[node].children
    }

    pub fn terminal(&self, node: usize) -> Option<&str> {
        self.nodes[node].terminal.as_deref()
    }

    /// Follow a token edge from a node.
    pub fn step(&self, node: usize, token: &str) -> Option<usize> {
        self.nodes[node]
            .children
            .iter()
            .find(|(t, _)| t == token)
            .map(|&(_, id)| id)
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| n.terminal.as_deref())
    }
}

/// Build the trie for an index map.
///
/// Fails if any item's token sequence is a strict prefix of another's (or two
/// items share a sequence): such maps cannot be decoded unambiguously.
pub fn build_trie(index: &ItemIndex) -> Result<ItemTrie, GenrecError> {
    if index.is_empty() {
        return Err(GenrecError::EmptyMap);
    }
    let mut nodes = vec![TrieNode {
        children: Vec::new(),
        terminal: None,
    }];
    for (raw, seq) in index.iter() {
        let mut current = ItemTrie::ROOT;
        for token in seq.tokens() {
            if nodes[current].terminal.is_some() {
                // An existing item ends strictly above this one.
                return Err(GenrecError::PrefixCollision {
                    item: raw.to_string(),
                });
            }
            current = match nodes[current].children.iter().find(|(t, _)| t == token) {
                Some(&(_, id)) => id,
                None => {
                    let id = nodes.len();
                    nodes.push(TrieNode {
                        children: Vec::new(),
                        terminal: None,
                    });
                    let token = token.clone();
                    // Re-borrow after the push.
                    nodes[current].children.push((token, id));
                    id
                }
            };
        }
        if nodes[current].terminal.is_some() || !nodes[current].children.is_empty() {
            return Err(GenrecError::PrefixCollision {
                item: raw.to_string(),
            });
        }
        nodes[current].terminal = Some(raw.to_string());
    }
    Ok(ItemTrie {
        nodes,
        item_count: index.len(),
    })
}

/// Popularity counts plus first-order transition counts over train histories.
#[derive(Debug, Clone)]
pub struct BaselineModel<F> {
    popularity: HashMap<String, u64>,
    total_popularity: u64,
    transitions: HashMap<String, HashMap<String, u64>>,
    pub alpha: F,
}

impl<F: Real> BaselineModel<F> {
    pub fn popularity_of(&self, item: &str) -> u64 {
        self.popularity.get(item).copied().unwrap_or(0)
    }

    pub fn transition_count(&self, last: &str, next: &str) -> u64 {
        self.transitions
            .get(last)
            .and_then(|row| row.get(next))
            .copied()
            .unwrap_or(0)
    }

    /// Score a candidate given the previous item: transition count plus
    /// `alpha` times normalized popularity. An unseen previous item falls
    /// back to pure popularity.
    pub fn score(&self, last: Option<&str>, candidate: &str) -> F {
        let pop_norm = if self.total_popularity == 0 {
            F::zero()
        } else {
            real::<F>(self.popularity_of(candidate) as f64)
                / real::<F>(self.total_popularity as f64)
        };
        match last.and_then(|l| self.transitions.get(l)) {
            Some(row) => {
                let trans = real::<F>(row.get(candidate).copied().unwrap_or(0) as f64);
                trans + self.alpha * pop_norm
            }
            None => pop_norm,
        }
    }
}

/// Count item occurrences and adjacent-pair transitions in train histories.
///
/// The index is the decode-side contract; fitting only requires that it
/// covers the training items, which is checked in debug builds.
pub fn fit_baseline<F: Real>(split: &SplitLog, index: &ItemIndex, alpha: F) -> BaselineModel<F> {
    let mut popularity: HashMap<String, u64> = HashMap::new();
    let mut transitions: HashMap<String, HashMap<String, u64>> = HashMap::new();
    let mut total = 0u64;
    for user in &split.users {
        for item in &user.train_history {
            debug_assert!(index.contains(item), "index misses train item {item:?}");
            *popularity.entry(item.clone()).or_insert(0) += 1;
            total += 1;
        }
        for pair in user.train_history.windows(2) {
            *transitions
                .entry(pair[0].clone())
                .or_default()
                .entry(pair[1].clone())
                .or_insert(0) += 1;
        }
    }
    BaselineModel {
        popularity,
        total_popularity: total,
        transitions,
        alpha,
    }
}

/// Ranked predictions for one query: distinct items, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub query_id: String,
    pub items: Vec<String>,
}

/// Ascending item order used for tie-breaking: numeric when both IDs are
/// plain decimal numbers, lexicographic otherwise.
pub fn item_id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Decode the top-`k` items for a query by walking the trie beam-style.
///
/// Candidates are scored by the model conditioned on the query's last item;
/// items already in the query history are excluded. Each beam level keeps the
/// `beam_width` best subtrees ranked by their best reachable item score, so
/// with `beam_width >= k` (required) the result equals an exhaustive argsort
/// of the model scores. Ties break toward ascending item ID.
pub fn beam_decode<F: Real>(
    model: &BaselineModel<F>,
    trie: &ItemTrie,
    query_id: &str,
    query_history: &[String],
    k: usize,
    beam_width: usize,
) -> RankedList {
    assert!(k >= 1, "k must be >= 1");
    assert!(beam_width >= k, "beam_width must be >= k");
    let last = query_history.last().map(String::as_str);
    let excluded: HashSet<&str> = query_history.iter().map(String::as_str).collect();

    // Best reachable item score per subtree, bottom-up. Node IDs are created
    // parent-before-child, so a reverse scan visits children first.
    let mut subtree_best: Vec<Option<F>> = vec![None; trie.node_count()];
    for node in (0..trie.node_count()).rev() {
        let own = trie.terminal(node).and_then(|item| {
            if excluded.contains(item) {
                None
            } else {
                Some(model.score(last, item))
            }
        });
        let best_child = trie
            .children(node)
            .iter()
            .filter_map(|&(_, child)| subtree_best[child])
            .fold(None, |acc: Option<F>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            });
        subtree_best[node] = match (own, best_child) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    let mut frontier = vec![ItemTrie::ROOT];
    let mut pool: Vec<(F, &str)> = Vec::new();
    while !frontier.is_empty() {
        let mut next: Vec<usize> = Vec::new();
        for &node in &frontier {
            for &(_, child) in trie.children(node) {
                if subtree_best[child].is_none() {
                    continue; // subtree holds only excluded items
                }
                if let Some(item) = trie.terminal(child) {
                    pool.push((model.score(last, item), item));
                } else {
                    next.push(child);
                }
            }
        }
        next.sort_by(|&a, &b| {
            subtree_best[b]
                .partial_cmp(&subtree_best[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        next.truncate(beam_width);
        frontier = next;
    }

    pool.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| item_id_cmp(a.1, b.1))
    });
    pool.truncate(k);
    RankedList {
        query_id: query_id.to_string(),
        items: pool.into_iter().map(|(_, item)| item.to_string()).collect(),
    }
}

/// Serialize ranked lists: `query_id<TAB>item1 item2 ... itemK` per line.
///
/// Queries that decoded to nothing (every candidate excluded) are omitted;
/// evaluation counts absent queries as misses in its coverage counter.
pub fn write_predictions(lists: &[RankedList]) -> String {
    let mut out = String::from("# predictions\n");
    for list in lists {
        if list.items.is_empty() {
            continue;
        }
        out.push_str(&list.query_id);
        out.push('\t');
        out.push_str(&list.items.join(" "));
        out.push('\n');
    }
    out
}
