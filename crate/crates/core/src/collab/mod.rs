//! Collaborative indexing: hierarchical item IDs from spectral clustering of
//! the item co-occurrence graph.
//!
//! The whole item set starts in a queue. Sets smaller than the leaf threshold
//! get per-item `⟨I*⟩` tokens; larger sets are spectrally clustered, every
//! member's prefix is extended with a fresh `⟨CI*⟩` cluster token, and the
//! resulting parts are enqueued. Co-occurrence is recounted from the training
//! sequences for each subset rather than sliced from the parent matrix, so
//! within-subset structure drives every split. Frequently co-consumed items
//! therefore share long token prefixes.
//!
//! Everything here is single-threaded and seeded; identical inputs produce
//! identical maps.

mod eigen;
mod kmeans;

pub use eigen::{symmetric_eigen, SymmetricEigen, EIGEN_TOL};
pub use kmeans::kmeans;

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::IndexMap as OrderedMap;
use thiserror::Error;

use crate::indexing::{IndexMethod, ItemIndex, TokenSeq};
use crate::ingest::SplitLog;
use crate::num::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CollabError {
    #[error("graph has {nodes} nodes, fewer than the {clusters} requested clusters")]
    TooFewNodes { nodes: usize, clusters: usize },
    /// A split failed to make progress (or the eigensolver did not converge).
    #[error("clustering failed to split an item set")]
    NonConvergence,
}

/// Symmetric item–item co-occurrence counts over training histories.
///
/// Nodes are raw item IDs in first-appearance order. The weight of an edge is
/// the number of users whose train history contains both endpoints (counted
/// once per user regardless of repeats); the diagonal is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    nodes: Vec<String>,
    weights: Vec<u32>,
}

impl CooccurrenceGraph {
    /// Build a graph from an explicit dense weight matrix (row-major).
    /// Panics unless the matrix is symmetric with a zero diagonal.
    pub fn from_weights(nodes: Vec<String>, weights: Vec<u32>) -> Self {
        let n = nodes.len();
        assert_eq!(weights.len(), n * n, "weights must be n x n");
        for i in 0..n {
            assert_eq!(weights[i * n + i], 0, "diagonal must be zero");
            for j in 0..i {
                assert_eq!(weights[i * n + j], weights[j * n + i], "weights must be symmetric");
            }
        }
        CooccurrenceGraph { nodes, weights }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.weights[i * self.nodes.len() + j]
    }

    pub fn degree(&self, i: usize) -> u64 {
        let n = self.nodes.len();
        self.weights[i * n..(i + 1) * n]
            .iter()
            .map(|&w| w as u64)
            .sum()
    }
}

/// Parameters of the recursive clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollabConfig {
    /// Clusters per split (N ≥ 2), held constant across recursion levels.
    pub clusters: usize,
    /// Size threshold of the largest allowed leaf cluster (k ≥ 2): any set
    /// smaller than this stops splitting.
    pub max_leaf: usize,
    pub seed: u64,
}

impl CollabConfig {
    pub fn new(clusters: usize, max_leaf: usize, seed: u64) -> Self {
        assert!(clusters >= 2, "clusters must be >= 2");
        assert!(max_leaf >= 2, "max_leaf must be >= 2");
        CollabConfig {
            clusters,
            max_leaf,
            seed,
        }
    }
}

/// One node of the [`ClusterTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    /// Cluster token labeling this node; `None` for the root.
    pub token: Option<String>,
    /// Items of this node, as indices into [`ClusterTree::items`], ascending.
    pub item_indices: Vec<usize>,
    /// Child node IDs, in cluster-token order.
    pub children: Vec<usize>,
    /// For leaves: per-item `⟨I*⟩` tokens parallel to `item_indices`.
    pub leaf_tokens: Option<Vec<String>>,
}

/// The hierarchy produced by one collaborative-indexing run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTree {
    /// Raw item IDs in first-appearance order; tree nodes index into this.
    pub items: Vec<String>,
    nodes: Vec<TreeNode>,
}

impl ClusterTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.children.is_empty())
    }

    /// ID of the node containing `item` at the given depth (root = depth 0),
    /// or `None` if the item's leaf is shallower.
    pub fn node_of_item_at_depth(&self, item: usize, depth: usize) -> Option<usize> {
        let mut current = 0usize;
        for _ in 0..depth {
            let next = self.nodes[current]
                .children
                .iter()
                .copied()
                .find(|&c| self.nodes[c].item_indices.binary_search(&item).is_ok())?;
            current = next;
        }
        Some(current)
    }

    /// Indented text rendering for inspection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, id: usize, depth: usize, out: &mut String) {
        let node = &self.nodes[id];
        let indent = "  ".repeat(depth);
        match &node.token {
            None => out.push_str(&format!("{indent}root: {} items\n", node.item_indices.len())),
            Some(token) => out.push_str(&format!(
                "{indent}{token}: {} items\n",
                node.item_indices.len()
            )),
        }
        if let Some(leaf_tokens) = &node.leaf_tokens {
            let inner = "  ".repeat(depth + 1);
            for (idx, token) in node.item_indices.iter().zip(leaf_tokens) {
                out.push_str(&format!("{inner}{token} {}\n", self.items[*idx]));
            }
        }
        for &child in &node.children {
            self.dump_node(child, depth + 1, out);
        }
    }
}

/// Build the co-occurrence graph over all items of the split. Items that
/// never co-occur in a train history (including items appearing only as
/// validation or test targets) are isolated nodes.
pub fn build_cooccurrence(split: &SplitLog) -> CooccurrenceGraph {
    let nodes = split.items_in_first_appearance_order();
    let position: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let train_sets = train_item_sets(split, &position);
    let member_of: Vec<Option<usize>> = (0..nodes.len()).map(Some).collect();
    let weights = cooccurrence_counts(&train_sets, &member_of, nodes.len());
    CooccurrenceGraph { nodes, weights }
}

/// Partition the graph into at most `n_clusters` non-empty parts using the
/// symmetric-normalized Laplacian embedding and seeded k-means.
///
/// Zero-degree nodes are split off into their own part before the embedding
/// (the normalized Laplacian is undefined for isolated nodes). Parts are
/// renumbered by their earliest node, so output order is independent of
/// k-means label numbering.
pub fn spectral_cluster<F: Real>(
    graph: &CooccurrenceGraph,
    n_clusters: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CollabError> {
    assert!(n_clusters >= 1, "n_clusters must be >= 1");
    if graph.node_count() < n_clusters {
        return Err(CollabError::TooFewNodes {
            nodes: graph.node_count(),
            clusters: n_clusters,
        });
    }
    partition_nodes::<F>(&graph.weights, graph.node_count(), n_clusters, seed)
}

/// Run the full recursive collaborative indexing over a split.
///
/// Returns the item index (one `⟨CI*⟩…⟨I*⟩` token path per item) together
/// with the cluster tree that produced it.
pub fn collaborative_index<F: Real>(
    split: &SplitLog,
    cfg: &CollabConfig,
) -> Result<(ItemIndex, ClusterTree), CollabError> {
    assert!(cfg.clusters >= 2, "clusters must be >= 2");
    assert!(cfg.max_leaf >= 2, "max_leaf must be >= 2");

    let items = split.items_in_first_appearance_order();
    let n = items.len();
    let position: HashMap<&str, usize> = items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let train_sets = train_item_sets(split, &position);

    let mut prefixes: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut sequences: Vec<Option<TokenSeq>> = vec![None; n];
    let mut nodes = vec![TreeNode {
        token: None,
        item_indices: (0..n).collect(),
        children: Vec::new(),
        leaf_tokens: None,
    }];
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut cluster_counter = 0usize;
    let mut split_counter = 0u64;

    while let Some(node_id) = queue.pop_front() {
        let set = nodes[node_id].item_indices.clone();
        if set.len() < cfg.max_leaf {
            let leaf_tokens: Vec<String> = (1..=set.len()).map(|j| format!("⟨I{j}⟩")).collect();
            for (&item, token) in set.iter().zip(&leaf_tokens) {
                let mut tokens = prefixes[item].clone();
                tokens.push(token.clone());
                sequences[item] = Some(TokenSeq::new(tokens));
            }
            nodes[node_id].leaf_tokens = Some(leaf_tokens);
            continue;
        }

        let mut member_of = vec![None; n];
        for (local, &global) in set.iter().enumerate() {
            member_of[global] = Some(local);
        }
        let counts = cooccurrence_counts(&train_sets, &member_of, set.len());
        let target = cfg.clusters.min(set.len());
        let child_seed = derive_seed(cfg.seed, split_counter);
        split_counter += 1;
        let mut parts = partition_nodes::<F>(&counts, set.len(), target, child_seed)?;
        if parts.len() == 1 {
            // Edgeless subgraph: no informative embedding exists, so fall
            // back to a balanced split in node order.
            let half = set.len() / 2;
            parts = vec![(0..half).collect(), (half..set.len()).collect()];
        }
        for part in parts {
            if part.len() >= set.len() {
                return Err(CollabError::NonConvergence);
            }
            cluster_counter += 1;
            let token = format!("⟨CI{cluster_counter}⟩");
            let global_part: Vec<usize> = part.iter().map(|&local| set[local]).collect();
            for &g in &global_part {
                prefixes[g].push(token.clone());
            }
            let child_id = nodes.len();
            nodes.push(TreeNode {
                token: Some(token),
                item_indices: global_part,
                children: Vec::new(),
                leaf_tokens: None,
            });
            nodes[node_id].children.push(child_id);
            queue.push_back(child_id);
        }
    }

    let mut entries: OrderedMap<String, TokenSeq> = OrderedMap::new();
    for (item, seq) in items.iter().zip(sequences) {
        entries.insert(item.clone(), seq.expect("every item reaches a leaf"));
    }
    let index = ItemIndex::from_entries(entries, IndexMethod::Collaborative, None);
    let tree = ClusterTree { items, nodes };
    Ok((index, tree))
}

/// Per-user distinct train items as ascending global indices.
fn train_item_sets(split: &SplitLog, position: &HashMap<&str, usize>) -> Vec<Vec<usize>> {
    split
        .users
        .iter()
        .map(|user| {
            let distinct: HashSet<usize> = user
                .train_history
                .iter()
                .map(|item| position[item.as_str()])
                .collect();
            let mut ids: Vec<usize> = distinct.into_iter().collect();
            ids.sort_unstable();
            ids
        })
        .collect()
}

/// Count unordered co-occurring pairs restricted to a subset.
///
/// `member_of[global]` gives the local index within the subset (or `None`);
/// the result is a dense symmetric `m x m` matrix with zero diagonal.
fn cooccurrence_counts(
    train_sets: &[Vec<usize>],
    member_of: &[Option<usize>],
    m: usize,
) -> Vec<u32> {
    let mut counts = vec![0u32; m * m];
    let mut local = Vec::new();
    for set in train_sets {
        local.clear();
        local.extend(set.iter().filter_map(|&g| member_of[g]));
        for i in 0..local.len() {
            for j in (i + 1)..local.len() {
                counts[local[i] * m + local[j]] += 1;
                counts[local[j] * m + local[i]] += 1;
            }
        }
    }
    counts
}

/// Cluster `n` nodes with dense symmetric weights into at most `n_clusters`
/// parts. Parts are ascending within themselves and ordered by first node.
fn partition_nodes<F: Real>(
    weights: &[u32],
    n: usize,
    n_clusters: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, CollabError> {
    debug_assert!(n_clusters >= 1 && n_clusters <= n);
    if n_clusters == 1 {
        return Ok(vec![(0..n).collect()]);
    }
    let degrees: Vec<u64> = (0..n)
        .map(|i| weights[i * n..(i + 1) * n].iter().map(|&w| w as u64).sum())
        .collect();
    let (zero, pos): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| degrees[i] == 0);
    if pos.is_empty() {
        return Ok(vec![zero]);
    }
    let budget = n_clusters - usize::from(!zero.is_empty());
    let budget = budget.clamp(1, pos.len());

    let mut parts: Vec<Vec<usize>> = if budget == 1 {
        vec![pos]
    } else {
        let m = pos.len();
        let inv_sqrt_deg: Vec<F> = pos
            .iter()
            .map(|&i| F::one() / F::from(degrees[i]).expect("degree fits scalar").sqrt())
            .collect();
        // L = I - D^{-1/2} W D^{-1/2}
        let mut lap = vec![F::zero(); m * m];
        for a in 0..m {
            lap[a * m + a] = F::one();
            for b in 0..m {
                if a != b {
                    let w = weights[pos[a] * n + pos[b]];
                    if w != 0 {
                        lap[a * m + b] =
                            -F::from(w).expect("weight fits scalar") * inv_sqrt_deg[a] * inv_sqrt_deg[b];
                    }
                }
            }
        }
        let eig = symmetric_eigen(&lap, m).ok_or(CollabError::NonConvergence)?;
        // Embed by the eigenvectors of smallest eigenvalue, then row-normalize.
        let mut embedding = vec![F::zero(); m * budget];
        for row in 0..m {
            for col in 0..budget {
                embedding[row * budget + col] = eig.vector_entry(row, col);
            }
        }
        for row in 0..m {
            let norm = embedding[row * budget..(row + 1) * budget]
                .iter()
                .map(|&v| v * v)
                .fold(F::zero(), |acc, v| acc + v)
                .sqrt();
            if norm > F::zero() {
                for v in &mut embedding[row * budget..(row + 1) * budget] {
                    *v /= norm;
                }
            }
        }
        let labels = kmeans(&embedding, m, budget, budget, seed);
        let mut grouped: Vec<Vec<usize>> = vec![Vec::new(); budget];
        for (local, &label) in labels.iter().enumerate() {
            grouped[label].push(pos[local]);
        }
        grouped.retain(|g| !g.is_empty());
        grouped
    };

    if !zero.is_empty() {
        parts.push(zero);
    }
    parts.sort_by_key(|part| part[0]);
    Ok(parts)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent child seed per split so recursion levels do not share streams.
fn derive_seed(seed: u64, split_counter: u64) -> u64 {
    splitmix64(seed ^ splitmix64(split_counter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_interactions, split_leave_one_out};

    fn split_from(text: &str) -> SplitLog {
        split_leave_one_out(&parse_interactions(text, "d").unwrap()).unwrap()
    }

    fn weight_of(graph: &CooccurrenceGraph, a: &str, b: &str) -> u32 {
        let pos = |x: &str| graph.nodes().iter().position(|n| n == x).unwrap();
        graph.weight(pos(a), pos(b))
    }

    #[test]
    fn cooccurrence_hand_count() {
        // u1 train [a,b,c], u2 train [b,d]; targets reuse existing items.
        let split = split_from("u1 a b c b a\nu2 b d d b\n");
        let graph = build_cooccurrence(&split);
        assert_eq!(graph.node_count(), 4);
        assert_eq!(weight_of(&graph, "a", "b"), 1);
        assert_eq!(weight_of(&graph, "a", "c"), 1);
        assert_eq!(weight_of(&graph, "b", "c"), 1);
        assert_eq!(weight_of(&graph, "b", "d"), 1);
        assert_eq!(weight_of(&graph, "a", "d"), 0);
        assert_eq!(weight_of(&graph, "c", "d"), 0);
        for i in 0..4 {
            assert_eq!(graph.weight(i, i), 0);
            for j in 0..4 {
                assert_eq!(graph.weight(i, j), graph.weight(j, i));
            }
        }
    }

    #[test]
    fn single_item_histories_give_zero_matrix() {
        let split = split_from("u1 a a a\n");
        let graph = build_cooccurrence(&split);
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.weight(0, 0), 0);
    }

    #[test]
    fn repeats_within_one_user_count_once() {
        // u1 train [a,a,b] -> the pair (a,b) counts once.
        let split = split_from("u1 a a b b a\n");
        let graph = build_cooccurrence(&split);
        assert_eq!(weight_of(&graph, "a", "b"), 1);
    }

    #[test]
    fn two_disconnected_triangles_split_into_components() {
        let split = split_from("u1 a b c b a\nu2 d e f e d\n");
        let graph = build_cooccurrence(&split);
        for seed in 0..10u64 {
            let parts = spectral_cluster::<f64>(&graph, 2, seed).unwrap();
            assert_eq!(parts.len(), 2);
            let name = |p: &Vec<usize>| {
                let mut v: Vec<&str> = p.iter().map(|&i| graph.nodes()[i].as_str()).collect();
                v.sort_unstable();
                v
            };
            assert_eq!(name(&parts[0]), vec!["a", "b", "c"]);
            assert_eq!(name(&parts[1]), vec!["d", "e", "f"]);
        }
    }

    #[test]
    fn single_cluster_keeps_all_nodes() {
        let split = split_from("u1 a b c b a\n");
        let graph = build_cooccurrence(&split);
        let parts = spectral_cluster::<f64>(&graph, 1, 0).unwrap();
        assert_eq!(parts, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn two_connected_nodes_split_into_singletons() {
        let split = split_from("u1 a b b a\n");
        let graph = build_cooccurrence(&split);
        let parts = spectral_cluster::<f64>(&graph, 2, 3).unwrap();
        assert_eq!(parts, vec![vec![0], vec![1]]);
    }

    #[test]
    fn too_few_nodes_is_an_error() {
        let split = split_from("u1 a a a\n");
        let graph = build_cooccurrence(&split);
        assert_eq!(
            spectral_cluster::<f64>(&graph, 2, 0).unwrap_err(),
            CollabError::TooFewNodes {
                nodes: 1,
                clusters: 2
            }
        );
    }

    #[test]
    fn isolated_nodes_form_their_own_part() {
        // {a,b} connected; x only ever appears as a target of u2 -> isolated.
        let split = split_from("u1 a b b a\nu2 a b x b\n");
        let graph = build_cooccurrence(&split);
        let parts = spectral_cluster::<f64>(&graph, 2, 0).unwrap();
        assert_eq!(parts.len(), 2);
        let isolated = parts
            .iter()
            .find(|p| p.iter().any(|&i| graph.nodes()[i] == "x"))
            .unwrap();
        assert_eq!(isolated.len(), 1);
    }

    #[test]
    fn two_pairs_get_hierarchical_tokens() {
        let split = split_from("u1 a b b a\nu2 c d d c\n");
        let cfg = CollabConfig::new(2, 3, 11);
        let (index, tree) = collaborative_index::<f64>(&split, &cfg).unwrap();
        assert_eq!(index.get("a").unwrap().joined(), "⟨CI1⟩⟨I1⟩");
        assert_eq!(index.get("b").unwrap().joined(), "⟨CI1⟩⟨I2⟩");
        assert_eq!(index.get("c").unwrap().joined(), "⟨CI2⟩⟨I1⟩");
        assert_eq!(index.get("d").unwrap().joined(), "⟨CI2⟩⟨I2⟩");
        assert_eq!(tree.root().children.len(), 2);
        assert!(tree.leaves().all(|l| l.item_indices.len() < cfg.max_leaf));
    }

    #[test]
    fn set_below_threshold_gets_leaf_tokens_only() {
        let split = split_from("u1 a b b a\n");
        let cfg = CollabConfig::new(2, 3, 0);
        let (index, tree) = collaborative_index::<f64>(&split, &cfg).unwrap();
        assert_eq!(index.get("a").unwrap().joined(), "⟨I1⟩");
        assert_eq!(index.get("b").unwrap().joined(), "⟨I2⟩");
        assert_eq!(tree.node_count(), 1);
    }

    #[test]
    fn collaborative_index_is_deterministic() {
        let split = split_from("u1 a b c d e f a b\nu2 c d g h i j c d\nu3 a g k l m n a g\n");
        let cfg = CollabConfig::new(2, 3, 9);
        let (i1, t1) = collaborative_index::<f64>(&split, &cfg).unwrap();
        let (i2, t2) = collaborative_index::<f64>(&split, &cfg).unwrap();
        assert_eq!(i1, i2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn leaves_are_bounded_and_paths_distinct() {
        let split = split_from(
            "u1 a b c d e f g h a b\nu2 c d i j k l c d\nu3 m n o p q r m n\nu4 a m e q b r a m\n",
        );
        let cfg = CollabConfig::new(3, 4, 5);
        let (index, tree) = collaborative_index::<f64>(&split, &cfg).unwrap();
        assert!(tree.leaves().all(|l| l.item_indices.len() < cfg.max_leaf));
        index.check_bijective().unwrap();
        // Children partition each parent.
        for id in 0..tree.node_count() {
            let node = tree.node(id);
            if node.children.is_empty() {
                continue;
            }
            let mut union: Vec<usize> = node
                .children
                .iter()
                .flat_map(|&c| tree.node(c).item_indices.clone())
                .collect();
            union.sort_unstable();
            assert_eq!(union, node.item_indices);
        }
    }

    #[test]
    fn dump_lists_every_item_once() {
        let split = split_from("u1 a b b a\nu2 c d d c\n");
        let cfg = CollabConfig::new(2, 3, 0);
        let (_, tree) = collaborative_index::<f64>(&split, &cfg).unwrap();
        let dump = tree.dump();
        for item in ["a", "b", "c", "d"] {
            assert_eq!(
                dump.lines().filter(|l| l.ends_with(&format!(" {item}"))).count(),
                1,
                "item {item} in dump:\n{dump}"
            );
        }
    }
}
