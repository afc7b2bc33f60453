//! Data pipeline for LLM-based generative recommendation.
//!
//! The crate turns raw user-item interaction logs into everything an external
//! sequence-to-sequence trainer needs, and scores what comes back:
//!
//! 1. [`ingest`] — parse the line-per-user interaction format, split each
//!    history leave-one-out (last item → test, second-to-last → validation),
//!    and summarize the data.
//! 2. [`indexing`] — assign language-compatible item IDs: digit-pair
//!    tokenization of numeric IDs, random indexing, sequential indexing, plus
//!    the on-disk index-map format.
//! 3. [`collab`] — collaborative indexing: build the item co-occurrence
//!    graph, spectral-cluster it recursively, and emit hierarchical
//!    `⟨CI*⟩…⟨I*⟩` token paths.
//! 4. [`prompts`] — parse semicolon-delimited prompt templates, render them
//!    with per-user bindings, and build train/val/test corpora (including the
//!    multi-dataset merge).
//! 5. [`scheduler`] — task- and dataset-homogeneous batch plans with
//!    round-robin alternation and small-group cycling.
//! 6. [`genrec`] — an item-token trie, trie-constrained beam decoding, and a
//!    popularity-smoothed Markov baseline so the pipeline is exercisable
//!    end-to-end without a neural model.
//! 7. [`eval`] — HR@k / NDCG@k over ranked prediction files.
//!
//! Everything is deterministic given its inputs and seeds: no clocks, no
//! global state, no platform-dependent RNG. Numeric kernels (spectral
//! embedding, k-means, baseline scores, metrics) are generic over the scalar
//! type via [`num::Real`]; the aliases below fix the common instantiations.

pub mod collab;
pub mod eval;
pub mod genrec;
pub mod ingest;
pub mod indexing;
pub mod num;
pub mod prompts;
pub mod scheduler;

pub use num::Real;

/// Metrics accumulated in `f64`, the default for file-facing evaluation.
pub type Metrics64 = eval::Metrics<f64>;
/// Metrics accumulated in `f32`.
pub type Metrics32 = eval::Metrics<f32>;
/// Baseline recommender scored in `f64`, the default for the CLI.
pub type Baseline64 = genrec::BaselineModel<f64>;
/// Baseline recommender scored in `f32`.
pub type Baseline32 = genrec::BaselineModel<f32>;
