//! End-to-end pipeline: ingest → index (per method) → corpora → batch plan →
//! baseline decoding → evaluation.

use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;

use forge_core::collab::{collaborative_index, CollabConfig};
use forge_core::eval::{evaluate, parse_predictions, parse_truths, render_report};
use forge_core::genrec::{beam_decode, build_trie, fit_baseline, write_predictions, RankedList};
use forge_core::indexing::{random_index, sequential_index, IndexMethod, ItemIndex, UserMap};
use forge_core::ingest::{dataset_stats, parse_interactions, split_leave_one_out, SplitLog};
use forge_core::prompts::{
    build_corpus, merge_sp5, parse_templates, write_corpus, Phase, Task, DEFAULT_TEMPLATES,
};
use forge_core::scheduler::{plan_batches, write_plan};
use forge_core::Metrics64;

use crate::provenance::digest16;
use crate::store::{self, Layout};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub dataset: String,
    pub out_dir: PathBuf,
    pub methods: Vec<IndexMethod>,
    pub seed: u64,
    pub start_id: u64,
    pub clusters: usize,
    pub max_leaf: usize,
    pub history_cap: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub top_k: usize,
    pub beam_width: usize,
    pub ks: Vec<usize>,
}

impl RunConfig {
    pub fn new(input: PathBuf, dataset: String, out_dir: PathBuf) -> Self {
        RunConfig {
            input,
            dataset,
            out_dir,
            methods: vec![
                IndexMethod::Random,
                IndexMethod::Sequential,
                IndexMethod::Collaborative,
            ],
            seed: 42,
            start_id: 1001,
            clusters: 10,
            max_leaf: 20,
            history_cap: 20,
            batch_size: 32,
            alpha: 0.1,
            top_k: 10,
            beam_width: 20,
            ks: vec![5, 10],
        }
    }
}

pub struct PipelineSummary {
    /// Per-method test metrics, in the order the methods ran.
    pub metrics: Vec<(IndexMethod, Metrics64)>,
    pub report: String,
}

/// Build the per-user decode queries for a phase: the query ID is the raw
/// user ID, the history is what that phase may condition on.
pub fn phase_queries(split: &SplitLog, phase: Phase) -> Vec<(String, Vec<String>)> {
    split
        .users
        .iter()
        .map(|user| {
            let mut history = user.train_history.clone();
            if phase == Phase::Test {
                history.push(user.val_target.clone());
            }
            (user.raw_user_id.clone(), history)
        })
        .collect()
}

/// Decode every query in parallel; the output order follows the input order,
/// so results are independent of the thread count.
pub fn decode_all(
    model: &forge_core::Baseline64,
    trie: &forge_core::genrec::ItemTrie,
    queries: &[(String, Vec<String>)],
    top_k: usize,
    beam_width: usize,
) -> Vec<RankedList> {
    queries
        .par_iter()
        .map(|(query_id, history)| beam_decode(model, trie, query_id, history, top_k, beam_width))
        .collect()
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineSummary> {
    let raw = std::fs::read_to_string(&cfg.input)
        .with_context(|| format!("reading {}", cfg.input.display()))?;
    let input_digest = digest16(raw.as_bytes());
    let provenance = |step: &str| -> Vec<(&'static str, String)> {
        vec![
            ("cmd", format!("pipeline:{step}")),
            ("seed", cfg.seed.to_string()),
            ("input", format!("{}", input_digest)),
        ]
    };

    let log = parse_interactions(&raw, &cfg.dataset)?;
    let stats = dataset_stats(&log);
    let split = split_leave_one_out(&log)?;
    let users = UserMap::from_ids(split.users.iter().map(|u| u.raw_user_id.as_str()));

    let layout = Layout::new(&cfg.out_dir);
    store::write_split_dir(&layout.split_dir(), &split, &users, &stats, &provenance("ingest"))?;

    let templates = parse_templates(DEFAULT_TEMPLATES)?;
    let truth_text = store::read_raw(&layout.split_dir().join(store::TRUTH_TEST_FILE))?;
    let truths = parse_truths(&truth_text)?;

    let model = fit_baseline::<f64>(&split, &sequential_index(&split, cfg.start_id), cfg.alpha);
    let mut metrics_by_method = Vec::new();
    let mut report = String::new();

    for &method in &cfg.methods {
        let name = method.as_str();
        let index: ItemIndex = match method {
            IndexMethod::Random => random_index(&split, cfg.seed, cfg.start_id),
            IndexMethod::Sequential => sequential_index(&split, cfg.start_id),
            IndexMethod::Collaborative => {
                let collab_cfg = CollabConfig::new(cfg.clusters, cfg.max_leaf, cfg.seed);
                let (index, tree) = collaborative_index::<f64>(&split, &collab_cfg)?;
                store::write_artifact(&layout.tree_file(), &provenance("index"), &tree.dump())?;
                index
            }
        };
        store::write_artifact(
            &layout.index_file(name),
            &provenance("index"),
            &forge_core::indexing::write_index_map(&index),
        )?;

        for phase in [Phase::Train, Phase::Val, Phase::Test] {
            let per_task = [Task::Sequential, Task::Straightforward]
                .iter()
                .map(|&task| {
                    build_corpus(&split, &index, &users, &templates, task, phase, cfg.history_cap)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let corpus = merge_sp5(&per_task)?;
            store::write_artifact(
                &layout.corpus_file(name, phase.as_str()),
                &provenance("prompts"),
                &write_corpus(&corpus),
            )?;
            if phase == Phase::Train {
                let plan = plan_batches(&corpus, cfg.batch_size, cfg.seed)?;
                store::write_artifact(
                    &layout.plan_file(name),
                    &provenance("schedule"),
                    &write_plan(&plan),
                )?;
            }
        }

        let trie = build_trie(&index)?;
        let queries = phase_queries(&split, Phase::Test);
        let ranked = decode_all(&model, &trie, &queries, cfg.top_k, cfg.beam_width);
        let predictions_text = write_predictions(&ranked);
        store::write_artifact(
            &layout.predictions_file(name, "test"),
            &provenance("generate"),
            &predictions_text,
        )?;

        let preds = parse_predictions(&predictions_text)?;
        let metrics: Metrics64 = evaluate(&preds, &truths, &cfg.ks)?;
        let rendered = render_report(&metrics, &cfg.ks);
        store::write_artifact(&layout.report_file(name), &provenance("eval"), &rendered)?;
        report.push_str(&format!("== {name} ==\n{rendered}\n"));
        metrics_by_method.push((method, metrics));
    }

    Ok(PipelineSummary {
        metrics: metrics_by_method,
        report,
    })
}
