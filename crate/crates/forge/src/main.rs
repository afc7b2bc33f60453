use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use forge::config::{resolve, Settings};
use forge::pipeline::{decode_all, phase_queries, run_pipeline, RunConfig};
use forge::provenance::digest16;
use forge::store;
use forge_core::collab::{collaborative_index, CollabConfig};
use forge_core::eval::{evaluate_grouped, parse_predictions, parse_truths, render_report};
use forge_core::genrec::{build_trie, fit_baseline, write_predictions};
use forge_core::indexing::{
    random_index, read_index_map, sequential_index, write_index_map, IndexMethod, ItemIndex,
};
use forge_core::ingest::{dataset_stats, parse_interactions, split_leave_one_out};
use forge_core::prompts::{
    build_corpus, merge_sp5, parse_templates, read_corpus, write_corpus, Phase, Task,
    DEFAULT_TEMPLATES,
};
use forge_core::scheduler::{plan_batches, write_plan};
use forge_core::{Baseline64, Metrics64};

/// Errors that should exit with status 2 (bad invocation) instead of 1 (data).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "forge",
    version,
    about = "Data pipeline for generative recommendation: ingest, index, prompts, schedule, generate, eval"
)]
struct Cli {
    /// key=value config file; command-line flags win on conflict
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for decoding (outputs do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Random,
    Sequential,
    Collaborative,
}

impl MethodArg {
    fn to_method(self) -> IndexMethod {
        match self {
            MethodArg::Random => IndexMethod::Random,
            MethodArg::Sequential => IndexMethod::Sequential,
            MethodArg::Collaborative => IndexMethod::Collaborative,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodOrAllArg {
    Random,
    Sequential,
    Collaborative,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Sequential,
    Straightforward,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Train,
    Val,
    Test,
}

impl PhaseArg {
    fn to_phase(self) -> Phase {
        match self {
            PhaseArg::Train => Phase::Train,
            PhaseArg::Val => Phase::Val,
            PhaseArg::Test => Phase::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw interactions and write a leave-one-out split directory
    Ingest {
        /// Text file: one user per line, space-separated raw IDs
        #[arg(long)]
        input: PathBuf,
        /// Dataset label used inside prompts (defaults to the file stem)
        #[arg(long)]
        dataset: Option<String>,
        /// Split directory to create
        #[arg(long)]
        out: PathBuf,
    },
    /// Print dataset statistics without writing anything
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Assign language-compatible item IDs over a split
    Index {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        split_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// First integer ID for the numeric methods
        #[arg(long)]
        start_id: Option<u64>,
        /// Clusters per split (collaborative)
        #[arg(long)]
        clusters: Option<usize>,
        /// Largest allowed leaf cluster (collaborative)
        #[arg(long)]
        max_leaf: Option<usize>,
        /// Write the cluster hierarchy as indented text (collaborative)
        #[arg(long)]
        dump_tree: Option<PathBuf>,
    },
    /// Render prompt corpora from a split and an index map
    Prompts {
        #[arg(long)]
        split_dir: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Template file (defaults to the built-in 11+11 set)
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        task: TaskArg,
        #[arg(long, value_enum)]
        phase: PhaseArg,
        #[arg(long)]
        history_cap: Option<usize>,
    },
    /// Plan task- and dataset-homogeneous batches over corpora
    Schedule {
        /// Corpus files; examples are concatenated in argument order
        #[arg(long, num_args = 1.., required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode ranked recommendations with the trie-constrained baseline
    Generate {
        #[arg(long, default_value = "baseline")]
        model: String,
        #[arg(long)]
        split_dir: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Which held-out target the queries aim at
        #[arg(long, value_enum, default_value = "test")]
        phase: PhaseArg,
        /// Ranked items per query
        #[arg(long)]
        k: Option<usize>,
        /// Beam width (>= k)
        #[arg(long)]
        beam: Option<usize>,
        /// Popularity-smoothing weight
        #[arg(long)]
        alpha: Option<f64>,
        /// Restrict scoring to the raw item IDs listed in this file
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Also write the matching truth file for the phase
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Score prediction files with HR@k and NDCG@k
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Comma-separated cutoffs
        #[arg(long, default_value = "5,10")]
        k: String,
        /// Optional `query_id<TAB>group` labels for per-group reporting
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Run the whole pipeline: ingest, all indexings, corpora, plans,
    /// baseline decoding, evaluation
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodOrAllArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        start_id: Option<u64>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        max_leaf: Option<usize>,
        #[arg(long)]
        history_cap: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Comma-separated metric cutoffs
        #[arg(long, default_value = "5,10")]
        k: String,
        #[arg(long)]
        alpha: Option<f64>,
        /// Ranked items per query
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        beam: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 2,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if err.is::<UsageError>() => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dataset_or_stem(dataset: Option<String>, input: &Path) -> String {
    dataset.unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    })
}

fn parse_ks(text: &str) -> Result<Vec<usize>> {
    let ks = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("cannot parse cutoffs {text:?}; expected e.g. 5,10")))?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(usage("cutoffs must be positive integers"));
    }
    Ok(ks)
}

fn input_field(path: &Path, bytes: &[u8]) -> (&'static str, String) {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    ("input", format!("{name}:{}", digest16(bytes)))
}

fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }

    match cli.command {
        Command::Ingest { input, dataset, out } => {
            let dataset = dataset_or_stem(dataset.or(settings.get("dataset").map(String::from)), &input);
            let raw = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let log = parse_interactions(&raw, &dataset)?;
            let stats = dataset_stats(&log);
            let split = split_leave_one_out(&log)?;
            let users = forge_core::indexing::UserMap::from_ids(
                split.users.iter().map(|u| u.raw_user_id.as_str()),
            );
            let provenance = vec![
                ("cmd", "ingest".to_string()),
                input_field(&input, raw.as_bytes()),
                ("dataset", dataset.clone()),
            ];
            store::write_split_dir(&out, &split, &users, &stats, &provenance)?;
            println!(
                "ingested {}: {} users ({} dropped), {} items, {} interactions -> {}",
                dataset,
                stats.user_count,
                split.dropped_user_count,
                stats.item_count,
                stats.interaction_count,
                out.display()
            );
        }
        Command::Stats { input, dataset } => {
            let dataset = dataset_or_stem(dataset, &input);
            let raw = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let log = parse_interactions(&raw, &dataset)?;
            let stats = dataset_stats(&log);
            println!("dataset            {dataset}");
            println!("users              {}", stats.user_count);
            println!("items              {}", stats.item_count);
            println!("interactions       {}", stats.interaction_count);
            println!("droppable users    {}", stats.dropped_user_count);
            println!("density            {:.6}", stats.density);
            println!(
                "history length     min {} / mean {:.2} / max {}",
                stats.min_history_len, stats.mean_history_len, stats.max_history_len
            );
        }
        Command::Index {
            method,
            split_dir,
            out,
            seed,
            start_id,
            clusters,
            max_leaf,
            dump_tree,
        } => {
            let seed = resolve(seed, settings.get_parsed("seed")?, 42);
            let start_id = resolve(start_id, settings.get_parsed("start-id")?, 1001);
            let clusters = resolve(clusters, settings.get_parsed("clusters")?, 10);
            let max_leaf = resolve(max_leaf, settings.get_parsed("max-leaf")?, 20);
            if clusters < 2 || max_leaf < 2 {
                return Err(usage("--clusters and --max-leaf must be >= 2"));
            }
            if dump_tree.is_some() && !matches!(method, MethodArg::Collaborative) {
                return Err(usage("--dump-tree applies only to the collaborative method"));
            }
            let (split, _) = store::load_split_dir(&split_dir)?;
            let provenance = vec![
                ("cmd", "index".to_string()),
                ("method", method.to_method().as_str().to_string()),
                ("seed", seed.to_string()),
            ];
            let index = match method {
                MethodArg::Random => random_index(&split, seed, start_id),
                MethodArg::Sequential => sequential_index(&split, start_id),
                MethodArg::Collaborative => {
                    let cfg = CollabConfig::new(clusters, max_leaf, seed);
                    let (index, tree) = collaborative_index::<f64>(&split, &cfg)?;
                    if let Some(path) = dump_tree {
                        store::write_artifact(&path, &provenance, &tree.dump())?;
                    }
                    index
                }
            };
            store::write_artifact(&out, &provenance, &write_index_map(&index))?;
            println!("indexed {} items ({}) -> {}", index.len(), method.to_method().as_str(), out.display());
        }
        Command::Prompts {
            split_dir,
            index,
            out,
            templates,
            task,
            phase,
            history_cap,
        } => {
            let history_cap = resolve(history_cap, settings.get_parsed("history-cap")?, 20);
            let (split, users) = store::load_split_dir(&split_dir)?;
            let index_text = store::read_raw(&index)?;
            let item_index = read_index_map(&index_text)?;
            let template_text = match &templates {
                Some(path) => store::read_raw(path)?,
                None => DEFAULT_TEMPLATES.to_string(),
            };
            let parsed_templates = parse_templates(&template_text)?;
            let phase = phase.to_phase();
            let tasks: Vec<Task> = match task {
                TaskArg::Sequential => vec![Task::Sequential],
                TaskArg::Straightforward => vec![Task::Straightforward],
                TaskArg::Both => vec![Task::Sequential, Task::Straightforward],
            };
            let per_task = tasks
                .iter()
                .map(|&t| build_corpus(&split, &item_index, &users, &parsed_templates, t, phase, history_cap))
                .collect::<Result<Vec<_>, _>>()?;
            let corpus = merge_sp5(&per_task)?;
            let provenance = vec![
                ("cmd", "prompts".to_string()),
                ("phase", phase.as_str().to_string()),
                input_field(&index, index_text.as_bytes()),
            ];
            store::write_artifact(&out, &provenance, &write_corpus(&corpus))?;
            println!("wrote {} examples -> {}", corpus.examples.len(), out.display());
        }
        Command::Schedule {
            corpus,
            batch_size,
            seed,
            out,
        } => {
            let batch_size = resolve(batch_size, settings.get_parsed("batch-size")?, 32);
            let seed = resolve(seed, settings.get_parsed("seed")?, 42);
            if batch_size == 0 {
                return Err(usage("--batch-size must be >= 1"));
            }
            let mut corpora = Vec::new();
            let mut provenance = vec![
                ("cmd", "schedule".to_string()),
                ("seed", seed.to_string()),
            ];
            let mut digests = Vec::new();
            for path in &corpus {
                let text = store::read_raw(path)?;
                digests.push(input_field(path, text.as_bytes()));
                corpora.push(read_corpus(&text)?);
            }
            provenance.extend(digests);
            let merged = merge_sp5(&corpora)?;
            let plan = plan_batches(&merged, batch_size, seed)?;
            store::write_artifact(&out, &provenance, &write_plan(&plan))?;
            println!(
                "planned {} batches over {} examples -> {}",
                plan.batches.len(),
                merged.examples.len(),
                out.display()
            );
        }
        Command::Generate {
            model,
            split_dir,
            index,
            out,
            phase,
            k,
            beam,
            alpha,
            candidates,
            truth_out,
        } => {
            if model != "baseline" {
                return Err(usage(format!("unknown model {model:?}; only \"baseline\" is available")));
            }
            let k = resolve(k, settings.get_parsed("k")?, 10);
            let beam = resolve(beam, settings.get_parsed("beam")?, k.max(20));
            let alpha = resolve(alpha, settings.get_parsed("alpha")?, 0.1);
            if k == 0 {
                return Err(usage("--k must be >= 1"));
            }
            if beam < k {
                return Err(usage("--beam must be >= --k"));
            }
            let phase = phase.to_phase();
            if phase == Phase::Train {
                return Err(usage("--phase must be val or test"));
            }
            let (split, _) = store::load_split_dir(&split_dir)?;
            let index_text = store::read_raw(&index)?;
            let item_index = read_index_map(&index_text)?;
            // Candidates narrow the decodable catalog, not the training data.
            let decode_index = match &candidates {
                Some(path) => restrict_to_candidates(&item_index, path)?,
                None => item_index.clone(),
            };
            let model: Baseline64 = fit_baseline(&split, &item_index, alpha);
            let trie = build_trie(&decode_index)?;
            let queries = phase_queries(&split, phase);
            let ranked = decode_all(&model, &trie, &queries, k, beam);
            let provenance = vec![
                ("cmd", "generate".to_string()),
                ("phase", phase.as_str().to_string()),
                ("k", k.to_string()),
                ("beam", beam.to_string()),
                ("alpha", alpha.to_string()),
                input_field(&index, index_text.as_bytes()),
            ];
            store::write_artifact(&out, &provenance, &write_predictions(&ranked))?;
            if let Some(path) = truth_out {
                let mut lines = String::new();
                for user in &split.users {
                    let target = match phase {
                        Phase::Val => &user.val_target,
                        _ => &user.test_target,
                    };
                    lines.push_str(&format!("{}\t{}\n", user.raw_user_id, target));
                }
                store::write_artifact(&path, &provenance, &lines)?;
            }
            println!("decoded {} queries -> {}", ranked.len(), out.display());
        }
        Command::Eval {
            predictions,
            truth,
            k,
            groups,
        } => {
            let ks = parse_ks(&k)?;
            let preds = parse_predictions(&store::read_raw(&predictions)?)?;
            let truths = parse_truths(&store::read_raw(&truth)?)?;
            let group_map = match &groups {
                Some(path) => Some(parse_groups(&store::read_raw(path)?)?),
                None => None,
            };
            let metrics: Metrics64 = evaluate_grouped(&preds, &truths, &ks, group_map.as_ref())?;
            print!("{}", render_report(&metrics, &ks));
        }
        Command::Pipeline {
            input,
            dataset,
            out,
            method,
            seed,
            start_id,
            clusters,
            max_leaf,
            history_cap,
            batch_size,
            k,
            alpha,
            top_k,
            beam,
        } => {
            let dataset = dataset_or_stem(dataset.or(settings.get("dataset").map(String::from)), &input);
            let mut cfg = RunConfig::new(input, dataset, out);
            cfg.methods = match method {
                MethodOrAllArg::Random => vec![IndexMethod::Random],
                MethodOrAllArg::Sequential => vec![IndexMethod::Sequential],
                MethodOrAllArg::Collaborative => vec![IndexMethod::Collaborative],
                MethodOrAllArg::All => vec![
                    IndexMethod::Random,
                    IndexMethod::Sequential,
                    IndexMethod::Collaborative,
                ],
            };
            cfg.seed = resolve(seed, settings.get_parsed("seed")?, cfg.seed);
            cfg.start_id = resolve(start_id, settings.get_parsed("start-id")?, cfg.start_id);
            cfg.clusters = resolve(clusters, settings.get_parsed("clusters")?, cfg.clusters);
            cfg.max_leaf = resolve(max_leaf, settings.get_parsed("max-leaf")?, cfg.max_leaf);
            cfg.history_cap = resolve(history_cap, settings.get_parsed("history-cap")?, cfg.history_cap);
            cfg.batch_size = resolve(batch_size, settings.get_parsed("batch-size")?, cfg.batch_size);
            cfg.alpha = resolve(alpha, settings.get_parsed("alpha")?, cfg.alpha);
            cfg.top_k = resolve(top_k, settings.get_parsed("top-k")?, cfg.top_k);
            cfg.beam_width = resolve(beam, settings.get_parsed("beam")?, cfg.beam_width);
            cfg.ks = parse_ks(&k)?;
            if cfg.clusters < 2 || cfg.max_leaf < 2 {
                return Err(usage("--clusters and --max-leaf must be >= 2"));
            }
            if cfg.beam_width < cfg.top_k {
                return Err(usage("--beam must be >= --top-k"));
            }
            if cfg.batch_size == 0 {
                return Err(usage("--batch-size must be >= 1"));
            }
            let summary = run_pipeline(&cfg)?;
            print!("{}", summary.report);
        }
    }
    Ok(())
}

fn restrict_to_candidates(index: &ItemIndex, path: &Path) -> Result<ItemIndex> {
    let text = store::read_raw(path)?;
    let mut keep = Vec::new();
    for line in text.lines() {
        let item = line.trim();
        if item.is_empty() || item.starts_with('#') {
            continue;
        }
        if !index.contains(item) {
            bail!("candidate item {item:?} has no index entry");
        }
        keep.push(item);
    }
    if keep.is_empty() {
        bail!("candidate file {} lists no indexed items", path.display());
    }
    Ok(index.restrict(keep.iter().copied()))
}

fn parse_groups(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (query, group) = line
            .split_once('\t')
            .with_context(|| format!("groups line {}: expected query<TAB>group", idx + 1))?;
        map.insert(query.to_string(), group.to_string());
    }
    Ok(map)
}
