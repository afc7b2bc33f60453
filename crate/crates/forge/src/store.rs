//! On-disk layout of pipeline artifacts.
//!
//! A split directory holds `meta.txt` (dataset name and counters),
//! `train.txt` / `val.txt` / `test.txt` in the line-per-user format,
//! `users.txt` (raw user ID → integer), and `truth_val.tsv` /
//! `truth_test.tsv` (`query_id<TAB>item_id`, query = raw user ID). Every file
//! starts with a provenance header line; raw IDs beginning with `#` are not
//! supported inside these derived files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use forge_core::indexing::{read_user_map, write_user_map, UserMap};
use forge_core::ingest::{parse_interactions, write_interactions, InteractionLog, SplitLog, SplitUser, Stats, UserRecord};

use crate::provenance::{header, split_meta};
use crate::TOOL_VERSION;

pub const TRAIN_FILE: &str = "train.txt";
pub const VAL_FILE: &str = "val.txt";
pub const TEST_FILE: &str = "test.txt";
pub const USERS_FILE: &str = "users.txt";
pub const META_FILE: &str = "meta.txt";
pub const TRUTH_VAL_FILE: &str = "truth_val.tsv";
pub const TRUTH_TEST_FILE: &str = "truth_test.tsv";

/// Write `body` prefixed with a provenance header line.
pub fn write_artifact(path: &Path, fields: &[(&str, String)], body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let text = format!("{}{}", header(TOOL_VERSION, fields), body);
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Read a file and strip its leading metadata lines.
pub fn read_body(path: &Path) -> Result<String> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(split_meta(&text).1)
}

/// Read a file whole (header included), for formats whose parsers skip `#`
/// lines themselves.
pub fn read_raw(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn single_item_log(split: &SplitLog, pick: impl Fn(&SplitUser) -> &String) -> InteractionLog {
    InteractionLog {
        dataset_name: split.dataset_name.clone(),
        users: split
            .users
            .iter()
            .map(|u| UserRecord {
                raw_user_id: u.raw_user_id.clone(),
                history: vec![pick(u).clone()],
            })
            .collect(),
    }
}

fn truth_lines(split: &SplitLog, pick: impl Fn(&SplitUser) -> &String) -> String {
    let mut out = String::new();
    for user in &split.users {
        out.push_str(&format!("{}\t{}\n", user.raw_user_id, pick(user)));
    }
    out
}

/// Persist a split (plus the user map and truth files) under `dir`.
pub fn write_split_dir(
    dir: &Path,
    split: &SplitLog,
    users: &UserMap,
    stats: &Stats,
    provenance: &[(&str, String)],
) -> Result<()> {
    let train = InteractionLog {
        dataset_name: split.dataset_name.clone(),
        users: split
            .users
            .iter()
            .map(|u| UserRecord {
                raw_user_id: u.raw_user_id.clone(),
                history: u.train_history.clone(),
            })
            .collect(),
    };
    write_artifact(&dir.join(TRAIN_FILE), provenance, &write_interactions(&train))?;
    write_artifact(
        &dir.join(VAL_FILE),
        provenance,
        &write_interactions(&single_item_log(split, |u| &u.val_target)),
    )?;
    write_artifact(
        &dir.join(TEST_FILE),
        provenance,
        &write_interactions(&single_item_log(split, |u| &u.test_target)),
    )?;
    write_artifact(&dir.join(USERS_FILE), provenance, &write_user_map(users))?;
    write_artifact(
        &dir.join(TRUTH_VAL_FILE),
        provenance,
        &truth_lines(split, |u| &u.val_target),
    )?;
    write_artifact(
        &dir.join(TRUTH_TEST_FILE),
        provenance,
        &truth_lines(split, |u| &u.test_target),
    )?;
    let meta = format!(
        "dataset={}\nusers={}\nitems={}\ninteractions={}\ndropped_users={}\ndensity={:.6}\nmin_history={}\nmax_history={}\nmean_history={:.4}\n",
        split.dataset_name,
        stats.user_count,
        stats.item_count,
        stats.interaction_count,
        split.dropped_user_count,
        stats.density,
        stats.min_history_len,
        stats.max_history_len,
        stats.mean_history_len,
    );
    write_artifact(&dir.join(META_FILE), provenance, &meta)?;
    Ok(())
}

/// Reassemble the split and user map from a split directory.
pub fn load_split_dir(dir: &Path) -> Result<(SplitLog, UserMap)> {
    let meta = read_body(&dir.join(META_FILE))?;
    let mut dataset = None;
    let mut dropped = 0usize;
    for line in meta.lines() {
        if let Some(v) = line.strip_prefix("dataset=") {
            dataset = Some(v.to_string());
        } else if let Some(v) = line.strip_prefix("dropped_users=") {
            dropped = v.parse().unwrap_or(0);
        }
    }
    let dataset = dataset.context("meta.txt is missing the dataset name")?;

    let train = parse_interactions(&read_body(&dir.join(TRAIN_FILE))?, &dataset)
        .context("parsing train.txt")?;
    let val = parse_interactions(&read_body(&dir.join(VAL_FILE))?, &dataset)
        .context("parsing val.txt")?;
    let test = parse_interactions(&read_body(&dir.join(TEST_FILE))?, &dataset)
        .context("parsing test.txt")?;
    if train.users.len() != val.users.len() || train.users.len() != test.users.len() {
        bail!("split files disagree on user count");
    }
    let mut users = Vec::with_capacity(train.users.len());
    for ((t, v), s) in train.users.into_iter().zip(val.users).zip(test.users) {
        if t.raw_user_id != v.raw_user_id || t.raw_user_id != s.raw_user_id {
            bail!("split files disagree on user order at {}", t.raw_user_id);
        }
        if v.history.len() != 1 || s.history.len() != 1 {
            bail!("val/test lines must hold exactly one item");
        }
        users.push(SplitUser {
            raw_user_id: t.raw_user_id,
            train_history: t.history,
            val_target: v.history.into_iter().next().expect("one item"),
            test_target: s.history.into_iter().next().expect("one item"),
        });
    }
    let split = SplitLog {
        dataset_name: dataset,
        users,
        dropped_user_count: dropped,
    };
    let user_map = read_user_map(&read_raw(&dir.join(USERS_FILE))?)
        .context("parsing users.txt")?;
    Ok((split, user_map))
}

/// Conventional artifact paths under a pipeline output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn split_dir(&self) -> PathBuf {
        self.root.join("split")
    }

    pub fn index_file(&self, method: &str) -> PathBuf {
        self.root.join("index").join(format!("{method}.txt"))
    }

    pub fn tree_file(&self) -> PathBuf {
        self.root.join("index").join("collaborative.tree.txt")
    }

    pub fn corpus_file(&self, method: &str, phase: &str) -> PathBuf {
        self.root.join("corpus").join(method).join(format!("{phase}.tsv"))
    }

    pub fn plan_file(&self, method: &str) -> PathBuf {
        self.root.join("plan").join(format!("{method}.tsv"))
    }

    pub fn predictions_file(&self, method: &str, phase: &str) -> PathBuf {
        self.root.join("pred").join(format!("{method}_{phase}.tsv"))
    }

    pub fn report_file(&self, method: &str) -> PathBuf {
        self.root.join("eval").join(format!("{method}.txt"))
    }
}
