//! Raw interaction ingestion: parsing, leave-one-out splitting, statistics.
//!
//! The input format is one user per line, tokens separated by one or more
//! ASCII spaces. The first token is the raw user ID, the remaining tokens are
//! raw item IDs in chronological interaction order. Raw IDs are opaque UTF-8
//! strings without whitespace.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    /// A non-empty line with fewer than two tokens (user plus at least one item).
    #[error("line {line}: expected a user ID followed by at least one item ID")]
    MalformedLine { line: usize },
    /// The same raw user ID appeared on two lines.
    #[error("line {line}: duplicate user ID {user:?}")]
    DuplicateUser { user: String, line: usize },
    /// No valid data lines at all.
    #[error("dataset contains no interaction lines")]
    EmptyDataset,
    /// Every user fell below the minimum history length.
    #[error("no user has the {min} interactions required for a split", min = MIN_HISTORY_FOR_SPLIT)]
    EmptySplit,
}

/// Minimum interactions a user needs to survive the leave-one-out split:
/// one train item, one validation target, one test target.
pub const MIN_HISTORY_FOR_SPLIT: usize = 3;

/// One user's chronological interaction history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub raw_user_id: String,
    pub history: Vec<String>,
}

/// All users of a dataset, in file (line) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionLog {
    pub dataset_name: String,
    pub users: Vec<UserRecord>,
}

/// One user after the leave-one-out split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitUser {
    pub raw_user_id: String,
    pub train_history: Vec<String>,
    pub val_target: String,
    pub test_target: String,
}

impl SplitUser {
    /// The original history: train ++ [val] ++ [test].
    pub fn full_history(&self) -> Vec<String> {
        let mut h = self.train_history.clone();
        h.push(self.val_target.clone());
        h.push(self.test_target.clone());
        h
    }
}

/// Leave-one-out split of an [`InteractionLog`], preserving user order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitLog {
    pub dataset_name: String,
    pub users: Vec<SplitUser>,
    /// Users dropped for having fewer than [`MIN_HISTORY_FOR_SPLIT`] interactions.
    pub dropped_user_count: usize,
}

impl SplitLog {
    /// Distinct raw item IDs in first-appearance order (train, then val,
    /// then test within each user; users in file order).
    pub fn items_in_first_appearance_order(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut items = Vec::new();
        for user in &self.users {
            for item in user
                .train_history
                .iter()
                .chain(std::iter::once(&user.val_target))
                .chain(std::iter::once(&user.test_target))
            {
                if seen.insert(item.clone()) {
                    items.push(item.clone());
                }
            }
        }
        items
    }
}

/// Dataset summary counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub user_count: usize,
    /// Distinct raw item IDs.
    pub item_count: usize,
    pub interaction_count: usize,
    /// Users below [`MIN_HISTORY_FOR_SPLIT`] (what a split would drop).
    pub dropped_user_count: usize,
    /// interactions / (users × items).
    pub density: f64,
    pub min_history_len: usize,
    pub max_history_len: usize,
    pub mean_history_len: f64,
}

/// Parse the line-per-user interaction format.
///
/// Empty lines are skipped; a trailing newline and CRLF line endings are
/// tolerated. Tokens are split on runs of ASCII spaces; any other embedded
/// whitespace makes the line malformed.
pub fn parse_interactions(text: &str, dataset_name: &str) -> Result<InteractionLog, IngestError> {
    let mut users = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim_matches(' ').is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(' ').filter(|t| !t.is_empty()).collect();
        if tokens.len() < 2 || tokens.iter().any(|t| t.chars().any(char::is_whitespace)) {
            return Err(IngestError::MalformedLine { line: line_no });
        }
        let raw_user_id = tokens[0].to_string();
        if !seen.insert(raw_user_id.clone()) {
            return Err(IngestError::DuplicateUser {
                user: raw_user_id,
                line: line_no,
            });
        }
        users.push(UserRecord {
            raw_user_id,
            history: tokens[1..].iter().map(|t| t.to_string()).collect(),
        });
    }
    if users.is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    Ok(InteractionLog {
        dataset_name: dataset_name.to_string(),
        users,
    })
}

/// Serialize a log back to the line format (single-space separators).
pub fn write_interactions(log: &InteractionLog) -> String {
    let mut out = String::new();
    for user in &log.users {
        out.push_str(&user.raw_user_id);
        for item in &user.history {
            out.push(' ');
            out.push_str(item);
        }
        out.push('\n');
    }
    out
}

/// Leave-one-out split: last item → test, second-to-last → validation, the
/// rest → training. Users with fewer than three interactions are dropped and
/// counted.
pub fn split_leave_one_out(log: &InteractionLog) -> Result<SplitLog, IngestError> {
    let mut users = Vec::new();
    let mut dropped = 0usize;
    for user in &log.users {
        if user.history.len() < MIN_HISTORY_FOR_SPLIT {
            dropped += 1;
            continue;
        }
        let n = user.history.len();
        users.push(SplitUser {
            raw_user_id: user.raw_user_id.clone(),
            train_history: user.history[..n - 2].to_vec(),
            val_target: user.history[n - 2].clone(),
            test_target: user.history[n - 1].clone(),
        });
    }
    if users.is_empty() {
        return Err(IngestError::EmptySplit);
    }
    Ok(SplitLog {
        dataset_name: log.dataset_name.clone(),
        users,
        dropped_user_count: dropped,
    })
}

/// Summary counters over a raw log.
pub fn dataset_stats(log: &InteractionLog) -> Stats {
    let mut items = HashSet::new();
    let mut interactions = 0usize;
    let mut min_len = usize::MAX;
    let mut max_len = 0usize;
    let mut dropped = 0usize;
    for user in &log.users {
        interactions += user.history.len();
        min_len = min_len.min(user.history.len());
        max_len = max_len.max(user.history.len());
        if user.history.len() < MIN_HISTORY_FOR_SPLIT {
            dropped += 1;
        }
        for item in &user.history {
            items.insert(item.as_str());
        }
    }
    let user_count = log.users.len();
    let item_count = items.len();
    Stats {
        user_count,
        item_count,
        interaction_count: interactions,
        dropped_user_count: dropped,
        density: interactions as f64 / (user_count as f64 * item_count as f64),
        min_history_len: if user_count == 0 { 0 } else { min_len },
        max_history_len: max_len,
        mean_history_len: interactions as f64 / user_count as f64,
    }
}
