//! Language-compatible item and user IDs.
//!
//! Numeric methods (random, sequential) assign each item an integer which is
//! then digit-pair tokenized; collaborative indexing (see [`crate::collab`])
//! assigns angle-bracket token paths. All methods serialize to the same
//! two-column text format: `<raw_id> <joined_tokens>` per line, tokens joined
//! with no separator.

use indexmap::IndexMap as OrderedMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{InteractionLog, SplitLog};

/// Default first assigned integer ID. Four-digit IDs keep every item at two
/// digit-pair tokens for catalogs up to 8999 items.
pub const DEFAULT_START_ID: u64 = 1001;

pub const OPEN_BRACKET: char = '⟨';
pub const CLOSE_BRACKET: char = '⟩';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    /// Item ID is not a plain decimal number (or has a leading zero).
    #[error("item ID {id:?} is not a plain decimal number")]
    NonNumericId { id: String },
    /// Index-map line is not `<raw_id> <joined_tokens>` with valid tokens.
    #[error("index map line {line}: expected `<raw_id> <joined_tokens>`")]
    MalformedIndexLine { line: usize },
    #[error("index map line {line}: duplicate raw ID {raw:?}")]
    DuplicateRawId { raw: String, line: usize },
    /// Two raw IDs map to the same token sequence.
    #[error("raw IDs {a:?} and {b:?} share the same token sequence")]
    NonBijectiveMap { a: String, b: String },
}

/// Ordered token sequence representing one item ID.
///
/// Each token is either a 1–2 digit string or an angle-bracket token `⟨…⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(!tokens.is_empty());
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    /// Tokens concatenated with no separator. Digit tokens concatenate back
    /// to the numeric ID; bracket tokens are self-delimiting.
    pub fn joined(&self) -> String {
        self.0.concat()
    }
}

impl std::fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.joined())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMethod {
    Random,
    Sequential,
    Collaborative,
}

impl IndexMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexMethod::Random => "random",
            IndexMethod::Sequential => "sequential",
            IndexMethod::Collaborative => "collaborative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" => Some(IndexMethod::Random),
            "sequential" => Some(IndexMethod::Sequential),
            "collaborative" => Some(IndexMethod::Collaborative),
            _ => None,
        }
    }
}

/// Bijection from raw item IDs to token sequences, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemIndex {
    entries: OrderedMap<String, TokenSeq>,
    pub method: IndexMethod,
    /// First integer ID, for the numeric methods.
    pub start_id: Option<u64>,
}

impl ItemIndex {
    pub fn from_entries(
        entries: OrderedMap<String, TokenSeq>,
        method: IndexMethod,
        start_id: Option<u64>,
    ) -> Self {
        ItemIndex {
            entries,
            method,
            start_id,
        }
    }

    pub fn get(&self, raw_id: &str) -> Option<&TokenSeq> {
        self.entries.get(raw_id)
    }

    pub fn contains(&self, raw_id: &str) -> bool {
        self.entries.contains_key(raw_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TokenSeq)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Sub-index containing only the given raw IDs, preserving entry order.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a str>) -> ItemIndex {
        let wanted: std::collections::HashSet<&str> = keep.into_iter().collect();
        let entries = self
            .entries
            .iter()
            .filter(|(raw, _)| wanted.contains(raw.as_str()))
            .map(|(raw, seq)| (raw.clone(), seq.clone()))
            .collect();
        ItemIndex {
            entries,
            method: self.method,
            start_id: self.start_id,
        }
    }

    /// Check that no two raw IDs share a token sequence.
    pub fn check_bijective(&self) -> Result<(), IndexError> {
        let mut seen: OrderedMap<String, &str> = OrderedMap::new();
        for (raw, seq) in self.iter() {
            if let Some(prev) = seen.insert(seq.joined(), raw) {
                return Err(IndexError::NonBijectiveMap {
                    a: prev.to_string(),
                    b: raw.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Raw user ID → consecutive integer starting at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserMap {
    entries: OrderedMap<String, u64>,
}

impl UserMap {
    /// Number the given IDs 1..n in iteration order.
    pub fn from_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Self {
        let mut entries = OrderedMap::new();
        for id in ids {
            let next = entries.len() as u64 + 1;
            entries.entry(id.to_string()).or_insert(next);
        }
        UserMap { entries }
    }

    pub fn get(&self, raw_user_id: &str) -> Option<u64> {
        self.entries.get(raw_user_id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Split a decimal ID into 2-digit tokens, left to right; an odd-length ID
/// ends with a single-digit token.
pub fn tokenize_number(id: &str) -> Result<TokenSeq, IndexError> {
    let bad = || IndexError::NonNumericId { id: id.to_string() };
    if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    if id.len() > 1 && id.starts_with('0') {
        return Err(bad());
    }
    let bytes = id.as_bytes();
    let mut tokens = Vec::with_capacity(id.len().div_ceil(2));
    let mut i = 0;
    while i < bytes.len() {
        let end = (i + 2).min(bytes.len());
        tokens.push(id[i..end].to_string());
        i = end;
    }
    Ok(TokenSeq::new(tokens))
}

/// Assign items a uniformly random permutation of
/// `[start_id, start_id + item_count - 1]`, then digit-pair tokenize.
pub fn random_index(split: &SplitLog, seed: u64, start_id: u64) -> ItemIndex {
    let items = split.items_in_first_appearance_order();
    let mut ids: Vec<u64> = (start_id..start_id + items.len() as u64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let entries = items
        .into_iter()
        .zip(ids)
        .map(|(item, id)| {
            let seq = tokenize_number(&id.to_string()).expect("generated IDs are numeric");
            (item, seq)
        })
        .collect();
    ItemIndex::from_entries(entries, IndexMethod::Random, Some(start_id))
}

/// Assign consecutive integer IDs in order of first appearance across users'
/// training histories only; items seen only as validation or test targets
/// continue the counter afterwards (per user, validation before test).
pub fn sequential_index(split: &SplitLog, start_id: u64) -> ItemIndex {
    let mut entries: OrderedMap<String, TokenSeq> = OrderedMap::new();
    let mut next_id = start_id;
    let mut assign = |entries: &mut OrderedMap<String, TokenSeq>, item: &str| {
        if !entries.contains_key(item) {
            let seq = tokenize_number(&next_id.to_string()).expect("generated IDs are numeric");
            entries.insert(item.to_string(), seq);
            next_id += 1;
        }
    };
    for user in &split.users {
        for item in &user.train_history {
            assign(&mut entries, item);
        }
    }
    for user in &split.users {
        assign(&mut entries, &user.val_target);
        assign(&mut entries, &user.test_target);
    }
    ItemIndex::from_entries(entries, IndexMethod::Sequential, Some(start_id))
}

/// Number users 1..n in file order.
pub fn reindex_users(log: &InteractionLog) -> UserMap {
    UserMap::from_ids(log.users.iter().map(|u| u.raw_user_id.as_str()))
}

/// Serialize an index map: a `#`-prefixed metadata line followed by one
/// `<raw_id> <joined_tokens>` line per item.
pub fn write_index_map(index: &ItemIndex) -> String {
    let mut out = String::new();
    out.push_str(&format!("# index method={}", index.method.as_str()));
    if let Some(start) = index.start_id {
        out.push_str(&format!(" start_id={start}"));
    }
    out.push('\n');
    for (raw, seq) in index.iter() {
        out.push_str(raw);
        out.push(' ');
        out.push_str(&seq.joined());
        out.push('\n');
    }
    out
}

/// Parse the serialized index-map format. Lines starting with `#` are
/// metadata; `method=` and `start_id=` keys are recovered when present.
pub fn read_index_map(text: &str) -> Result<ItemIndex, IndexError> {
    let mut entries: OrderedMap<String, TokenSeq> = OrderedMap::new();
    let mut method = IndexMethod::Random;
    let mut start_id = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                if let Some(m) = field.strip_prefix("method=") {
                    if let Some(parsed) = IndexMethod::parse(m) {
                        method = parsed;
                    }
                } else if let Some(s) = field.strip_prefix("start_id=") {
                    start_id = s.parse::<u64>().ok();
                }
            }
            continue;
        }
        let (raw, joined) = line
            .split_once(' ')
            .ok_or(IndexError::MalformedIndexLine { line: line_no })?;
        if raw.is_empty() || joined.is_empty() || joined.contains(' ') {
            return Err(IndexError::MalformedIndexLine { line: line_no });
        }
        let seq = parse_joined_tokens(joined)
            .ok_or(IndexError::MalformedIndexLine { line: line_no })?;
        if entries.contains_key(raw) {
            return Err(IndexError::DuplicateRawId {
                raw: raw.to_string(),
                line: line_no,
            });
        }
        entries.insert(raw.to_string(), seq);
    }
    let index = ItemIndex::from_entries(entries, method, start_id);
    index.check_bijective()?;
    Ok(index)
}

/// Serialize a user map: one `<raw_user_id> <integer>` line per user.
pub fn write_user_map(map: &UserMap) -> String {
    let mut out = String::from("# users\n");
    for (raw, idx) in map.iter() {
        out.push_str(&format!("{raw} {idx}\n"));
    }
    out
}

/// Parse the serialized user-map format.
pub fn read_user_map(text: &str) -> Result<UserMap, IndexError> {
    let mut entries: OrderedMap<String, u64> = OrderedMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (raw, id) = line
            .split_once(' ')
            .ok_or(IndexError::MalformedIndexLine { line: line_no })?;
        let id: u64 = id
            .parse()
            .map_err(|_| IndexError::MalformedIndexLine { line: line_no })?;
        if entries.insert(raw.to_string(), id).is_some() {
            return Err(IndexError::DuplicateRawId {
                raw: raw.to_string(),
                line: line_no,
            });
        }
    }
    Ok(UserMap { entries })
}

/// Re-tokenize a joined token string: `⟨…⟩` groups are single tokens; maximal
/// digit runs are re-split by the digit-pair rule.
fn parse_joined_tokens(joined: &str) -> Option<TokenSeq> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = joined.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == OPEN_BRACKET {
            let close = chars[i..].iter().position(|&c| c == CLOSE_BRACKET)? + i;
            if close == i + 1 {
                return None; // empty bracket token
            }
            tokens.push(chars[i..=close].iter().collect());
            i = close + 1;
        } else if chars[i].is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let run: String = chars[i..j].iter().collect();
            let mut k = 0;
            while k < run.len() {
                let end = (k + 2).min(run.len());
                tokens.push(run[k..end].to_string());
                k = end;
            }
            i = j;
        } else {
            return None;
        }
    }
    if tokens.is_empty() {
        None
    } else {
        Some(TokenSeq::new(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_interactions, split_leave_one_out};

    fn split_from(text: &str) -> SplitLog {
        split_leave_one_out(&parse_interactions(text, "d").unwrap()).unwrap()
    }

    #[test]
    fn tokenize_pairs_left_to_right() {
        assert_eq!(tokenize_number("2048").unwrap().tokens(), ["20", "48"]);
        assert_eq!(tokenize_number("7").unwrap().tokens(), ["7"]);
        assert_eq!(tokenize_number("123").unwrap().tokens(), ["12", "3"]);
        assert_eq!(tokenize_number("0").unwrap().tokens(), ["0"]);
    }

    #[test]
    fn tokenize_rejects_non_numeric() {
        for bad in ["", "12a", "1 2", "-5", "007"] {
            assert!(matches!(
                tokenize_number(bad),
                Err(IndexError::NonNumericId { .. })
            ));
        }
    }

    #[test]
    fn random_index_singleton_gets_start_id() {
        let split = split_from("u1 a a a\n");
        for seed in [0u64, 1, 42, 999] {
            let index = random_index(&split, seed, DEFAULT_START_ID);
            assert_eq!(index.get("a").unwrap().joined(), "1001");
        }
    }

    #[test]
    fn random_index_assigns_exact_id_range() {
        // 1000 items: u1 interacts with i0..i999 plus two repeats for targets.
        let mut line = String::from("u1");
        for i in 0..1000 {
            line.push_str(&format!(" i{i}"));
        }
        line.push_str(" i0 i1\n");
        let split = split_from(&line);
        let index = random_index(&split, 42, DEFAULT_START_ID);
        assert_eq!(index.len(), 1000);
        let mut ids: Vec<u64> = index
            .iter()
            .map(|(_, seq)| seq.joined().parse::<u64>().unwrap())
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (1001..=2000).collect::<Vec<u64>>());
    }

    #[test]
    fn random_index_is_deterministic_per_seed() {
        let split = split_from("u1 a b c d e\nu2 f g h i\n");
        assert_eq!(random_index(&split, 7, 1001), random_index(&split, 7, 1001));
        assert_ne!(random_index(&split, 7, 1001), random_index(&split, 8, 1001));
    }

    #[test]
    fn random_index_permutation_covers_all_assignments() {
        // Sanity of uniformity: over 200 seeds on a 10-item log, every item
        // receives every ID at least once.
        let mut line = String::from("u1");
        for i in 0..10 {
            line.push_str(&format!(" i{i}"));
        }
        line.push_str(" i0 i1\n");
        let split = split_from(&line);
        let mut seen = vec![[false; 10]; 10];
        for seed in 0..200u64 {
            let index = random_index(&split, seed, DEFAULT_START_ID);
            for (pos, (_, seq)) in index.iter().enumerate() {
                let id: usize = seq.joined().parse::<usize>().unwrap() - 1001;
                seen[pos][id] = true;
            }
        }
        assert!(seen.iter().all(|row| row.iter().all(|&b| b)));
    }

    #[test]
    fn sequential_index_matches_hand_trace() {
        // u1 train [i1,i2,i3] val i4 test i5; u2 train [i2,i6] val i3 test i7.
        let split = split_from("u1 i1 i2 i3 i4 i5\nu2 i2 i6 i3 i7\n");
        let index = sequential_index(&split, DEFAULT_START_ID);
        let expect = [
            ("i1", "1001"),
            ("i2", "1002"),
            ("i3", "1003"),
            ("i6", "1004"),
            ("i4", "1005"),
            ("i5", "1006"),
            ("i7", "1007"),
        ];
        for (raw, id) in expect {
            assert_eq!(index.get(raw).unwrap().joined(), id, "item {raw}");
        }
    }

    #[test]
    fn sequential_index_first_seen_wins() {
        // Every u2 train item already seen in u1's train scan.
        let split = split_from("u1 a b c a b\nu2 b a a b\n");
        let index = sequential_index(&split, 1001);
        assert_eq!(index.get("a").unwrap().joined(), "1001");
        assert_eq!(index.get("b").unwrap().joined(), "1002");
        assert_eq!(index.get("c").unwrap().joined(), "1003");
        assert_eq!(index.len(), 3);
    }

    #[test]
    fn sequential_index_ignores_targets_for_train_ids() {
        // Replacing the val/test targets with brand-new items must not move
        // any train item's ID.
        let before = split_from("u1 a b c d\nu2 c e f g\n");
        let after = split_from("u1 a b n1 n2\nu2 c e n3 n4\n");
        let ib = sequential_index(&before, 1001);
        let ia = sequential_index(&after, 1001);
        for item in ["a", "b", "c", "e"] {
            assert_eq!(ib.get(item).unwrap(), ia.get(item).unwrap(), "item {item}");
        }
    }

    #[test]
    fn reindex_users_is_file_order() {
        let log = parse_interactions("u9 a b\nu1 c d\nu5 e f\n", "d").unwrap();
        let map = reindex_users(&log);
        assert_eq!(map.get("u9"), Some(1));
        assert_eq!(map.get("u1"), Some(2));
        assert_eq!(map.get("u5"), Some(3));
    }

    #[test]
    fn reindex_single_user() {
        let log = parse_interactions("only a b\n", "d").unwrap();
        assert_eq!(reindex_users(&log).get("only"), Some(1));
    }

    #[test]
    fn reindex_follows_line_permutation() {
        let log1 = parse_interactions("u1 a b\nu2 c d\nu3 e f\n", "d").unwrap();
        let log2 = parse_interactions("u3 e f\nu1 a b\nu2 c d\n", "d").unwrap();
        let m1 = reindex_users(&log1);
        let m2 = reindex_users(&log2);
        // Positions permute with the lines.
        assert_eq!(m2.get("u3"), Some(1));
        assert_eq!(m2.get("u1"), Some(2));
        assert_eq!(m1.get("u1"), Some(1));
    }

    #[test]
    fn write_serializes_digit_tokens_concatenated() {
        let mut entries = OrderedMap::new();
        entries.insert("i1".to_string(), TokenSeq::new(vec!["20".into(), "48".into()]));
        let index = ItemIndex::from_entries(entries, IndexMethod::Random, Some(1001));
        let text = write_index_map(&index);
        assert!(text.lines().any(|l| l == "i1 2048"), "got: {text}");
    }

    #[test]
    fn write_serializes_bracket_tokens_self_delimited() {
        let mut entries = OrderedMap::new();
        entries.insert(
            "a".to_string(),
            TokenSeq::new(vec!["⟨CI1⟩".into(), "⟨I2⟩".into()]),
        );
        let index = ItemIndex::from_entries(entries, IndexMethod::Collaborative, None);
        let text = write_index_map(&index);
        assert!(text.lines().any(|l| l == "a ⟨CI1⟩⟨I2⟩"), "got: {text}");
    }

    #[test]
    fn index_map_round_trip() {
        let split = split_from("u1 i1 i2 i3 i4 i5\nu2 i2 i6 i3 i7\n");
        for index in [
            sequential_index(&split, 1001),
            random_index(&split, 3, 1001),
        ] {
            let text = write_index_map(&index);
            assert_eq!(read_index_map(&text).unwrap(), index);
        }
    }

    #[test]
    fn bracket_round_trip() {
        let mut entries = OrderedMap::new();
        entries.insert(
            "a".to_string(),
            TokenSeq::new(vec!["⟨CI1⟩".into(), "⟨I1⟩".into()]),
        );
        entries.insert(
            "b".to_string(),
            TokenSeq::new(vec!["⟨CI1⟩".into(), "⟨I2⟩".into()]),
        );
        let index = ItemIndex::from_entries(entries, IndexMethod::Collaborative, None);
        assert_eq!(read_index_map(&write_index_map(&index)).unwrap(), index);
    }

    #[test]
    fn read_rejects_malformed_lines() {
        assert!(matches!(
            read_index_map("justonefield\n"),
            Err(IndexError::MalformedIndexLine { line: 1 })
        ));
        assert!(matches!(
            read_index_map("a ⟨unclosed\n"),
            Err(IndexError::MalformedIndexLine { line: 1 })
        ));
        assert!(matches!(
            read_index_map("a x!y\n"),
            Err(IndexError::MalformedIndexLine { line: 1 })
        ));
    }

    #[test]
    fn read_rejects_duplicate_raw_ids() {
        assert!(matches!(
            read_index_map("a 1001\na 1002\n"),
            Err(IndexError::DuplicateRawId { line: 2, .. })
        ));
    }

    #[test]
    fn read_rejects_non_bijective_maps() {
        assert!(matches!(
            read_index_map("a 1001\nb 1001\n"),
            Err(IndexError::NonBijectiveMap { .. })
        ));
    }

    #[test]
    fn user_map_round_trip() {
        let log = parse_interactions("alice a b\nbob c d\n", "d").unwrap();
        let map = reindex_users(&log);
        let parsed = read_user_map(&write_user_map(&map)).unwrap();
        assert_eq!(parsed, map);
    }
}
