//! Property tests for item indexing.

mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forge_core::collab::{collaborative_index, CollabConfig};
use forge_core::indexing::{
    random_index, read_index_map, sequential_index, tokenize_number, write_index_map, ItemIndex,
};
use forge_core::ingest::SplitLog;

proptest! {
    #[test]
    fn tokenize_concatenation_is_the_inverse(id in "[1-9][0-9]{0,8}") {
        let seq = tokenize_number(&id).unwrap();
        prop_assert_eq!(seq.joined(), id.clone());
        for token in seq.tokens() {
            prop_assert!((1..=2).contains(&token.len()));
            prop_assert!(token.bytes().all(|b| b.is_ascii_digit()));
        }
        // Every token except the last has exactly two digits.
        for token in &seq.tokens()[..seq.tokens().len() - 1] {
            prop_assert_eq!(token.len(), 2);
        }
    }

    #[test]
    fn index_file_round_trip(seed in 0u64..200) {
        let split = common::random_split(seed, 6, 25, 3, 9);
        let index = random_index(&split, seed, 1001);
        let parsed = read_index_map(&write_index_map(&index)).unwrap();
        prop_assert_eq!(parsed, index);
    }
}

fn assert_covers(index: &ItemIndex, split: &SplitLog) {
    let items = split.items_in_first_appearance_order();
    assert_eq!(index.len(), items.len());
    for item in &items {
        assert!(index.contains(item), "missing entry for {item}");
    }
    index.check_bijective().unwrap();
}

#[test]
fn all_three_methods_are_bijective_and_complete() {
    for seed in 0..120u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = rng.random_range(2..10);
        let pool = rng.random_range(4..60);
        let split = common::random_split(seed.wrapping_add(1000), users, pool, 3, 12);
        assert_covers(&random_index(&split, seed, 1001), &split);
        assert_covers(&sequential_index(&split, 1001), &split);
        let cfg = CollabConfig::new(
            rng.random_range(2..5),
            rng.random_range(2..6),
            seed,
        );
        let (collab, _) = collaborative_index::<f64>(&split, &cfg).unwrap();
        assert_covers(&collab, &split);
    }
}

#[test]
fn sequential_ids_ignore_val_and_test_targets() {
    // Replacing every val/test target with a brand-new item never moves a
    // train item's ID.
    for seed in 0..60u64 {
        let split = common::random_split(seed, 6, 30, 3, 10);
        let base = sequential_index(&split, 1001);
        let mut perturbed = split.clone();
        for (i, user) in perturbed.users.iter_mut().enumerate() {
            user.val_target = format!("fresh_val_{i}");
            user.test_target = format!("fresh_test_{i}");
        }
        let moved = sequential_index(&perturbed, 1001);
        let train_items: HashSet<&String> = split
            .users
            .iter()
            .flat_map(|u| u.train_history.iter())
            .collect();
        for item in train_items {
            assert_eq!(
                base.get(item),
                moved.get(item),
                "train item {item} moved (seed {seed})"
            );
        }
    }
}
