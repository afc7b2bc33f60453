//! Shared generators for the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forge_core::ingest::{parse_interactions, split_leave_one_out, InteractionLog, SplitLog};

/// Random interaction text: `users` lines, item IDs drawn from a pool of
/// `pool` items, history lengths in `min_len..=max_len`.
pub fn random_log_text(
    rng: &mut ChaCha8Rng,
    users: usize,
    pool: usize,
    min_len: usize,
    max_len: usize,
) -> String {
    let mut text = String::new();
    for u in 0..users {
        text.push_str(&format!("u{u}"));
        let len = rng.random_range(min_len..=max_len);
        for _ in 0..len {
            text.push_str(&format!(" i{}", rng.random_range(0..pool)));
        }
        text.push('\n');
    }
    text
}

pub fn random_log(seed: u64, users: usize, pool: usize, min_len: usize, max_len: usize) -> InteractionLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = random_log_text(&mut rng, users, pool, min_len, max_len);
    parse_interactions(&text, "synth").expect("generated log parses")
}

pub fn random_split(seed: u64, users: usize, pool: usize, min_len: usize, max_len: usize) -> SplitLog {
    split_leave_one_out(&random_log(seed, users, pool, min_len.max(3), max_len.max(3)))
        .expect("generated log splits")
}
