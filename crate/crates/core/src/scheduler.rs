//! Task- and dataset-homogeneous batch planning.
//!
//! Examples are grouped by (dataset, task). Each group is shuffled with the
//! seed and chunked into batches (the final partial batch is kept). Groups
//! alternate round-robin in lexicographic (dataset, task) order; a group that
//! exhausts its epoch restarts from a reshuffled one, and the plan ends when
//! the largest group completes its first epoch.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::prompts::{Corpus, Task};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("no examples to plan batches over")]
    EmptyPlan,
    #[error("plan line {line}: expected `dataset<TAB>task<TAB>indices`")]
    MalformedPlanLine { line: usize },
}

/// One task-homogeneous batch referencing examples of a corpus by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub dataset: String,
    pub task: Task,
    pub example_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batches: Vec<Batch>,
    pub batch_size: usize,
    pub seed: u64,
}

struct GroupState {
    dataset: String,
    task: Task,
    indices: Vec<usize>,
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
}

impl GroupState {
    fn reshuffle(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, &self.dataset, self.task, self.epoch));
        self.order = self.indices.clone();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
        self.epoch += 1;
    }

    fn batches_per_epoch(&self, batch_size: usize) -> usize {
        self.indices.len().div_ceil(batch_size)
    }

    fn next_batch(&mut self, batch_size: usize, seed: u64) -> Batch {
        if self.cursor >= self.order.len() {
            self.reshuffle(seed);
        }
        let end = (self.cursor + batch_size).min(self.order.len());
        let batch = Batch {
            dataset: self.dataset.clone(),
            task: self.task,
            example_indices: self.order[self.cursor..end].to_vec(),
        };
        self.cursor = end;
        batch
    }
}

fn epoch_seed(seed: u64, dataset: &str, task: Task, epoch: u64) -> u64 {
    // FNV-1a keeps the derivation platform-independent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in dataset.bytes() {
        mix(b);
    }
    mix(0xfe);
    for b in task.as_str().bytes() {
        mix(b);
    }
    for b in epoch.to_le_bytes() {
        mix(b);
    }
    h ^ seed
}

/// Plan batches over a (possibly multi-dataset) corpus.
pub fn plan_batches(corpus: &Corpus, batch_size: usize, seed: u64) -> Result<BatchPlan, SchedulerError> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut grouped: BTreeMap<(String, Task), Vec<usize>> = BTreeMap::new();
    for (idx, ex) in corpus.examples.iter().enumerate() {
        grouped
            .entry((ex.dataset.clone(), ex.task))
            .or_default()
            .push(idx);
    }
    if grouped.is_empty() {
        return Err(SchedulerError::EmptyPlan);
    }
    let mut groups: Vec<GroupState> = grouped
        .into_iter()
        .map(|((dataset, task), indices)| {
            let mut state = GroupState {
                dataset,
                task,
                indices,
                order: Vec::new(),
                cursor: 0,
                epoch: 0,
            };
            state.reshuffle(seed);
            state
        })
        .collect();

    let rounds = groups
        .iter()
        .map(|g| g.batches_per_epoch(batch_size))
        .max()
        .expect("at least one group");
    let mut batches = Vec::with_capacity(rounds * groups.len());
    for _ in 0..rounds {
        for group in &mut groups {
            batches.push(group.next_batch(batch_size, seed));
        }
    }
    Ok(BatchPlan {
        batches,
        batch_size,
        seed,
    })
}

/// Serialize: a metadata line, then `dataset<TAB>task<TAB>i,j,k` per batch.
pub fn write_plan(plan: &BatchPlan) -> String {
    let mut out = format!("# plan batch_size={} seed={}\n", plan.batch_size, plan.seed);
    for batch in &plan.batches {
        let indices: Vec<String> = batch.example_indices.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            batch.dataset,
            batch.task.as_str(),
            indices.join(",")
        ));
    }
    out
}

/// Parse the serialized plan format.
pub fn read_plan(text: &str) -> Result<BatchPlan, SchedulerError> {
    let mut batch_size = 1;
    let mut seed = 0;
    let mut batches = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                if let Some(v) = field.strip_prefix("batch_size=") {
                    batch_size = v.parse().unwrap_or(batch_size);
                } else if let Some(v) = field.strip_prefix("seed=") {
                    seed = v.parse().unwrap_or(seed);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || SchedulerError::MalformedPlanLine { line: line_no };
        if fields.len() != 3 {
            return Err(bad());
        }
        let task = Task::parse(fields[1]).ok_or_else(bad)?;
        let example_indices = fields[2]
            .split(',')
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        batches.push(Batch {
            dataset: fields[0].to_string(),
            task,
            example_indices,
        });
    }
    Ok(BatchPlan {
        batches,
        batch_size,
        seed,
    })
}
