//! Prompt templates and corpus generation.
//!
//! A template file holds one template per line with four semicolon-separated
//! fields: task, seen/unseen exposure, input template, target template.
//! Placeholders `{dataset}`, `{user_id}`, `{history}` and `{target}` are
//! substituted with per-user data. The dataset name appears in every shipped
//! template so corpora from several datasets can be merged without items
//! leaking across datasets.

use std::collections::HashMap;

use thiserror::Error;

use crate::indexing::{ItemIndex, TokenSeq, UserMap};
use crate::ingest::SplitLog;

/// The shipped template set: 11 sequential and 11 straightforward templates,
/// one of each reserved as unseen for zero-shot evaluation.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.txt");

pub const PLACEHOLDERS: [&str; 4] = ["dataset", "user_id", "history", "target"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template line {line}: expected 4 semicolon-separated fields, found {found}")]
    BadFieldCount { line: usize, found: usize },
    #[error("template line {line}: unknown placeholder {{{name}}}")]
    UnknownPlaceholder { line: usize, name: String },
    #[error("template line {line}: unknown task {value:?}")]
    UnknownTask { line: usize, value: String },
    #[error("template line {line}: unknown exposure {value:?}")]
    UnknownExposure { line: usize, value: String },
    #[error("no binding for placeholder {{{name}}}")]
    UnboundPlaceholder { name: String },
    #[error("item {item:?} has no index entry")]
    MissingIndexEntry { item: String },
    #[error("cannot merge corpora of different phases")]
    MixedPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Sequential,
    Straightforward,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Sequential => "sequential",
            Task::Straightforward => "straightforward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sequential" => Some(Task::Sequential),
            "straightforward" => Some(Task::Straightforward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exposure {
    Seen,
    Unseen,
}

impl Exposure {
    pub fn as_str(self) -> &'static str {
        match self {
            Exposure::Seen => "seen",
            Exposure::Unseen => "unseen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "seen" => Some(Exposure::Seen),
            "unseen" => Some(Exposure::Unseen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Val,
    Test,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Val => "val",
            Phase::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Phase::Train),
            "val" => Some(Phase::Val),
            "test" => Some(Phase::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub task: Task,
    pub exposure: Exposure,
    pub input_template: String,
    pub target_template: String,
    /// Stable per-task label: A1.. for sequential, B1.. for straightforward,
    /// numbered in file order.
    pub template_id: String,
}

/// Per-user data substituted into a template.
#[derive(Debug, Clone)]
pub struct Bindings {
    pub dataset: String,
    pub user_id: u64,
    /// Interaction history; `None` for tasks that do not use one.
    pub history: Option<Vec<TokenSeq>>,
    pub target: TokenSeq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub dataset: String,
    pub task: Task,
    pub template_id: String,
    pub exposure: Exposure,
    pub input_text: String,
    pub target_text: String,
    pub user_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub phase: Phase,
    pub examples: Vec<Example>,
}

/// Parse a template file: one template per non-empty line, four
/// semicolon-separated fields, placeholders validated.
pub fn parse_templates(text: &str) -> Result<Vec<PromptTemplate>, PromptError> {
    let mut templates = Vec::new();
    let mut counts: HashMap<Task, usize> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(';').collect();
        if fields.len() != 4 {
            return Err(PromptError::BadFieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let task = Task::parse(fields[0].trim()).ok_or_else(|| PromptError::UnknownTask {
            line: line_no,
            value: fields[0].trim().to_string(),
        })?;
        let exposure =
            Exposure::parse(fields[1].trim()).ok_or_else(|| PromptError::UnknownExposure {
                line: line_no,
                value: fields[1].trim().to_string(),
            })?;
        for text in [fields[2], fields[3]] {
            for name in placeholder_names(text) {
                let name = name.map_err(|bad| PromptError::UnknownPlaceholder {
                    line: line_no,
                    name: bad,
                })?;
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(PromptError::UnknownPlaceholder { line: line_no, name });
                }
            }
        }
        let counter = counts.entry(task).or_insert(0);
        *counter += 1;
        let prefix = match task {
            Task::Sequential => "A",
            Task::Straightforward => "B",
        };
        templates.push(PromptTemplate {
            task,
            exposure,
            input_template: fields[2].to_string(),
            target_template: fields[3].to_string(),
            template_id: format!("{prefix}{counter}"),
        });
    }
    Ok(templates)
}

/// Extract placeholder names; a malformed `{…` fragment yields `Err(fragment)`.
fn placeholder_names(text: &str) -> Vec<Result<String, String>> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        rest = &rest[open + 1..];
        match rest.find('}') {
            Some(close) => {
                names.push(Ok(rest[..close].to_string()));
                rest = &rest[close + 1..];
            }
            None => {
                names.push(Err(rest.to_string()));
                break;
            }
        }
    }
    names
}

/// Substitute bindings into both halves of a template.
///
/// History items render as their joined token sequences separated by single
/// spaces; the target renders as one joined token sequence.
pub fn render(template: &PromptTemplate, b: &Bindings) -> Result<(String, String), PromptError> {
    let input = substitute(&template.input_template, b)?;
    let target = substitute(&template.target_template, b)?;
    Ok((input, target))
}

fn substitute(text: &str, b: &Bindings) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        rest = &rest[open + 1..];
        let close = rest.find('}').ok_or_else(|| PromptError::UnboundPlaceholder {
            name: rest.to_string(),
        })?;
        let name = &rest[..close];
        match name {
            "dataset" => out.push_str(&b.dataset),
            "user_id" => out.push_str(&b.user_id.to_string()),
            "target" => out.push_str(&b.target.joined()),
            "history" => {
                let history = b
                    .history
                    .as_ref()
                    .ok_or_else(|| PromptError::UnboundPlaceholder {
                        name: name.to_string(),
                    })?;
                let joined: Vec<String> = history.iter().map(TokenSeq::joined).collect();
                out.push_str(&joined.join(" "));
            }
            other => {
                return Err(PromptError::UnboundPlaceholder {
                    name: other.to_string(),
                });
            }
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Build the corpus for one (task, phase) over every retained user.
///
/// Train examples use the train history minus its final item as input and
/// that final item as target, so validation and test targets stay unseen
/// during training. Validation examples see the full train history and
/// predict the validation target; test examples additionally append the
/// validation target to the history and predict the test target. Train
/// corpora contain only seen templates; validation and test corpora keep both
/// exposures, flagged. Histories are capped to their most recent
/// `history_cap` items.
pub fn build_corpus(
    split: &SplitLog,
    index: &ItemIndex,
    users: &UserMap,
    templates: &[PromptTemplate],
    task: Task,
    phase: Phase,
    history_cap: usize,
) -> Result<Corpus, PromptError> {
    let selected: Vec<&PromptTemplate> = templates
        .iter()
        .filter(|t| t.task == task && (phase != Phase::Train || t.exposure == Exposure::Seen))
        .collect();

    let lookup = |item: &str| -> Result<TokenSeq, PromptError> {
        index
            .get(item)
            .cloned()
            .ok_or_else(|| PromptError::MissingIndexEntry {
                item: item.to_string(),
            })
    };

    let mut examples = Vec::with_capacity(split.users.len() * selected.len());
    for user in &split.users {
        let user_index = users
            .get(&user.raw_user_id)
            .expect("user map covers every split user");
        let (history_items, target_item): (Vec<&String>, &String) = match phase {
            Phase::Train => {
                let n = user.train_history.len();
                (
                    user.train_history[..n - 1].iter().collect(),
                    &user.train_history[n - 1],
                )
            }
            Phase::Val => (user.train_history.iter().collect(), &user.val_target),
            Phase::Test => (
                user.train_history
                    .iter()
                    .chain(std::iter::once(&user.val_target))
                    .collect(),
                &user.test_target,
            ),
        };
        let capped = &history_items[history_items.len().saturating_sub(history_cap)..];
        let history = if task == Task::Sequential {
            Some(
                capped
                    .iter()
                    .map(|item| lookup(item))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let bindings = Bindings {
            dataset: split.dataset_name.clone(),
            user_id: user_index,
            history,
            target: lookup(target_item)?,
        };
        for template in &selected {
            let (input_text, target_text) = render(template, &bindings)?;
            examples.push(Example {
                dataset: split.dataset_name.clone(),
                task,
                template_id: template.template_id.clone(),
                exposure: template.exposure,
                input_text,
                target_text,
                user_index,
            });
        }
    }
    Ok(Corpus { phase, examples })
}

/// Concatenate same-phase corpora from several datasets, preserving
/// per-dataset order. An empty list merges to an empty train corpus.
pub fn merge_sp5(corpora: &[Corpus]) -> Result<Corpus, PromptError> {
    let Some(first) = corpora.first() else {
        return Ok(Corpus {
            phase: Phase::Train,
            examples: Vec::new(),
        });
    };
    if corpora.iter().any(|c| c.phase != first.phase) {
        return Err(PromptError::MixedPhase);
    }
    Ok(Corpus {
        phase: first.phase,
        examples: corpora.iter().flat_map(|c| c.examples.clone()).collect(),
    })
}

/// Serialize a corpus: a metadata line, then one tab-separated record per
/// example (dataset, task, template_id, exposure, input, target).
pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = format!("# corpus phase={}\n", corpus.phase.as_str());
    for ex in &corpus.examples {
        for field in [&ex.dataset, &ex.input_text, &ex.target_text] {
            assert!(
                !field.contains('\t') && !field.contains('\n'),
                "corpus fields must not contain tabs or newlines"
            );
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            ex.dataset,
            ex.task.as_str(),
            ex.template_id,
            ex.exposure.as_str(),
            ex.input_text,
            ex.target_text
        ));
    }
    out
}

/// Parse the serialized corpus format. The phase is read from the metadata
/// line when present (defaulting to train); user indices are not persisted
/// and are rebuilt as line order.
pub fn read_corpus(text: &str) -> Result<Corpus, PromptError> {
    let mut phase = Phase::Train;
    let mut examples = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for field in meta.split_whitespace() {
                if let Some(p) = field.strip_prefix("phase=") {
                    if let Some(parsed) = Phase::parse(p) {
                        phase = parsed;
                    }
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(PromptError::BadFieldCount {
                line: line_no,
                found: fields.len(),
            });
        }
        let task = Task::parse(fields[1]).ok_or_else(|| PromptError::UnknownTask {
            line: line_no,
            value: fields[1].to_string(),
        })?;
        let exposure = Exposure::parse(fields[3]).ok_or_else(|| PromptError::UnknownExposure {
            line: line_no,
            value: fields[3].to_string(),
        })?;
        examples.push(Example {
            dataset: fields[0].to_string(),
            task,
            template_id: fields[2].to_string(),
            exposure,
            input_text: fields[4].to_string(),
            target_text: fields[5].to_string(),
            user_index: examples.len() as u64 + 1,
        });
    }
    Ok(Corpus { phase, examples })
}
