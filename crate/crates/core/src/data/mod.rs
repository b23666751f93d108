//! bAbi task files: parsing, vocabulary, splits and padded batches.

mod batch;
mod parse;
pub mod synth;
mod vocab;

pub use batch::{batchify, Batch, BatchSampler};
pub use parse::{parse_babi_file, parse_babi_str, tokenize};
pub use vocab::{Vocabulary, EOS, GO, PAD, RESERVED, UNK};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One question over a story.
///
/// `T` is the token type: `String` straight out of the parser, `usize` once
/// encoded against a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example<T = usize> {
    /// Statements of the story preceding the question, in order.
    pub story: Vec<Vec<T>>,
    /// Original line number of each story sentence.
    pub lines: Vec<usize>,
    pub question: Vec<T>,
    /// Answer tokens; comma-separated answers become several tokens.
    pub answer: Vec<T>,
    /// Indices into `story` of the supporting facts.
    pub supporting: Vec<usize>,
}

impl Example<String> {
    /// Lowercased text of the example, one sentence per line, question last
    /// followed by a tab and the comma-joined answer.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.story {
            out.push_str(&s.join(" "));
            out.push('\n');
        }
        out.push_str(&self.question.join(" "));
        out.push('\t');
        out.push_str(&self.answer.join(","));
        out
    }
}

impl<T> Example<T> {
    pub fn num_sentences(&self) -> usize {
        self.story.len()
    }

    pub fn max_sentence_len(&self) -> usize {
        self.story.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Split in file order: the first 9,000 examples train, the remaining 1,000
/// validate. Smaller inputs fall back to a 90/10 split.
pub fn split_train_val<T: Clone>(examples: &[Example<T>]) -> (Vec<Example<T>>, Vec<Example<T>>) {
    let n = examples.len();
    let cut = if n >= 10_000 {
        9_000
    } else {
        eprintln!("warning: {n} examples (< 10000), using a proportional 90/10 split");
        n * 9 / 10
    };
    (examples[..cut].to_vec(), examples[cut..].to_vec())
}

/// Which file of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
}

/// Short names of the twenty tasks, in task-id order.
pub const TASK_NAMES: [&str; 20] = [
    "single-supporting-fact",
    "two-supporting-facts",
    "three-supporting-facts",
    "two-arg-relations",
    "three-arg-relations",
    "yes-no-questions",
    "counting",
    "lists-sets",
    "simple-negation",
    "indefinite-knowledge",
    "basic-coreference",
    "conjunction",
    "compound-coreference",
    "time-reasoning",
    "basic-deduction",
    "basic-induction",
    "positional-reasoning",
    "size-reasoning",
    "path-finding",
    "agents-motivations",
];

pub fn check_task(task: usize) -> Result<()> {
    if !(1..=20).contains(&task) {
        return Err(Error::Config(format!("task id {task} not in 1..=20")));
    }
    Ok(())
}

/// Canonical file name, e.g. `qa1_single-supporting-fact_train.txt`.
pub fn task_file_name(task: usize, part: Part) -> Result<String> {
    check_task(task)?;
    let suffix = match part {
        Part::Train => "train",
        Part::Test => "test",
    };
    Ok(format!("qa{task}_{}_{suffix}.txt", TASK_NAMES[task - 1]))
}

/// Locate a task file in `dir` or its `en-10k/` subdirectory. Any file named
/// `qa{task}_*_{train|test}.txt` is accepted.
pub fn find_task_file(dir: &Path, task: usize, part: Part) -> Result<PathBuf> {
    let canonical = task_file_name(task, part)?;
    let suffix = match part {
        Part::Train => "_train.txt",
        Part::Test => "_test.txt",
    };
    let prefix = format!("qa{task}_");
    let candidates = [dir.to_path_buf(), dir.join("en-10k")];
    for d in &candidates {
        let exact = d.join(&canonical);
        if exact.is_file() {
            return Ok(exact);
        }
        if let Ok(entries) = std::fs::read_dir(d) {
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(suffix))
                })
                .collect();
            found.sort();
            if let Some(p) = found.into_iter().next() {
                return Ok(p);
            }
        }
    }
    Err(Error::MissingFiles(
        candidates.iter().map(|d| d.join(&canonical)).collect(),
    ))
}

/// Parsed train/validation/test examples of one task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task: usize,
    pub train: Vec<Example<String>>,
    pub val: Vec<Example<String>>,
    pub test: Vec<Example<String>>,
}

impl TaskData {
    /// Read both files of a task and split the training file.
    pub fn load(dir: &Path, task: usize) -> Result<Self> {
        let train_path = find_task_file(dir, task, Part::Train);
        let test_path = find_task_file(dir, task, Part::Test);
        let (train_path, test_path) = match (train_path, test_path) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(Error::MissingFiles(mut a)), Err(Error::MissingFiles(b))) => {
                a.extend(b);
                return Err(Error::MissingFiles(a));
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let all = parse_babi_file(&train_path)?;
        let (train, val) = split_train_val(&all);
        let test = parse_babi_file(&test_path)?;
        Ok(Self {
            task,
            train,
            val,
            test,
        })
    }

    /// Vocabulary over the training file (train ∪ val).
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::build(self.train.iter().chain(&self.val))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy(n: usize) -> Vec<Example<String>> {
        (0..n)
            .map(|i| Example {
                story: vec![vec![format!("s{i}")]],
                lines: vec![1],
                question: vec!["q".into()],
                answer: vec!["a".into()],
                supporting: vec![0],
            })
            .collect()
    }

    #[test]
    fn split_sizes() {
        let (t, v) = split_train_val(&dummy(10_000));
        assert_eq!((t.len(), v.len()), (9_000, 1_000));
        let all = dummy(10);
        let (t, v) = split_train_val(&all);
        assert_eq!((t.len(), v.len()), (9, 1));
        let joined: Vec<_> = t.into_iter().chain(v).collect();
        assert_eq!(joined, all);
    }

    #[test]
    fn file_names() {
        assert_eq!(
            task_file_name(1, Part::Train).unwrap(),
            "qa1_single-supporting-fact_train.txt"
        );
        assert_eq!(
            task_file_name(20, Part::Test).unwrap(),
            "qa20_agents-motivations_test.txt"
        );
        assert!(task_file_name(21, Part::Test).is_err());
        assert!(task_file_name(0, Part::Test).is_err());
    }

    #[test]
    fn missing_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        match TaskData::load(dir.path(), 3) {
            Err(Error::MissingFiles(paths)) => {
                assert!(paths
                    .iter()
                    .any(|p| p.ends_with("qa3_three-supporting-facts_train.txt")));
                assert!(paths
                    .iter()
                    .any(|p| p.ends_with("qa3_three-supporting-facts_test.txt")));
            }
            other => panic!("{other:?}"),
        }
    }
}
