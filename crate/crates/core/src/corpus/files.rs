use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::parse::{parse_task_file, Story};
use crate::error::{Error, Result};

/// Environment variable consulted when no data root is given explicitly.
pub const DATA_ROOT_ENV: &str = "BABI_ROOT";

/// Parsed train and test splits of one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskData {
    pub task: u8,
    pub train: Vec<Story>,
    pub test: Vec<Story>,
}

impl TaskData {
    pub fn train_question_count(&self) -> usize {
        self.train.iter().map(|s| s.qas.len()).sum()
    }

    pub fn test_question_count(&self) -> usize {
        self.test.iter().map(|s| s.qas.len()).sum()
    }
}

/// Data root from an explicit value, falling back to `$BABI_ROOT`.
pub fn resolve_data_root(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
}

/// Locates `qa<N>_*_train.txt` and `qa<N>_*_test.txt` under `<root>/en` (or `root` itself).
pub fn task_files(root: &Path, task: u8) -> Result<(PathBuf, PathBuf)> {
    if !(1..=20).contains(&task) {
        return Err(Error::config(format!("task must be in 1..=20, got {task}")));
    }
    let dir = if root.join("en").is_dir() { root.join("en") } else { root.to_path_buf() };
    let prefix = format!("qa{task}_");
    let mut train = None;
    let mut test = None;
    let mut names: Vec<_> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(&prefix))
        .collect();
    names.sort();
    for name in names {
        if name.ends_with("_train.txt") {
            train.get_or_insert(dir.join(&name));
        } else if name.ends_with("_test.txt") {
            test.get_or_insert(dir.join(&name));
        }
    }
    match (train, test) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Io(io::Error::new(
            io::ErrorKind::NotFound,
            format!("no {prefix}*_train.txt / {prefix}*_test.txt pair in {}", dir.display()),
        ))),
    }
}

pub fn load_task(root: &Path, task: u8) -> Result<TaskData> {
    let (train_path, test_path) = task_files(root, task)?;
    Ok(TaskData {
        task,
        train: parse_task_file(&fs::read_to_string(train_path)?)?,
        test: parse_task_file(&fs::read_to_string(test_path)?)?,
    })
}
