//! Writes a task-1 style data root built from the in-repo story generator.
//!
//! cargo run --example synthetic_babi -- /tmp/babi 200

use std::path::PathBuf;

use dmtn::corpus::{load_task, synthetic};

fn main() -> dmtn::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "babi-synthetic".into()));
    let stories: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let (train, test) = synthetic::write_task_root(&root, stories, 1)?;
    let data = load_task(&root, 1)?;
    println!("{} ({} questions)", train.display(), data.train_question_count());
    println!("{} ({} questions)", test.display(), data.test_question_count());
    Ok(())
}
