//! Optimizer, training loop, evaluation, persistence and trace export.

mod adam;
mod checkpoint;
mod eval;
mod gradcheck;
mod trace;
mod train;

use std::path::Path;

use crate::corpus::{build_vocabulary, encode_stories, load_task, EncodedSample, Story, Vocabulary};
use crate::error::Result;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC,
};
pub use eval::{evaluate, predict, EvalReport, PASS_ACCURACY};
pub use gradcheck::{check_component, GradCheckTarget, GRADCHECK_EPS, GRADCHECK_TOLERANCE};
pub use trace::{export_gate_trace, render_gate_trace, TRACE_MARGIN};
pub use train::{clip_global_norm, corpus_loss, train, train_from, EpochLog, TrainOutcome};

/// Encoded train and test splits with their shared vocabulary.
#[derive(Clone, Debug)]
pub struct PreparedTask {
    pub task: u8,
    pub vocab: Vocabulary,
    pub train: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

/// Builds the vocabulary over both splits and encodes every question.
pub fn prepare_stories(task: u8, train: &[Story], test: &[Story]) -> Result<PreparedTask> {
    let vocab = build_vocabulary(train, test);
    Ok(PreparedTask { task, train: encode_stories(train, &vocab)?, test: encode_stories(test, &vocab)?, vocab })
}

/// Loads and encodes task `task` from a bAbI root directory.
pub fn prepare_task(root: &Path, task: u8) -> Result<PreparedTask> {
    let data = load_task(root, task)?;
    prepare_stories(task, &data.train, &data.test)
}
