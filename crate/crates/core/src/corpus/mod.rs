//! bAbI ingestion: parsing, vocabulary, and sample encoding.

mod encode;
mod files;
mod parse;
pub mod synthetic;
mod vocab;

pub use encode::{encode_sample, encode_stories, EncodedSample};
pub use files::{load_task, resolve_data_root, task_files, TaskData, DATA_ROOT_ENV};
pub use parse::{parse_task_file, tokenize, QaSample, Sentence, Story};
pub use vocab::{build_vocabulary, TokenId, Vocabulary, EOS_TOKEN, PAD_TOKEN};
