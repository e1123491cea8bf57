//! Trains briefly on generated stories and prints the hop-by-fact gate table
//! for one test question.
//!
//! cargo run --release --example gate_trace -- trace.csv

use std::path::PathBuf;

use dmtn::corpus::{parse_task_file, synthetic};
use dmtn::harness::{export_gate_trace, prepare_stories, train};
use dmtn::model::ModelConfig;

fn main() -> dmtn::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gate_trace.csv".into()));
    let train_stories = parse_task_file(&synthetic::single_supporting_fact(20, 1))?;
    let test_stories = parse_task_file(&synthetic::single_supporting_fact(2, 2))?;
    let task = prepare_stories(1, &train_stories, &test_stories)?;
    let cfg =
        ModelConfig { hidden: 20, slices: 10, embed: 20, lr: 0.003, epochs: 40, seed: 3, ..ModelConfig::default() };
    let trained = train(&cfg, &task.train, task.vocab.len())?;
    let trace = export_gate_trace(&trained.params, &cfg, &task.vocab, &task.test[4], &out)?;
    print!("{}", std::fs::read_to_string(&out)?);
    eprintln!("{} hops x {} facts written to {}", trace.hops(), trace.facts(), out.display());
    Ok(())
}
