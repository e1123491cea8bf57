//! Trains every gate on one task with identical settings and reports test
//! accuracy. Reads `BABI_ROOT` when set, else generated task-1 stories.
//!
//! BABI_ROOT=/data/tasks_1-20_v1-2 cargo run --release --example compare_gates -- 4 20

use dmtn::corpus::{parse_task_file, resolve_data_root, synthetic};
use dmtn::harness::{evaluate, prepare_stories, prepare_task, train};
use dmtn::model::{Architecture, ModelConfig};
use dmtn::scoring::ScorerKind;

fn main() -> dmtn::Result<()> {
    let mut args = std::env::args().skip(1);
    let task_id: u8 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let task = match resolve_data_root(None) {
        Some(root) => prepare_task(&root, task_id)?,
        None => {
            eprintln!("BABI_ROOT unset; using generated task-1 stories");
            let train = parse_task_file(&synthetic::single_supporting_fact(60, 1))?;
            let test = parse_task_file(&synthetic::single_supporting_fact(40, 2))?;
            prepare_stories(1, &train, &test)?
        }
    };
    for scorer in ScorerKind::ALL {
        let model = if scorer == ScorerKind::Dmn { Architecture::Dmn } else { Architecture::Dmtn };
        let cfg = ModelConfig {
            model,
            scorer,
            hidden: 20,
            slices: 10,
            embed: 20,
            lr: 0.003,
            epochs,
            seed: 1,
            ..ModelConfig::default()
        };
        let out = train(&cfg, &task.train, task.vocab.len())?;
        let report = evaluate(&out.params, &cfg, &task.test, task.task)?;
        println!("task {} {scorer:>5}: {}", task.task, report.to_json());
    }
    Ok(())
}
