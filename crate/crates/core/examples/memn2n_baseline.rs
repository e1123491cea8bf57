//! The end-to-end memory network baseline next to a tensor-gated model on the
//! same generated data.

use dmtn::corpus::{parse_task_file, synthetic};
use dmtn::harness::{evaluate, prepare_stories, train};
use dmtn::model::{Architecture, ModelConfig};

fn main() -> dmtn::Result<()> {
    let train_stories = parse_task_file(&synthetic::single_supporting_fact(40, 5))?;
    let test_stories = parse_task_file(&synthetic::single_supporting_fact(20, 6))?;
    let task = prepare_stories(1, &train_stories, &test_stories)?;
    let configs = [
        ModelConfig { embed: 20, lr: 0.01, epochs: 60, seed: 2, ..ModelConfig::for_model(Architecture::Memn2n) },
        ModelConfig {
            embed: 20,
            lr: 0.01,
            epochs: 60,
            seed: 2,
            tied: false,
            ..ModelConfig::for_model(Architecture::Memn2n)
        },
        ModelConfig { hidden: 20, slices: 10, embed: 20, lr: 0.003, epochs: 60, seed: 2, ..ModelConfig::default() },
    ];
    for cfg in configs {
        let out = train(&cfg, &task.train, task.vocab.len())?;
        let report = evaluate(&out.params, &cfg, &task.test, 1)?;
        let last = out.log.last().expect("epochs > 0");
        println!(
            "{:<7} tied={:<5} hops={}  train loss {:.3}  test accuracy {:.1}%",
            cfg.model.to_string(),
            cfg.tied,
            cfg.hops,
            last.loss,
            report.accuracy
        );
    }
    Ok(())
}
