//! Trains each gate on a handful of generated task-1 questions until it
//! memorizes them.

use dmtn::corpus::{parse_task_file, synthetic};
use dmtn::harness::{corpus_loss, prepare_stories, train_from};
use dmtn::model::{init_params, Architecture, ModelConfig};
use dmtn::scoring::ScorerKind;

fn main() -> dmtn::Result<()> {
    let stories = parse_task_file(&synthetic::single_supporting_fact(4, 11))?;
    let task = prepare_stories(1, &stories, &[])?;
    let samples = &task.train[..8];
    for scorer in ScorerKind::ALL {
        let model = if scorer == ScorerKind::Dmn { Architecture::Dmn } else { Architecture::Dmtn };
        let cfg = ModelConfig {
            model,
            scorer,
            hidden: 20,
            slices: 10,
            embed: 20,
            gate_hidden: 20,
            lr: 0.003,
            batch: 8,
            epochs: 300,
            seed: 1,
            ..ModelConfig::default()
        };
        let params = init_params(&cfg, task.vocab.len())?;
        let out = train_from(&cfg, params, samples, |e| {
            if e.epoch % 100 == 0 {
                println!("{scorer:>5} step {:>3}  loss {:.4}  accuracy {:.0}%", e.step, e.loss, e.accuracy);
            }
        })?;
        let (loss, acc) = corpus_loss(&out.params, &cfg, samples)?;
        println!("{scorer:>5} final loss {loss:.4}, accuracy {acc:.0}%\n");
    }
    Ok(())
}
