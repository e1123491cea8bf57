//! Finite-difference checks of each differentiable component on small,
//! fixed-size instances.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gradient_check_report, GradCheckReport};
use crate::corpus::{EncodedSample, TokenId};
use crate::encoder::{encode_question, GruParams};
use crate::error::Result;
use crate::model::{forward, init_params, loss, Architecture, ModelConfig};
use crate::params::{uniform, ParamKind, ParameterStore};
use crate::scoring::{init_scorer, GateScorer, ScorerDims, ScorerKind, GATE_PREFIX};

/// Central-difference step.
pub const GRADCHECK_EPS: f64 = 1e-4;
/// Largest acceptable relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

const WIDTH: usize = 4;
const SLICES: usize = 3;
const VOCAB: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradCheckTarget {
    /// A gate scorer alone, with its three inputs trainable.
    Scorer(ScorerKind),
    /// A GRU unrolled over five tokens.
    Gru,
    /// Full episodic forward plus loss with the given scorer.
    Episodic(ScorerKind),
    /// Full memory-network forward plus loss, tied and untied.
    MemN2N,
}

impl fmt::Display for GradCheckTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradCheckTarget::Scorer(k) => write!(f, "scorer {k}"),
            GradCheckTarget::Gru => f.write_str("gru"),
            GradCheckTarget::Episodic(k) => write!(f, "episodic model ({k})"),
            GradCheckTarget::MemN2N => f.write_str("memn2n"),
        }
    }
}

impl GradCheckTarget {
    /// Every component: four scorers, the GRU, four episodic variants, memn2n.
    pub fn all() -> Vec<GradCheckTarget> {
        let mut out: Vec<_> = ScorerKind::ALL.into_iter().map(GradCheckTarget::Scorer).collect();
        out.push(GradCheckTarget::Gru);
        out.extend(ScorerKind::ALL.into_iter().map(GradCheckTarget::Episodic));
        out.push(GradCheckTarget::MemN2N);
        out
    }
}

fn randomize_biases(store: &mut ParameterStore, rng: &mut ChaCha8Rng) {
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in names {
        if store.kind(&name) == Some(ParamKind::Bias) {
            let shape = store.get(&name).expect("listed").shape().to_vec();
            store.insert(name, ParamKind::Bias, uniform(rng, &shape, 0.3));
        }
    }
}

/// Two facts, a two-word question, vocabulary of ten.
fn toy_sample() -> EncodedSample {
    let ids = |v: &[u32]| v.iter().map(|&i| TokenId(i)).collect::<Vec<_>>();
    EncodedSample {
        input_ids: ids(&[2, 3, 4, 1, 5, 3, 6, 1]),
        eos_positions: vec![3, 7],
        question_ids: ids(&[7, 2]),
        answer_id: TokenId(6),
        supporting_facts: vec![1],
    }
}

fn toy_config(model: Architecture, scorer: ScorerKind) -> ModelConfig {
    ModelConfig {
        model,
        scorer,
        hidden: WIDTH,
        slices: SLICES,
        hops: 2,
        embed: WIDTH,
        gate_hidden: SLICES,
        ..ModelConfig::default()
    }
}

fn check_model(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let mut store = init_params(cfg, VOCAB)?;
    randomize_biases(&mut store, rng);
    let sample = toy_sample();
    gradient_check_report(
        |g, s| {
            let out = forward(g, &sample, s, cfg, None)?;
            loss(g, out.logits, sample.answer_id.index(), s, cfg.l2)
        },
        &store,
        GRADCHECK_EPS,
    )
}

fn worse(a: GradCheckReport, b: GradCheckReport) -> GradCheckReport {
    let entries = a.entries_checked + b.entries_checked;
    let mut w = if b.max_relative_error > a.max_relative_error { b } else { a };
    w.entries_checked = entries;
    w
}

/// Runs the check for `target`; `seed` fixes the random instance.
pub fn check_component(target: GradCheckTarget, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match target {
        GradCheckTarget::Scorer(kind) => {
            let mut store = ParameterStore::new();
            let dims = ScorerDims { hidden: WIDTH, slices: SLICES, gate_hidden: SLICES };
            init_scorer(&mut store, GATE_PREFIX, kind, dims, &mut rng);
            randomize_biases(&mut store, &mut rng);
            for name in ["c", "m", "q"] {
                store.insert(format!("input.{name}"), ParamKind::Weight, uniform(&mut rng, &[WIDTH], 1.0));
            }
            gradient_check_report(
                |g, s| {
                    let scorer = GateScorer::bind(g, s, GATE_PREFIX, kind)?;
                    let (c, m, q) = (s.bind(g, "input.c")?, s.bind(g, "input.m")?, s.bind(g, "input.q")?);
                    scorer.score(g, c, m, q)
                },
                &store,
                GRADCHECK_EPS,
            )
        }
        GradCheckTarget::Gru => {
            let mut store = ParameterStore::new();
            GruParams::init(&mut store, "gru", 3, WIDTH, &mut rng);
            randomize_biases(&mut store, &mut rng);
            store.insert("embedding", ParamKind::Embedding, uniform(&mut rng, &[8, 3], 1.0));
            let readout = uniform(&mut rng, &[WIDTH], 1.0);
            let tokens: Vec<TokenId> = [2, 5, 3, 7, 4].into_iter().map(TokenId).collect();
            gradient_check_report(
                |g, s| {
                    let p = GruParams::bind(g, s, "gru")?;
                    let h = encode_question(g, &tokens, s.bind(g, "embedding")?, &p)?;
                    let y = g.mul(h, g.constant(readout.clone()))?;
                    g.sum(y)
                },
                &store,
                GRADCHECK_EPS,
            )
        }
        GradCheckTarget::Episodic(kind) => {
            let model = if kind == ScorerKind::Dmn { Architecture::Dmn } else { Architecture::Dmtn };
            check_model(&toy_config(model, kind), &mut rng)
        }
        GradCheckTarget::MemN2N => {
            let tied = check_model(&toy_config(Architecture::Memn2n, ScorerKind::Dmn), &mut rng)?;
            let untied = check_model(
                &ModelConfig { tied: false, ..toy_config(Architecture::Memn2n, ScorerKind::Dmn) },
                &mut rng,
            )?;
            Ok(worse(tied, untied))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_sample_has_two_facts() {
        assert_eq!(toy_sample().fact_count(), 2);
    }
}
