use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::corpus::EncodedSample;
use crate::encoder::{encode_input, encode_question, gru_cell, zero_state, GruParams};
use crate::error::{Error, Result};
use crate::params::{uniform, xavier, zeros, ParamKind, ParameterStore};
use crate::scoring::{init_scorer, GateScorer, PreparedMemory, ScorerDims, GATE_PREFIX};

use super::config::ModelConfig;
use super::trace::GateTrace;

pub const EMBEDDING: &str = "embedding";
pub const INPUT_GRU: &str = "input_gru";
pub const EPISODE_GRU: &str = "episode_gru";
pub const MEMORY_GRU: &str = "memory_gru";
pub const ANSWER_WEIGHT: &str = "answer.w";
pub const ANSWER_BIAS: &str = "answer.b";

/// Half-width of the uniform embedding initializer.
pub const EMBEDDING_INIT: f64 = 0.1;

/// Registers every episodic-model tensor for a vocabulary of `vocab` tokens.
pub fn init_episodic(store: &mut ParameterStore, cfg: &ModelConfig, vocab: usize, rng: &mut ChaCha8Rng) {
    let d = cfg.hidden;
    store.insert(EMBEDDING, ParamKind::Embedding, uniform(rng, &[vocab, cfg.embed], EMBEDDING_INIT));
    GruParams::init(store, INPUT_GRU, cfg.embed, d, rng);
    GruParams::init(store, EPISODE_GRU, d, d, rng);
    GruParams::init(store, MEMORY_GRU, d, d, rng);
    let dims = ScorerDims { hidden: d, slices: cfg.slices, gate_hidden: cfg.gate_hidden };
    init_scorer(store, GATE_PREFIX, cfg.scorer, dims, rng);
    store.insert(ANSWER_WEIGHT, ParamKind::Weight, xavier(rng, &[vocab, 2 * d], 2 * d, vocab));
    store.insert(ANSWER_BIAS, ParamKind::Bias, zeros(&[vocab]));
}

/// Episodic-model parameters bound on one graph.
#[derive(Clone, Copy, Debug)]
pub struct EpisodicParams {
    pub embedding: Var,
    /// Shared by the input and question encoders.
    pub input: GruParams,
    /// Inner recurrence over facts within one hop.
    pub episode: GruParams,
    /// Memory update across hops.
    pub memory: GruParams,
    pub scorer: GateScorer,
    pub answer_weight: Var,
    pub answer_bias: Var,
}

impl EpisodicParams {
    pub fn bind(g: &Graph, store: &ParameterStore, cfg: &ModelConfig) -> Result<Self> {
        let p = EpisodicParams {
            embedding: store.bind(g, EMBEDDING)?,
            input: GruParams::bind(g, store, INPUT_GRU)?,
            episode: GruParams::bind(g, store, EPISODE_GRU)?,
            memory: GruParams::bind(g, store, MEMORY_GRU)?,
            scorer: GateScorer::bind(g, store, GATE_PREFIX, cfg.scorer)?,
            answer_weight: store.bind(g, ANSWER_WEIGHT)?,
            answer_bias: store.bind(g, ANSWER_BIAS)?,
        };
        let d = p.input.hidden;
        for gru in [p.episode, p.memory] {
            if gru.input != d || gru.hidden != d {
                return Err(Error::dim("episodic params", &[gru.hidden, gru.input], &[d, d]));
            }
        }
        let emb = g.shape(p.embedding);
        if emb.len() != 2 || emb[1] != p.input.input {
            return Err(Error::dim("episodic embedding", &emb, &[p.input.input]));
        }
        let aw = g.shape(p.answer_weight);
        if aw != [emb[0], 2 * d] {
            return Err(Error::dim("answer weight", &aw, &[emb[0], 2 * d]));
        }
        Ok(p)
    }
}

/// One attention pass over the facts: each fact is fed through the inner GRU
/// with its gate blending the update against the previous state.
pub fn episode_pass(g: &Graph, facts: &[Var], m_prev: Var, q: Var, p: &EpisodicParams) -> Result<(Var, Vec<Var>)> {
    let question = p.scorer.prepare_question(g, q)?;
    let memory = p.scorer.prepare_memory(g, &question, m_prev)?;
    episode_pass_prepared(g, facts, &memory, p)
}

fn episode_pass_prepared(
    g: &Graph,
    facts: &[Var],
    memory: &PreparedMemory,
    p: &EpisodicParams,
) -> Result<(Var, Vec<Var>)> {
    if facts.is_empty() {
        return Err(Error::arg("episode over zero facts"));
    }
    let mut h = zero_state(g, p.episode.hidden)?;
    let mut gates = Vec::with_capacity(facts.len());
    for &c in facts {
        let gate = p.scorer.score_prepared(g, c, memory)?;
        let updated = gru_cell(g, c, h, &p.episode)?;
        let keep = g.affine(gate, -1.0, 1.0)?;
        let moved = g.scale(updated, gate)?;
        let kept = g.scale(h, keep)?;
        h = g.add(moved, kept)?;
        gates.push(gate);
    }
    Ok((h, gates))
}

/// `m = GRU_mem(e, m_prev)`.
pub fn memory_update(g: &Graph, e: Var, m_prev: Var, p: &EpisodicParams) -> Result<Var> {
    gru_cell(g, e, m_prev, &p.memory)
}

/// `W_a [m; q] + b_a`.
pub fn answer_logits(g: &Graph, m: Var, q: Var, p: &EpisodicParams) -> Result<Var> {
    let (ms, qs) = (g.shape(m), g.shape(q));
    if ms != qs {
        return Err(Error::dim("answer_logits", &ms, &qs));
    }
    let z = g.concat(&[m, q])?;
    let logits = g.matvec(p.answer_weight, z)?;
    g.add(logits, p.answer_bias)
}

/// Inverted dropout mask: entries are `0` or `1 / (1 − rate)`.
pub(crate) fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
}

/// Logits plus the gate (or attention) matrix of one sample.
#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: Var,
    pub trace: GateTrace,
}

/// Full episodic forward pass. `dropout` carries the mask stream in training;
/// pass `None` to evaluate.
pub fn dmtn_forward(
    g: &Graph,
    sample: &EncodedSample,
    store: &ParameterStore,
    cfg: &ModelConfig,
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<Forward> {
    if cfg.hops == 0 {
        return Err(Error::config("at least one hop is required"));
    }
    let p = EpisodicParams::bind(g, store, cfg)?;
    let mut facts = encode_input(g, sample, p.embedding, &p.input)?.facts;
    let q = encode_question(g, &sample.question_ids, p.embedding, &p.input)?;
    if let Some(rng) = dropout.filter(|_| cfg.dropout > 0.0) {
        for c in facts.iter_mut() {
            *c = g.mask(*c, dropout_mask(rng, p.input.hidden, cfg.dropout))?;
        }
    }
    let question = p.scorer.prepare_question(g, q)?;
    let mut m = q;
    let mut trace = GateTrace::new(cfg.hops, facts.len());
    for hop in 0..cfg.hops {
        let memory = p.scorer.prepare_memory(g, &question, m)?;
        let (e, gates) = episode_pass_prepared(g, &facts, &memory, &p)?;
        for (t, gate) in gates.into_iter().enumerate() {
            trace.set(hop, t, g.scalar(gate)?);
        }
        m = memory_update(g, e, m, &p)?;
    }
    let logits = answer_logits(g, m, q, &p)?;
    Ok(Forward { logits, trace })
}

/// `l2 · Σ w²` over every [`ParamKind::Weight`] tensor, shape `[1]`.
pub fn weight_penalty(g: &Graph, store: &ParameterStore, l2: f64) -> Result<Var> {
    let mut total: Option<Var> = None;
    for name in store.weight_names() {
        let w = store.bind(g, name)?;
        let s = g.sum_squares(w)?;
        total = Some(match total {
            Some(t) => g.add(t, s)?,
            None => s,
        });
    }
    let total = match total {
        Some(t) => t,
        None => g.constant(crate::Tensor::scalar(0.0)),
    };
    g.affine(total, l2, 0.0)
}

/// Answer cross-entropy plus the weight penalty. Supporting facts play no part.
pub fn loss(g: &Graph, logits: Var, answer: usize, store: &ParameterStore, l2: f64) -> Result<Var> {
    let ce = g.cross_entropy(logits, answer)?;
    if l2 == 0.0 {
        return Ok(ce);
    }
    let penalty = weight_penalty(g, store, l2)?;
    g.add(ce, penalty)
}
