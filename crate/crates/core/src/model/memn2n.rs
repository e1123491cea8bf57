use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::corpus::{EncodedSample, TokenId};
use crate::error::{Error, Result};
use crate::params::{uniform, xavier, ParamKind, ParameterStore};

use super::config::ModelConfig;
use super::episodic::{Forward, EMBEDDING_INIT};
use super::trace::GateTrace;

fn tied_name(h: usize) -> String {
    format!("memn2n.emb.{h}")
}

/// Registers the baseline's tables. Width is `cfg.embed`.
///
/// Tied: `hops + 1` tables where table `h` is the output side of hop `h` and
/// the input side of hop `h + 1`; table 0 also embeds the question and the
/// last table doubles as the answer matrix. Untied: separate `a.h`, `c.h`,
/// `b` and `w`.
pub fn init_memn2n(store: &mut ParameterStore, cfg: &ModelConfig, vocab: usize, rng: &mut ChaCha8Rng) {
    let d = cfg.embed;
    if cfg.tied {
        for h in 0..=cfg.hops {
            store.insert(tied_name(h), ParamKind::Embedding, uniform(rng, &[vocab, d], EMBEDDING_INIT));
        }
    } else {
        store.insert("memn2n.b", ParamKind::Embedding, uniform(rng, &[vocab, d], EMBEDDING_INIT));
        for h in 1..=cfg.hops {
            store.insert(format!("memn2n.a.{h}"), ParamKind::Embedding, uniform(rng, &[vocab, d], EMBEDDING_INIT));
            store.insert(format!("memn2n.c.{h}"), ParamKind::Embedding, uniform(rng, &[vocab, d], EMBEDDING_INIT));
        }
        store.insert("memn2n.w", ParamKind::Weight, xavier(rng, &[vocab, d], d, vocab));
    }
}

/// Baseline tables bound on a graph; `input[h]` / `output[h]` serve hop `h + 1`.
#[derive(Clone, Debug)]
pub struct MemN2NParams {
    pub question: Var,
    pub input: Vec<Var>,
    pub output: Vec<Var>,
    /// `|V| × d`.
    pub answer: Var,
}

impl MemN2NParams {
    pub fn bind(g: &Graph, store: &ParameterStore, cfg: &ModelConfig) -> Result<Self> {
        let hops = cfg.hops;
        let p = if cfg.tied {
            let tables = (0..=hops).map(|h| store.bind(g, &tied_name(h))).collect::<Result<Vec<_>>>()?;
            MemN2NParams {
                question: tables[0],
                input: tables[..hops].to_vec(),
                output: tables[1..].to_vec(),
                answer: tables[hops],
            }
        } else {
            MemN2NParams {
                question: store.bind(g, "memn2n.b")?,
                input: (1..=hops).map(|h| store.bind(g, &format!("memn2n.a.{h}"))).collect::<Result<_>>()?,
                output: (1..=hops).map(|h| store.bind(g, &format!("memn2n.c.{h}"))).collect::<Result<_>>()?,
                answer: store.bind(g, "memn2n.w")?,
            }
        };
        let shape = g.shape(p.question);
        for &t in p.input.iter().chain(&p.output).chain([&p.answer]) {
            let s = g.shape(t);
            if s != shape {
                return Err(Error::dim("memn2n tables", &s, &shape));
            }
        }
        Ok(p)
    }
}

/// Bag-of-words sentence vector: the sum of the tokens' embedding rows.
pub fn embed_bow(g: &Graph, ids: &[TokenId], table: Var) -> Result<Var> {
    if ids.is_empty() {
        return Err(Error::arg("cannot embed an empty sentence"));
    }
    let rows: Vec<usize> = ids.iter().map(|id| id.index()).collect();
    g.row_sum(table, &rows)
}

/// One attention read: `p = softmax(uᵀ mᵢ)`, `o = Σ pᵢ cᵢ`. Returns `(o, p)`.
pub fn memn2n_hop(g: &Graph, u: Var, mem_in: &[Var], mem_out: &[Var]) -> Result<(Var, Var)> {
    if mem_in.len() != mem_out.len() {
        return Err(Error::dim("memn2n_hop", &[mem_in.len()], &[mem_out.len()]));
    }
    if mem_in.is_empty() {
        return Err(Error::arg("memn2n_hop over zero memories"));
    }
    let scores = mem_in.iter().map(|&m| g.dot(u, m)).collect::<Result<Vec<_>>>()?;
    let scores = g.concat(&scores)?;
    let p = g.softmax(scores)?;
    let stacked = g.stack(mem_out)?;
    let columns = g.transpose(stacked)?;
    let o = g.matvec(columns, p)?;
    Ok((o, p))
}

/// Multi-hop forward pass. The trace holds each hop's attention distribution.
pub fn memn2n_forward(g: &Graph, sample: &EncodedSample, store: &ParameterStore, cfg: &ModelConfig) -> Result<Forward> {
    if cfg.hops == 0 {
        return Err(Error::config("at least one hop is required"));
    }
    let p = MemN2NParams::bind(g, store, cfg)?;
    let sentences: Vec<&[TokenId]> = sample.sentences().collect();
    if sentences.is_empty() {
        return Err(Error::arg("sample has no context sentences"));
    }
    let mut u = embed_bow(g, &sample.question_ids, p.question)?;
    let mut trace = GateTrace::new(cfg.hops, sentences.len());
    for hop in 0..cfg.hops {
        let mem_in = sentences.iter().map(|s| embed_bow(g, s, p.input[hop])).collect::<Result<Vec<_>>>()?;
        let mem_out = sentences.iter().map(|s| embed_bow(g, s, p.output[hop])).collect::<Result<Vec<_>>>()?;
        let (o, attention) = memn2n_hop(g, u, &mem_in, &mem_out)?;
        for (t, &v) in g.value(attention).data().iter().enumerate() {
            trace.set(hop, t, v);
        }
        u = g.add(o, u)?;
    }
    // u now holds o^H + u^H
    let logits = g.matvec(p.answer, u)?;
    Ok(Forward { logits, trace })
}
