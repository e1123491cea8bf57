//! Attention-gate scorers: `G(c, m, q) ∈ (0,1)` for a fact `c`, the previous
//! memory `m` and the question `q`.

mod dmn;
mod ntn;
mod reference;
mod xntn;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::ParameterStore;

pub use dmn::{dmn_feature_vector, dmn_gate, feature_len, DmnGateParams};
pub use ntn::{ntn_gate, ntn_preactivation, NtnGateParams};
pub use reference::{reference_score, ReferenceKind, RelationParams};
pub use xntn::{xntn_gate, xntn_preactivation, XntnGateParams};

/// Parameter-name prefix used by the episodic model.
pub const GATE_PREFIX: &str = "gate";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScorerKind {
    /// Handcrafted similarity features into a two-layer net.
    Dmn,
    /// Pairwise tensor slices over (c,q), (m,q), (c,m).
    Ntn2,
    /// `Ntn2` plus the three-way (c,q,m) tensor.
    Ntn3,
    /// One slice stack over `[c; m; q]`.
    Xntn,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 4] = [ScorerKind::Dmn, ScorerKind::Ntn2, ScorerKind::Ntn3, ScorerKind::Xntn];

    pub fn name(self) -> &'static str {
        match self {
            ScorerKind::Dmn => "dmn",
            ScorerKind::Ntn2 => "ntn2",
            ScorerKind::Ntn3 => "ntn3",
            ScorerKind::Xntn => "xntn",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scorer `{s}` (expected dmn, ntn2, ntn3 or xntn)")))
    }
}

/// Sizes a scorer is built with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScorerDims {
    /// Fact / memory / question width.
    pub hidden: usize,
    /// Tensor slice count.
    pub slices: usize,
    /// Hidden width of the handcrafted-feature gate.
    pub gate_hidden: usize,
}

/// Registers freshly initialized scorer parameters under `prefix`.
pub fn init_scorer<R: Rng>(store: &mut ParameterStore, prefix: &str, kind: ScorerKind, dims: ScorerDims, rng: &mut R) {
    let ScorerDims { hidden: d, slices: k, gate_hidden: h } = dims;
    match kind {
        ScorerKind::Dmn => DmnGateParams::init(store, prefix, d, h, rng),
        ScorerKind::Ntn2 => NtnGateParams::init(store, prefix, d, k, false, rng),
        ScorerKind::Ntn3 => NtnGateParams::init(store, prefix, d, k, true, rng),
        ScorerKind::Xntn => XntnGateParams::init(store, prefix, d, k, rng),
    }
}

/// A scorer bound on a graph.
#[derive(Clone, Copy, Debug)]
pub enum GateScorer {
    Dmn(DmnGateParams),
    Ntn { params: NtnGateParams, three_way: bool },
    Xntn(XntnGateParams),
}

/// Question-level state for [`GateScorer::score_prepared`].
#[derive(Clone, Copy, Debug)]
pub struct PreparedQuestion(PreparedQ);

#[derive(Clone, Copy, Debug)]
enum PreparedQ {
    Plain(Var),
    Ntn(ntn::NtnQuestionCache),
}

/// Memory-level state for [`GateScorer::score_prepared`].
#[derive(Clone, Copy, Debug)]
pub struct PreparedMemory(PreparedM);

#[derive(Clone, Copy, Debug)]
enum PreparedM {
    Plain { m: Var, q: Var },
    Ntn(ntn::NtnMemoryCache),
}

impl GateScorer {
    pub fn bind(g: &Graph, store: &ParameterStore, prefix: &str, kind: ScorerKind) -> Result<Self> {
        Ok(match kind {
            ScorerKind::Dmn => GateScorer::Dmn(DmnGateParams::bind(g, store, prefix)?),
            ScorerKind::Ntn2 | ScorerKind::Ntn3 => {
                GateScorer::Ntn { params: NtnGateParams::bind(g, store, prefix)?, three_way: kind == ScorerKind::Ntn3 }
            }
            ScorerKind::Xntn => GateScorer::Xntn(XntnGateParams::bind(g, store, prefix)?),
        })
    }

    pub fn kind(&self) -> ScorerKind {
        match self {
            GateScorer::Dmn(_) => ScorerKind::Dmn,
            GateScorer::Ntn { three_way: false, .. } => ScorerKind::Ntn2,
            GateScorer::Ntn { three_way: true, .. } => ScorerKind::Ntn3,
            GateScorer::Xntn(_) => ScorerKind::Xntn,
        }
    }

    /// Gate value for one triple, shape `[1]`.
    pub fn score(&self, g: &Graph, c: Var, m: Var, q: Var) -> Result<Var> {
        match self {
            GateScorer::Dmn(p) => dmn_gate(g, c, m, q, p),
            GateScorer::Ntn { params, three_way } => ntn_gate(g, c, m, q, params, *three_way),
            GateScorer::Xntn(p) => xntn_gate(g, c, m, q, p),
        }
    }

    /// Hoists the question-only tensor contractions.
    pub fn prepare_question(&self, g: &Graph, q: Var) -> Result<PreparedQuestion> {
        Ok(PreparedQuestion(match self {
            GateScorer::Ntn { params, three_way } => PreparedQ::Ntn(ntn::prepare_question(g, q, params, *three_way)?),
            _ => PreparedQ::Plain(q),
        }))
    }

    /// Hoists the memory-dependent contractions for one hop.
    pub fn prepare_memory(&self, g: &Graph, question: &PreparedQuestion, m: Var) -> Result<PreparedMemory> {
        Ok(PreparedMemory(match (self, question.0) {
            (GateScorer::Ntn { params, .. }, PreparedQ::Ntn(cache)) => {
                PreparedM::Ntn(ntn::prepare_memory(g, &cache, m, params)?)
            }
            (GateScorer::Ntn { .. }, PreparedQ::Plain(_)) | (_, PreparedQ::Ntn(_)) => {
                return Err(Error::config("prepared question does not belong to this scorer"))
            }
            (_, PreparedQ::Plain(q)) => PreparedM::Plain { m, q },
        }))
    }

    /// Same value as [`GateScorer::score`], bit for bit, reusing hoisted work.
    pub fn score_prepared(&self, g: &Graph, c: Var, memory: &PreparedMemory) -> Result<Var> {
        match (self, memory.0) {
            (GateScorer::Ntn { params, .. }, PreparedM::Ntn(cache)) => ntn::score_prepared(g, c, &cache, params),
            (_, PreparedM::Plain { m, q }) => self.score(g, c, m, q),
            _ => Err(Error::config("prepared memory does not belong to this scorer")),
        }
    }
}
