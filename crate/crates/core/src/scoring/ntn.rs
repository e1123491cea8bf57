use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{xavier, zeros, ParamKind, ParameterStore};

/// Neural-tensor gate over the pairs (c,q), (m,q), (c,m), with an optional
/// three-way (c,q,m) tensor.
#[derive(Clone, Copy, Debug)]
pub struct NtnGateParams {
    pub w_cq: Var,
    pub w_mq: Var,
    pub w_cm: Var,
    /// `k×d×d×d`; contracted with c on mode 1, q on mode 2, m on mode 3.
    pub w_r3: Option<Var>,
    /// `k×3d`, applied to `[c; q; m]`.
    pub v_r: Var,
    pub b_r: Var,
    pub w2: Var,
    pub b2: Var,
}

impl NtnGateParams {
    pub fn init<R: Rng>(store: &mut ParameterStore, prefix: &str, d: usize, k: usize, three_way: bool, rng: &mut R) {
        for name in ["w_cq", "w_mq", "w_cm"] {
            store.insert(format!("{prefix}.{name}"), ParamKind::Weight, xavier(rng, &[k, d, d], d * d, k));
        }
        if three_way {
            store.insert(format!("{prefix}.w_r3"), ParamKind::Weight, xavier(rng, &[k, d, d, d], d * d * d, k));
        }
        store.insert(format!("{prefix}.v_r"), ParamKind::Weight, xavier(rng, &[k, 3 * d], 3 * d, k));
        store.insert(format!("{prefix}.b_r"), ParamKind::Bias, zeros(&[k]));
        store.insert(format!("{prefix}.w2"), ParamKind::Weight, xavier(rng, &[1, k], k, 1));
        store.insert(format!("{prefix}.b2"), ParamKind::Bias, zeros(&[1]));
    }

    pub fn bind(g: &Graph, store: &ParameterStore, prefix: &str) -> Result<Self> {
        let get = |n: &str| store.bind(g, &format!("{prefix}.{n}"));
        Ok(NtnGateParams {
            w_cq: get("w_cq")?,
            w_mq: get("w_mq")?,
            w_cm: get("w_cm")?,
            w_r3: store.bind_optional(g, &format!("{prefix}.w_r3")),
            v_r: get("v_r")?,
            b_r: get("b_r")?,
            w2: get("w2")?,
            b2: get("b2")?,
        })
    }

    fn three_way_tensor(&self, three_way: bool) -> Result<Option<Var>> {
        match (three_way, self.w_r3) {
            (false, _) => Ok(None),
            (true, Some(w)) => Ok(Some(w)),
            (true, None) => Err(Error::config("three-way gate requested but no three-way tensor is present")),
        }
    }
}

/// The bilinear/trilinear pair terms of one triple, each a k-vector.
pub(crate) struct PairTerms {
    pub three_way: Option<Var>,
    pub cq: Var,
    pub mq: Var,
    pub cm: Var,
}

/// `t + cᵀW_cq q + mᵀW_mq q + cᵀW_cm m + V_R[c;q;m] + b_R`, the k-vector fed to tanh.
pub(crate) fn compose_preactivation(
    g: &Graph,
    terms: PairTerms,
    c: Var,
    m: Var,
    q: Var,
    p: &NtnGateParams,
) -> Result<Var> {
    let mut s = g.add(terms.cq, terms.mq)?;
    s = g.add(s, terms.cm)?;
    if let Some(t) = terms.three_way {
        s = g.add(t, s)?;
    }
    let z = g.concat(&[c, q, m])?;
    let linear = g.matvec(p.v_r, z)?;
    s = g.add(s, linear)?;
    g.add(s, p.b_r)
}

pub(crate) fn gate_from_preactivation(g: &Graph, s: Var, w2: Var, b2: Var) -> Result<Var> {
    let h = g.tanh(s)?;
    let out = g.matvec(w2, h)?;
    let out = g.add(out, b2)?;
    g.sigmoid(out)
}

fn check_triple(g: &Graph, c: Var, m: Var, q: Var) -> Result<()> {
    let d = g.shape(c);
    for other in [m, q] {
        let s = g.shape(other);
        if s != d || d.len() != 1 {
            return Err(Error::dim("ntn_gate", &d, &s));
        }
    }
    Ok(())
}

/// Pre-activation k-vector of the NTN gate for one triple.
pub fn ntn_preactivation(g: &Graph, c: Var, m: Var, q: Var, p: &NtnGateParams, three_way: bool) -> Result<Var> {
    check_triple(g, c, m, q)?;
    let w3 = p.three_way_tensor(three_way)?;
    let terms = PairTerms {
        three_way: w3.map(|w| g.trilinear_slices(c, w, q, m)).transpose()?,
        cq: g.bilinear_slices(c, p.w_cq, q)?,
        mq: g.bilinear_slices(m, p.w_mq, q)?,
        cm: g.bilinear_slices(c, p.w_cm, m)?,
    };
    compose_preactivation(g, terms, c, m, q, p)
}

pub fn ntn_gate(g: &Graph, c: Var, m: Var, q: Var, p: &NtnGateParams, three_way: bool) -> Result<Var> {
    let s = ntn_preactivation(g, c, m, q, p, three_way)?;
    gate_from_preactivation(g, s, p.w2, p.b2)
}

/// Per-question contractions: `W_cq·q`, `W_mq·q`, and `W_R3` with q on mode 2.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NtnQuestionCache {
    pub q: Var,
    pub cq: Var,
    pub mq: Var,
    pub three_way: Option<Var>,
}

/// Per-memory contractions on top of the question cache.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NtnMemoryCache {
    pub q: Var,
    pub m: Var,
    pub cq: Var,
    pub mq_term: Var,
    pub cm: Var,
    pub three_way: Option<Var>,
}

pub(crate) fn prepare_question(g: &Graph, q: Var, p: &NtnGateParams, three_way: bool) -> Result<NtnQuestionCache> {
    let w3 = p.three_way_tensor(three_way)?;
    Ok(NtnQuestionCache {
        q,
        cq: g.contract(p.w_cq, q, 2)?,
        mq: g.contract(p.w_mq, q, 2)?,
        three_way: w3.map(|w| g.contract(w, q, 2)).transpose()?,
    })
}

pub(crate) fn prepare_memory(g: &Graph, cache: &NtnQuestionCache, m: Var, p: &NtnGateParams) -> Result<NtnMemoryCache> {
    Ok(NtnMemoryCache {
        q: cache.q,
        m,
        cq: cache.cq,
        mq_term: g.matvec(cache.mq, m)?,
        cm: g.contract(p.w_cm, m, 2)?,
        three_way: cache.three_way.map(|w| g.contract(w, m, 2)).transpose()?,
    })
}

pub(crate) fn score_prepared(g: &Graph, c: Var, cache: &NtnMemoryCache, p: &NtnGateParams) -> Result<Var> {
    check_triple(g, c, cache.m, cache.q)?;
    let terms = PairTerms {
        three_way: cache.three_way.map(|w| g.matvec(w, c)).transpose()?,
        cq: g.matvec(cache.cq, c)?,
        mq: cache.mq_term,
        cm: g.matvec(cache.cm, c)?,
    };
    let s = compose_preactivation(g, terms, c, cache.m, cache.q, p)?;
    gate_from_preactivation(g, s, p.w2, p.b2)
}
