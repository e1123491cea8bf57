use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{xavier, zeros, ParamKind, ParameterStore};

/// Handcrafted-feature gate: `σ(W2 tanh(W1 z(c,m,q) + b1) + b2)`.
#[derive(Clone, Copy, Debug)]
pub struct DmnGateParams {
    /// Similarity matrix shared by the `cᵀW q` and `cᵀW m` features.
    pub w_b: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// Length of the feature vector for fact size `d`.
pub fn feature_len(d: usize) -> usize {
    7 * d + 2
}

impl DmnGateParams {
    pub fn init<R: Rng>(store: &mut ParameterStore, prefix: &str, d: usize, h: usize, rng: &mut R) {
        let f = feature_len(d);
        store.insert(format!("{prefix}.w_b"), ParamKind::Weight, xavier(rng, &[d, d], d, d));
        store.insert(format!("{prefix}.w1"), ParamKind::Weight, xavier(rng, &[h, f], f, h));
        store.insert(format!("{prefix}.b1"), ParamKind::Bias, zeros(&[h]));
        store.insert(format!("{prefix}.w2"), ParamKind::Weight, xavier(rng, &[1, h], h, 1));
        store.insert(format!("{prefix}.b2"), ParamKind::Bias, zeros(&[1]));
    }

    pub fn bind(g: &Graph, store: &ParameterStore, prefix: &str) -> Result<Self> {
        let get = |n: &str| store.bind(g, &format!("{prefix}.{n}"));
        Ok(DmnGateParams { w_b: get("w_b")?, w1: get("w1")?, b1: get("b1")?, w2: get("w2")?, b2: get("b2")? })
    }
}

/// `[c; m; q; c∘q; c∘m; |c−q|; |c−m|; cᵀW_b q; cᵀW_b m]`, length `7d + 2`.
pub fn dmn_feature_vector(g: &Graph, c: Var, m: Var, q: Var, w_b: Var) -> Result<Var> {
    let d = g.shape(c);
    for other in [m, q] {
        let s = g.shape(other);
        if s != d || d.len() != 1 {
            return Err(Error::dim("dmn_feature_vector", &d, &s));
        }
    }
    let cq = g.mul(c, q)?;
    let cm = g.mul(c, m)?;
    let dq = g.sub(c, q)?;
    let dq = g.abs(dq)?;
    let dm = g.sub(c, m)?;
    let dm = g.abs(dm)?;
    let wq = g.matvec(w_b, q)?;
    let sim_q = g.dot(c, wq)?;
    let wm = g.matvec(w_b, m)?;
    let sim_m = g.dot(c, wm)?;
    g.concat(&[c, m, q, cq, cm, dq, dm, sim_q, sim_m])
}

pub fn dmn_gate(g: &Graph, c: Var, m: Var, q: Var, p: &DmnGateParams) -> Result<Var> {
    let z = dmn_feature_vector(g, c, m, q, p.w_b)?;
    let hidden = g.matvec(p.w1, z)?;
    let hidden = g.add(hidden, p.b1)?;
    let hidden = g.tanh(hidden)?;
    let out = g.matvec(p.w2, hidden)?;
    let out = g.add(out, p.b2)?;
    g.sigmoid(out)
}
