//! GRU cell and the input/question encoders that produce fact vectors and the
//! question vector.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::corpus::{EncodedSample, TokenId};
use crate::error::{Error, Result};
use crate::params::{xavier, zeros, ParamKind, ParameterStore};
use crate::tensor::Tensor;

/// The nine GRU tensors bound on a graph.
///
/// Update convention: `h = (1 − z) ∘ h_prev + z ∘ h̃`.
#[derive(Clone, Copy, Debug)]
pub struct GruParams {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
    pub input: usize,
    pub hidden: usize,
}

const WEIGHTS: [&str; 6] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h"];
const BIASES: [&str; 3] = ["b_z", "b_r", "b_h"];

impl GruParams {
    /// Registers Xavier-initialized weights and zero biases under `prefix`.
    pub fn init<R: Rng>(store: &mut ParameterStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) {
        for name in WEIGHTS {
            let cols = if name.starts_with('w') { input } else { hidden };
            store.insert(format!("{prefix}.{name}"), ParamKind::Weight, xavier(rng, &[hidden, cols], cols, hidden));
        }
        for name in BIASES {
            store.insert(format!("{prefix}.{name}"), ParamKind::Bias, zeros(&[hidden]));
        }
    }

    /// Registers all-zero tensors under `prefix`.
    pub fn init_zero(store: &mut ParameterStore, prefix: &str, input: usize, hidden: usize) {
        for name in WEIGHTS {
            let cols = if name.starts_with('w') { input } else { hidden };
            store.insert(format!("{prefix}.{name}"), ParamKind::Weight, zeros(&[hidden, cols]));
        }
        for name in BIASES {
            store.insert(format!("{prefix}.{name}"), ParamKind::Bias, zeros(&[hidden]));
        }
    }

    pub fn bind(graph: &Graph, store: &ParameterStore, prefix: &str) -> Result<Self> {
        let get = |n: &str| store.bind(graph, &format!("{prefix}.{n}"));
        let p = GruParams {
            w_z: get("w_z")?,
            w_r: get("w_r")?,
            w_h: get("w_h")?,
            u_z: get("u_z")?,
            u_r: get("u_r")?,
            u_h: get("u_h")?,
            b_z: get("b_z")?,
            b_r: get("b_r")?,
            b_h: get("b_h")?,
            input: 0,
            hidden: 0,
        };
        let ws = graph.shape(p.w_z);
        if ws.len() != 2 {
            return Err(Error::dim("gru params", &ws, &[]));
        }
        let (hidden, input) = (ws[0], ws[1]);
        for (w, expect) in [
            (p.w_r, [hidden, input]),
            (p.w_h, [hidden, input]),
            (p.u_z, [hidden, hidden]),
            (p.u_r, [hidden, hidden]),
            (p.u_h, [hidden, hidden]),
        ] {
            let s = graph.shape(w);
            if s != expect {
                return Err(Error::dim("gru params", &s, &expect));
            }
        }
        for b in [p.b_z, p.b_r, p.b_h] {
            let s = graph.shape(b);
            if s != [hidden] {
                return Err(Error::dim("gru params", &s, &[hidden]));
            }
        }
        Ok(GruParams { input, hidden, ..p })
    }

    fn gate(&self, g: &Graph, w: Var, x: Var, u: Var, h: Var, b: Var) -> Result<Var> {
        let wx = g.matvec(w, x)?;
        let uh = g.matvec(u, h)?;
        let s = g.add(wx, uh)?;
        g.add(s, b)
    }
}

/// One GRU step.
pub fn gru_cell(g: &Graph, x: Var, h_prev: Var, p: &GruParams) -> Result<Var> {
    let (xs, hs) = (g.shape(x), g.shape(h_prev));
    if xs != [p.input] {
        return Err(Error::dim("gru_cell input", &xs, &[p.input]));
    }
    if hs != [p.hidden] {
        return Err(Error::dim("gru_cell state", &hs, &[p.hidden]));
    }
    let z_pre = p.gate(g, p.w_z, x, p.u_z, h_prev, p.b_z)?;
    let z = g.sigmoid(z_pre)?;
    let r_pre = p.gate(g, p.w_r, x, p.u_r, h_prev, p.b_r)?;
    let r = g.sigmoid(r_pre)?;
    let reset = g.mul(r, h_prev)?;
    let cand_pre = p.gate(g, p.w_h, x, p.u_h, reset, p.b_h)?;
    let candidate = g.tanh(cand_pre)?;
    let keep = g.affine(z, -1.0, 1.0)?;
    let old = g.mul(keep, h_prev)?;
    let new = g.mul(z, candidate)?;
    g.add(old, new)
}

/// Zero vector of the GRU's hidden size.
pub fn zero_state(g: &Graph, hidden: usize) -> Result<Var> {
    Ok(g.constant(Tensor::zeros(vec![hidden])?))
}

/// Hidden states captured at each end-of-sentence position.
#[derive(Clone, Debug)]
pub struct FactStates {
    pub facts: Vec<Var>,
}

impl FactStates {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

fn embed(g: &Graph, embeddings: Var, id: TokenId) -> Result<Var> {
    g.row(embeddings, id.index())
}

/// Runs the GRU over the context tokens from a zero state and collects the
/// hidden state at every end-of-sentence position.
pub fn encode_input(g: &Graph, sample: &EncodedSample, embeddings: Var, p: &GruParams) -> Result<FactStates> {
    if sample.eos_positions.is_empty() {
        return Err(Error::arg("sample has no context sentences"));
    }
    let mut h = zero_state(g, p.hidden)?;
    let mut facts = Vec::with_capacity(sample.eos_positions.len());
    let mut next_eos = sample.eos_positions.iter().peekable();
    for (pos, &id) in sample.input_ids.iter().enumerate() {
        let x = embed(g, embeddings, id)?;
        h = gru_cell(g, x, h, p)?;
        if next_eos.peek() == Some(&&pos) {
            facts.push(h);
            next_eos.next();
        }
    }
    Ok(FactStates { facts })
}

/// Final GRU state over the question tokens, from a zero state.
pub fn encode_question(g: &Graph, question_ids: &[TokenId], embeddings: Var, p: &GruParams) -> Result<Var> {
    if question_ids.is_empty() {
        return Err(Error::arg("question has no tokens"));
    }
    let mut h = zero_state(g, p.hidden)?;
    for &id in question_ids {
        let x = embed(g, embeddings, id)?;
        h = gru_cell(g, x, h, p)?;
    }
    Ok(h)
}
