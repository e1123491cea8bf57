use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{xavier, zeros, ParamKind, ParameterStore};

use super::ntn::gate_from_preactivation;

/// Full bilinear gate over the stacked triple `z = [c; m; q]`.
#[derive(Clone, Copy, Debug)]
pub struct XntnGateParams {
    /// `k×3d×3d`.
    pub w_r: Var,
    /// `k×3d`.
    pub v_r: Var,
    pub b_r: Var,
    pub w2: Var,
    pub b2: Var,
}

impl XntnGateParams {
    pub fn init<R: Rng>(store: &mut ParameterStore, prefix: &str, d: usize, k: usize, rng: &mut R) {
        let n = 3 * d;
        store.insert(format!("{prefix}.w_r"), ParamKind::Weight, xavier(rng, &[k, n, n], n * n, k));
        store.insert(format!("{prefix}.v_r"), ParamKind::Weight, xavier(rng, &[k, n], n, k));
        store.insert(format!("{prefix}.b_r"), ParamKind::Bias, zeros(&[k]));
        store.insert(format!("{prefix}.w2"), ParamKind::Weight, xavier(rng, &[1, k], k, 1));
        store.insert(format!("{prefix}.b2"), ParamKind::Bias, zeros(&[1]));
    }

    pub fn bind(g: &Graph, store: &ParameterStore, prefix: &str) -> Result<Self> {
        let get = |n: &str| store.bind(g, &format!("{prefix}.{n}"));
        Ok(XntnGateParams { w_r: get("w_r")?, v_r: get("v_r")?, b_r: get("b_r")?, w2: get("w2")?, b2: get("b2")? })
    }
}

/// `zᵀW_R z + V_R z + b_R` with `z = [c; m; q]`.
pub fn xntn_preactivation(g: &Graph, c: Var, m: Var, q: Var, p: &XntnGateParams) -> Result<Var> {
    let d = g.shape(c);
    for other in [m, q] {
        let s = g.shape(other);
        if s != d || d.len() != 1 {
            return Err(Error::dim("xntn_gate", &d, &s));
        }
    }
    let z = g.concat(&[c, m, q])?;
    let quadratic = g.bilinear_slices(z, p.w_r, z)?;
    let linear = g.matvec(p.v_r, z)?;
    let s = g.add(quadratic, linear)?;
    g.add(s, p.b_r)
}

pub fn xntn_gate(g: &Graph, c: Var, m: Var, q: Var, p: &XntnGateParams) -> Result<Var> {
    let s = xntn_preactivation(g, c, m, q, p)?;
    gate_from_preactivation(g, s, p.w2, p.b2)
}
