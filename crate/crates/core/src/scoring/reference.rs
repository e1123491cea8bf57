//! Classical two-entity relation scores that the tensor gates generalize.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReferenceKind {
    Distance,
    SingleLayer,
    Hadamard,
    Bilinear,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 4] =
        [ReferenceKind::Distance, ReferenceKind::SingleLayer, ReferenceKind::Hadamard, ReferenceKind::Bilinear];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::Distance => "distance",
            ReferenceKind::SingleLayer => "single_layer",
            ReferenceKind::Hadamard => "hadamard",
            ReferenceKind::Bilinear => "bilinear",
        }
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown relation model `{s}`")))
    }
}

/// Parameters of one relation model, already bound on a graph.
#[derive(Clone, Copy, Debug)]
pub enum RelationParams {
    /// `‖W1 e1 − W2 e2‖₁`.
    Distance { w1: Var, w2: Var },
    /// `uᵀ tanh(W1 e1 + W2 e2 + b)`; `bias` may be absent.
    SingleLayer { u: Var, w1: Var, w2: Var, bias: Option<Var> },
    /// `(W1 e1 ∘ Wr1 r + b1)ᵀ(W2 e2 ∘ Wr2 r + b2)` for relation vector `r`.
    Hadamard { w1: Var, w2: Var, w_rel1: Var, w_rel2: Var, relation: Var, b1: Var, b2: Var },
    /// `e1ᵀ W e2`.
    Bilinear { w: Var },
}

impl RelationParams {
    pub fn kind(&self) -> ReferenceKind {
        match self {
            RelationParams::Distance { .. } => ReferenceKind::Distance,
            RelationParams::SingleLayer { .. } => ReferenceKind::SingleLayer,
            RelationParams::Hadamard { .. } => ReferenceKind::Hadamard,
            RelationParams::Bilinear { .. } => ReferenceKind::Bilinear,
        }
    }
}

/// Scalar relation score between two entity vectors, shape `[1]`.
pub fn reference_score(g: &Graph, kind: ReferenceKind, e1: Var, e2: Var, params: &RelationParams) -> Result<Var> {
    if params.kind() != kind {
        return Err(Error::config(format!("relation model `{kind}` given parameters for `{}`", params.kind())));
    }
    match *params {
        RelationParams::Distance { w1, w2 } => {
            let a = g.matvec(w1, e1)?;
            let b = g.matvec(w2, e2)?;
            let diff = g.sub(a, b)?;
            let diff = g.abs(diff)?;
            g.sum(diff)
        }
        RelationParams::SingleLayer { u, w1, w2, bias } => {
            let a = g.matvec(w1, e1)?;
            let b = g.matvec(w2, e2)?;
            let mut s = g.add(a, b)?;
            if let Some(bias) = bias {
                s = g.add(s, bias)?;
            }
            let h = g.tanh(s)?;
            g.dot(u, h)
        }
        RelationParams::Hadamard { w1, w2, w_rel1, w_rel2, relation, b1, b2 } => {
            let left = g.matvec(w1, e1)?;
            let r1 = g.matvec(w_rel1, relation)?;
            let left = g.mul(left, r1)?;
            let left = g.add(left, b1)?;
            let right = g.matvec(w2, e2)?;
            let r2 = g.matvec(w_rel2, relation)?;
            let right = g.mul(right, r2)?;
            let right = g.add(right, b2)?;
            g.dot(left, right)
        }
        RelationParams::Bilinear { w } => {
            let we2 = g.matvec(w, e2)?;
            g.dot(e1, we2)
        }
    }
}
