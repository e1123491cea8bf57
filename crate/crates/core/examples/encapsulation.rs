//! Tensor gates contain the simpler relation scorers as special cases: a
//! single-slice extended gate reproduces a bilinear form, and a slice-free
//! tensor gate reproduces a single-layer network.

use dmtn::autodiff::Graph;
use dmtn::params::uniform;
use dmtn::scoring::{
    ntn_gate, reference_score, xntn_preactivation, NtnGateParams, ReferenceKind, RelationParams, XntnGateParams,
};
use dmtn::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dmtn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 3;
    let g = Graph::new();
    let zeros = |shape: &[usize]| g.constant(Tensor::zeros(shape.to_vec()).expect("shape"));
    let c = g.constant(uniform(&mut rng, &[d], 1.0));
    let m = g.constant(uniform(&mut rng, &[d], 1.0));
    let q = g.constant(uniform(&mut rng, &[d], 1.0));

    // bilinear c' B q as one slice over [c; m; q]
    let b = uniform(&mut rng, &[d, d], 1.0);
    let n = 3 * d;
    let mut w = vec![0.0; n * n];
    for r in 0..d {
        for col in 0..d {
            w[r * n + 2 * d + col] = b.data()[r * d + col];
        }
    }
    let xntn = XntnGateParams {
        w_r: g.constant(Tensor::new(vec![1, n, n], w)?),
        v_r: zeros(&[1, n]),
        b_r: zeros(&[1]),
        w2: zeros(&[1, 1]),
        b2: zeros(&[1]),
    };
    let slice = g.scalar(xntn_preactivation(&g, c, m, q, &xntn)?)?;
    let bilinear =
        g.scalar(reference_score(&g, ReferenceKind::Bilinear, c, q, &RelationParams::Bilinear { w: g.constant(b) })?)?;
    println!("bilinear     {bilinear:+.15}\nextended     {slice:+.15}");

    // single layer u' tanh(W1 c + W2 q + b) through the linear block of the tensor gate
    let k = 2;
    let (w1, w2, u, bias) = (
        uniform(&mut rng, &[k, d], 1.0),
        uniform(&mut rng, &[k, d], 1.0),
        uniform(&mut rng, &[k], 1.0),
        uniform(&mut rng, &[k], 0.5),
    );
    let mut v = vec![0.0; k * n];
    for l in 0..k {
        for a in 0..d {
            v[l * n + a] = w1.data()[l * d + a];
            v[l * n + d + a] = w2.data()[l * d + a];
        }
    }
    let ntn = NtnGateParams {
        w_cq: zeros(&[k, d, d]),
        w_mq: zeros(&[k, d, d]),
        w_cm: zeros(&[k, d, d]),
        w_r3: None,
        v_r: g.constant(Tensor::new(vec![k, n], v)?),
        b_r: g.constant(bias.clone()),
        w2: g.constant(Tensor::new(vec![1, k], u.data().to_vec())?),
        b2: zeros(&[1]),
    };
    let gate = g.scalar(ntn_gate(&g, c, m, q, &ntn, false)?)?;
    let single = RelationParams::SingleLayer {
        u: g.constant(u),
        w1: g.constant(w1),
        w2: g.constant(w2),
        bias: Some(g.constant(bias)),
    };
    let score = g.scalar(reference_score(&g, ReferenceKind::SingleLayer, c, q, &single)?)?;
    println!("sigmoid(single layer) {:+.15}\ntensor gate           {gate:+.15}", 1.0 / (1.0 + (-score).exp()));
    Ok(())
}
