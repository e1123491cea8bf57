use dmtn::autodiff::{gradient_check, Graph, Var};
use dmtn::params::{uniform, ParamKind, ParameterStore};
use dmtn::scoring::{
    dmn_feature_vector, dmn_gate, feature_len, init_scorer, ntn_gate, ntn_preactivation, reference_score, xntn_gate,
    xntn_preactivation, DmnGateParams, GateScorer, NtnGateParams, ReferenceKind, RelationParams, ScorerDims,
    ScorerKind, XntnGateParams,
};
use dmtn::{Error, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vector(g: &Graph, v: &[f64]) -> Var {
    g.constant(Tensor::vector(v.to_vec()))
}

fn zeros(g: &Graph, shape: &[usize]) -> Var {
    g.constant(Tensor::zeros(shape.to_vec()).unwrap())
}

fn tensor(g: &Graph, shape: &[usize], data: Vec<f64>) -> Var {
    g.constant(Tensor::new(shape.to_vec(), data).unwrap())
}

fn random(g: &Graph, rng: &mut ChaCha8Rng, shape: &[usize]) -> Var {
    g.constant(uniform(rng, shape, 1.0))
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn zero_ntn(g: &Graph, d: usize, k: usize) -> NtnGateParams {
    NtnGateParams {
        w_cq: zeros(g, &[k, d, d]),
        w_mq: zeros(g, &[k, d, d]),
        w_cm: zeros(g, &[k, d, d]),
        w_r3: None,
        v_r: zeros(g, &[k, 3 * d]),
        b_r: zeros(g, &[k]),
        w2: zeros(g, &[1, k]),
        b2: zeros(g, &[1]),
    }
}

fn zero_xntn(g: &Graph, d: usize, k: usize) -> XntnGateParams {
    XntnGateParams {
        w_r: zeros(g, &[k, 3 * d, 3 * d]),
        v_r: zeros(g, &[k, 3 * d]),
        b_r: zeros(g, &[k]),
        w2: zeros(g, &[1, k]),
        b2: zeros(g, &[1]),
    }
}

fn zero_dmn(g: &Graph, d: usize, h: usize) -> DmnGateParams {
    DmnGateParams {
        w_b: zeros(g, &[d, d]),
        w1: zeros(g, &[h, feature_len(d)]),
        b1: zeros(g, &[h]),
        w2: zeros(g, &[1, h]),
        b2: zeros(g, &[1]),
    }
}

fn scalar(g: &Graph, v: Var) -> f64 {
    g.scalar(v).unwrap()
}

#[test]
fn feature_vector_hand_example() {
    let g = Graph::new();
    let (c, m, q) = (vector(&g, &[1.0, 2.0]), vector(&g, &[3.0, 4.0]), vector(&g, &[5.0, 6.0]));
    let w_b = g.constant(Tensor::identity(2));
    let z = dmn_feature_vector(&g, c, m, q, w_b).unwrap();
    assert_eq!(g.value(z).data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 5.0, 12.0, 3.0, 8.0, 4.0, 4.0, 2.0, 2.0, 17.0, 11.0]);
}

#[test]
fn feature_vector_zero_and_symmetric_cases() {
    let g = Graph::new();
    let zero = vector(&g, &[0.0; 3]);
    let w_b = g.constant(Tensor::identity(3));
    let z = dmn_feature_vector(&g, zero, zero, zero, w_b).unwrap();
    assert_eq!(g.value(z).data(), &[0.0; 23]);

    let c = vector(&g, &[1.0, -2.0, 0.5]);
    let m = vector(&g, &[0.3, 0.1, 0.2]);
    let z = g.value(dmn_feature_vector(&g, c, m, c, w_b).unwrap());
    assert_eq!(&z.data()[15..18], &[0.0; 3]);
    assert_eq!(z.data()[21], 1.0 + 4.0 + 0.25);
}

#[test]
fn feature_vector_rejects_mismatched_sizes() {
    let g = Graph::new();
    let w_b = g.constant(Tensor::identity(2));
    let err = dmn_feature_vector(&g, vector(&g, &[1.0, 2.0]), vector(&g, &[1.0]), vector(&g, &[1.0, 2.0]), w_b);
    assert!(matches!(err, Err(Error::Dimension { .. })));
}

#[test]
fn dmn_gate_examples() {
    let g = Graph::new();
    let (c, m, q) = (vector(&g, &[0.2, -0.4]), vector(&g, &[1.0, 0.5]), vector(&g, &[-0.3, 0.8]));
    let p = zero_dmn(&g, 2, 3);
    assert_eq!(scalar(&g, dmn_gate(&g, c, m, q, &p).unwrap()), 0.5);

    let p = DmnGateParams { b2: vector(&g, &[5.0]), ..zero_dmn(&g, 2, 3) };
    assert!((scalar(&g, dmn_gate(&g, c, m, q, &p).unwrap()) - 0.993307).abs() < 1e-6);

    // h = 1, W1 picks the cᵀW_b q feature
    let mut w1 = vec![0.0; feature_len(2)];
    w1[14] = 1.0;
    let w_b = tensor(&g, &[2, 2], vec![0.5, -1.0, 2.0, 0.25]);
    let p = DmnGateParams {
        w_b,
        w1: tensor(&g, &[1, 16], w1),
        b1: vector(&g, &[0.1]),
        w2: tensor(&g, &[1, 1], vec![-2.0]),
        b2: vector(&g, &[0.3]),
    };
    let wq = [0.5 * -0.3 + -1.0 * 0.8, 2.0 * -0.3 + 0.25 * 0.8];
    let sim: f64 = 0.2 * wq[0] + -0.4 * wq[1];
    let expected = sigmoid(-2.0 * (sim + 0.1).tanh() + 0.3);
    assert!((scalar(&g, dmn_gate(&g, c, m, q, &p).unwrap()) - expected).abs() < 1e-15);
}

#[test]
fn ntn_gate_examples() {
    let g = Graph::new();
    let (c, m, q) = (vector(&g, &[1.0]), vector(&g, &[-0.7]), vector(&g, &[3.0]));
    assert_eq!(scalar(&g, ntn_gate(&g, c, m, q, &zero_ntn(&g, 1, 1), false).unwrap()), 0.5);

    let p = NtnGateParams {
        w_cq: tensor(&g, &[1, 1, 1], vec![2.0]),
        w2: tensor(&g, &[1, 1], vec![1.0]),
        ..zero_ntn(&g, 1, 1)
    };
    let out = scalar(&g, ntn_gate(&g, c, m, q, &p, false).unwrap());
    assert!((out - 0.731056).abs() < 1e-6, "{out}");
    assert_eq!(out, sigmoid(6f64.tanh()));

    let p =
        NtnGateParams { b_r: vector(&g, &[10.0, 10.0]), w2: tensor(&g, &[1, 2], vec![1.0, 1.0]), ..zero_ntn(&g, 1, 2) };
    let out = scalar(&g, ntn_gate(&g, c, m, q, &p, false).unwrap());
    assert!((out - 0.880797).abs() < 1e-6, "{out}");
}

#[test]
fn ntn_three_way_term_is_a_full_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = Graph::new();
    let (d, k) = (3, 2);
    let w3 = uniform(&mut rng, &[k, d, d, d], 1.0);
    let (cv, qv, mv) = (random_vec(&mut rng, d), random_vec(&mut rng, d), random_vec(&mut rng, d));
    let p = NtnGateParams { w_r3: Some(g.constant(w3.clone())), ..zero_ntn(&g, d, k) };
    let (c, m, q) = (vector(&g, &cv), vector(&g, &mv), vector(&g, &qv));
    let s = g.value(ntn_preactivation(&g, c, m, q, &p, true).unwrap());
    for l in 0..k {
        let mut t = 0.0;
        for a in 0..d {
            for b in 0..d {
                for e in 0..d {
                    t += cv[a] * qv[b] * mv[e] * w3.get(&[l, a, b, e]).unwrap();
                }
            }
        }
        assert!((s.data()[l] - t).abs() < 1e-12);
    }
    // without the flag the tensor is ignored
    let s = g.value(ntn_preactivation(&g, c, m, q, &p, false).unwrap());
    assert_eq!(s.data(), &[0.0; 2]);
}

#[test]
fn three_way_without_tensor_is_a_config_error() {
    let g = Graph::new();
    let v = vector(&g, &[1.0, 2.0]);
    assert!(matches!(ntn_gate(&g, v, v, v, &zero_ntn(&g, 2, 2), true), Err(Error::Config(_))));
}

#[test]
fn ntn_and_xntn_reject_mismatched_sizes() {
    let g = Graph::new();
    let (a, b) = (vector(&g, &[1.0, 2.0]), vector(&g, &[1.0]));
    assert!(matches!(ntn_gate(&g, a, b, a, &zero_ntn(&g, 2, 2), false), Err(Error::Dimension { .. })));
    assert!(matches!(xntn_gate(&g, a, a, b, &zero_xntn(&g, 2, 2)), Err(Error::Dimension { .. })));
}

#[test]
fn xntn_gate_examples() {
    let g = Graph::new();
    let (c, m, q) = (vector(&g, &[0.3]), vector(&g, &[0.4]), vector(&g, &[0.0]));
    assert_eq!(scalar(&g, xntn_gate(&g, c, m, q, &zero_xntn(&g, 1, 2)).unwrap()), 0.5);

    let p = XntnGateParams {
        w_r: g.constant(Tensor::new(vec![1, 3, 3], Tensor::identity(3).into_vec()).unwrap()),
        w2: tensor(&g, &[1, 1], vec![1.0]),
        ..zero_xntn(&g, 1, 1)
    };
    let out = scalar(&g, xntn_gate(&g, c, m, q, &p).unwrap());
    assert!((out - 0.560_925_418).abs() < 1e-9, "{out}");
}

#[test]
fn reference_score_examples() {
    let g = Graph::new();
    let e1 = vector(&g, &[0.5, -1.0, 2.0]);
    let e2 = vector(&g, &[1.5, 0.25, -0.5]);
    let eye = g.constant(Tensor::identity(3));
    let expected_dot = 0.75 - 0.25 - 1.0;

    let p = RelationParams::Distance { w1: eye, w2: eye };
    assert_eq!(scalar(&g, reference_score(&g, ReferenceKind::Distance, e1, e1, &p).unwrap()), 0.0);

    let p = RelationParams::Bilinear { w: eye };
    assert_eq!(scalar(&g, reference_score(&g, ReferenceKind::Bilinear, e1, e2, &p).unwrap()), expected_dot);

    let ones = vector(&g, &[1.0; 3]);
    let zero = vector(&g, &[0.0; 3]);
    let p = RelationParams::Hadamard { w1: eye, w2: eye, w_rel1: eye, w_rel2: eye, relation: ones, b1: zero, b2: zero };
    assert_eq!(scalar(&g, reference_score(&g, ReferenceKind::Hadamard, e1, e2, &p).unwrap()), expected_dot);

    let u = vector(&g, &[1.0, -1.0, 0.5]);
    let p = RelationParams::SingleLayer { u, w1: eye, w2: eye, bias: None };
    let want = 2f64.tanh() - (-0.75f64).tanh() + 0.5 * 1.5f64.tanh();
    assert!((scalar(&g, reference_score(&g, ReferenceKind::SingleLayer, e1, e2, &p).unwrap()) - want).abs() < 1e-15);
}

#[test]
fn reference_kind_parsing_and_mismatch() {
    for kind in ReferenceKind::ALL {
        assert_eq!(kind.name().parse::<ReferenceKind>().unwrap(), kind);
    }
    assert!(matches!("cosine".parse::<ReferenceKind>(), Err(Error::Config(_))));

    let g = Graph::new();
    let e = vector(&g, &[1.0]);
    let p = RelationParams::Bilinear { w: g.constant(Tensor::identity(1)) };
    assert!(matches!(reference_score(&g, ReferenceKind::Distance, e, e, &p), Err(Error::Config(_))));
}

#[test]
fn scorer_kind_parsing() {
    for kind in ScorerKind::ALL {
        assert_eq!(kind.to_string().parse::<ScorerKind>().unwrap(), kind);
    }
    assert!(matches!("ntn".parse::<ScorerKind>(), Err(Error::Config(_))));
}

/// xntn slice with only the (c rows, q columns) block set reproduces `cᵀBq`.
#[test]
fn bilinear_encapsulation_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let d = rng.gen_range(1..6);
        let n = 3 * d;
        let b = uniform(&mut rng, &[d, d], 2.0);
        let mut w = vec![0.0; n * n];
        for a in 0..d {
            for e in 0..d {
                // z = [c; m; q]: c rows 0..d, q columns 2d..3d
                w[a * n + 2 * d + e] = b.get(&[a, e]).unwrap();
            }
        }
        let g = Graph::new();
        let p = XntnGateParams { w_r: tensor(&g, &[1, n, n], w), ..zero_xntn(&g, d, 1) };
        let (c, m, q) = (
            vector(&g, &random_vec(&mut rng, d)),
            vector(&g, &random_vec(&mut rng, d)),
            vector(&g, &random_vec(&mut rng, d)),
        );
        let slice = scalar(&g, xntn_preactivation(&g, c, m, q, &p).unwrap());
        let reference = RelationParams::Bilinear { w: g.constant(b) };
        let want = scalar(&g, reference_score(&g, ReferenceKind::Bilinear, c, q, &reference).unwrap());
        assert!((slice - want).abs() <= 1e-12 * want.abs().max(1.0), "{slice} vs {want}");
    }
}

/// NTN with zero slices and `V_R` holding two blocks reproduces σ(single-layer score).
#[test]
fn single_layer_encapsulation_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let d = rng.gen_range(1..6);
        let k = rng.gen_range(1..5);
        let w1 = uniform(&mut rng, &[k, d], 1.5);
        let w2 = uniform(&mut rng, &[k, d], 1.5);
        let u = uniform(&mut rng, &[k], 1.5);
        let bias = uniform(&mut rng, &[k], 0.5);
        let g = Graph::new();
        let (c, m, q) = (
            vector(&g, &random_vec(&mut rng, d)),
            vector(&g, &random_vec(&mut rng, d)),
            vector(&g, &random_vec(&mut rng, d)),
        );
        let reference = RelationParams::SingleLayer {
            u: g.constant(u.clone()),
            w1: g.constant(w1.clone()),
            w2: g.constant(w2.clone()),
            bias: Some(g.constant(bias.clone())),
        };
        // second entity in the q block, then in the m block; z order is [c; q; m]
        for (second, block) in [(q, 1), (m, 2)] {
            let mut v = vec![0.0; k * 3 * d];
            for l in 0..k {
                for a in 0..d {
                    v[l * 3 * d + a] = w1.get(&[l, a]).unwrap();
                    v[l * 3 * d + block * d + a] = w2.get(&[l, a]).unwrap();
                }
            }
            let p = NtnGateParams {
                v_r: tensor(&g, &[k, 3 * d], v),
                b_r: g.constant(bias.clone()),
                w2: g.constant(Tensor::new(vec![1, k], u.data().to_vec()).unwrap()),
                ..zero_ntn(&g, d, k)
            };
            let gate = scalar(&g, ntn_gate(&g, c, m, q, &p, false).unwrap());
            let score = scalar(&g, reference_score(&g, ReferenceKind::SingleLayer, c, second, &reference).unwrap());
            assert!((gate - sigmoid(score)).abs() <= 1e-12, "{gate} vs {}", sigmoid(score));
        }
    }
}

#[test]
fn swapping_fact_and_question_changes_ntn_gate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut found = 0;
    for seed in 0..20u64 {
        let mut store = ParameterStore::new();
        let dims = ScorerDims { hidden: 4, slices: 3, gate_hidden: 3 };
        init_scorer(&mut store, "gate", ScorerKind::Ntn2, dims, &mut ChaCha8Rng::seed_from_u64(seed));
        let g = Graph::new();
        let scorer = GateScorer::bind(&g, &store, "gate", ScorerKind::Ntn2).unwrap();
        let (c, m, q) = (
            vector(&g, &random_vec(&mut rng, 4)),
            vector(&g, &random_vec(&mut rng, 4)),
            vector(&g, &random_vec(&mut rng, 4)),
        );
        let a = scalar(&g, scorer.score(&g, c, m, q).unwrap());
        let b = scalar(&g, scorer.score(&g, q, m, c).unwrap());
        if (a - b).abs() > 1e-9 {
            found += 1;
        }
    }
    assert!(found >= 1);
}

fn scorer_store(kind: ScorerKind, seed: u64) -> ParameterStore {
    let mut store = ParameterStore::new();
    let dims = ScorerDims { hidden: 4, slices: 3, gate_hidden: 3 };
    init_scorer(&mut store, "gate", kind, dims, &mut ChaCha8Rng::seed_from_u64(seed));
    store
}

#[test]
fn every_scorer_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();
    for kind in ScorerKind::ALL {
        let mut store = scorer_store(kind, 3);
        // nonzero biases so every parameter carries gradient
        for (name, p) in store.iter().map(|(n, p)| (n.to_string(), p.tensor.clone())).collect::<Vec<_>>() {
            if name.contains(".b") {
                store.insert(name, ParamKind::Bias, uniform(&mut rng, p.shape(), 0.3));
            }
        }
        // inputs are trainable too
        for (i, v) in inputs.iter().enumerate() {
            store.insert(format!("input{i}"), ParamKind::Weight, Tensor::vector(v.clone()));
        }
        let err = gradient_check(
            |g, s| {
                let scorer = GateScorer::bind(g, s, "gate", kind)?;
                let c = s.bind(g, "input0")?;
                let m = s.bind(g, "input1")?;
                let q = s.bind(g, "input2")?;
                scorer.score(g, c, m, q)
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!(err <= 1e-4, "{kind}: {err}");
    }
}

#[test]
fn prepared_scoring_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for kind in ScorerKind::ALL {
        let store = scorer_store(kind, 8);
        let g = Graph::new();
        let scorer = GateScorer::bind(&g, &store, "gate", kind).unwrap();
        let q = random(&g, &mut rng, &[4]);
        let prepared = scorer.prepare_question(&g, q).unwrap();
        for _ in 0..3 {
            let m = random(&g, &mut rng, &[4]);
            let memory = scorer.prepare_memory(&g, &prepared, m).unwrap();
            for _ in 0..4 {
                let c = random(&g, &mut rng, &[4]);
                let direct = g.value(scorer.score(&g, c, m, q).unwrap());
                let fast = g.value(scorer.score_prepared(&g, c, &memory).unwrap());
                assert_eq!(direct.data()[0].to_bits(), fast.data()[0].to_bits(), "{kind}");
            }
        }
    }
}

#[test]
fn dmn_features_have_fixed_length() {
    for d in 1..10 {
        let g = Graph::new();
        let v = vector(&g, &vec![0.5; d]);
        let z = dmn_feature_vector(&g, v, v, v, g.constant(Tensor::identity(d))).unwrap();
        assert_eq!(g.shape(z), [7 * d + 2]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gates_stay_strictly_inside_unit_interval(
        seed in any::<u64>(),
        kind in prop::sample::select(ScorerKind::ALL.to_vec()),
        c in prop::collection::vec(-1.0f64..1.0, 4),
        m in prop::collection::vec(-1.0f64..1.0, 4),
        q in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let store = scorer_store(kind, seed);
        let g = Graph::new();
        let scorer = GateScorer::bind(&g, &store, "gate", kind).unwrap();
        let out = scalar(&g, scorer.score(&g, vector(&g, &c), vector(&g, &m), vector(&g, &q)).unwrap());
        prop_assert!(out > 0.0 && out < 1.0);
    }
}
