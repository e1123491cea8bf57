use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::autodiff::{GradientMap, Graph};
use crate::corpus::EncodedSample;
use crate::error::{Error, Result};
use crate::model::{argmax, forward, init_params, rng_stream, ModelConfig, DROPOUT_STREAM, SHUFFLE_STREAM};
use crate::params::{ParamKind, ParameterStore};
use crate::tensor::Tensor;

use super::adam::{adam_step, AdamState};

/// Summary of one epoch. Loss and accuracy come from the forward passes made
/// while training, before each batch's update.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Optimizer steps completed so far.
    pub step: u64,
    /// Mean objective: cross-entropy plus weight penalty.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    pub log: Vec<EpochLog>,
    pub optimizer: AdamState,
}

/// One sample's contribution to a batch.
struct SampleResult {
    loss: f64,
    correct: bool,
    grads: GradientMap,
}

fn sample_gradient(
    store: &ParameterStore,
    cfg: &ModelConfig,
    sample: &EncodedSample,
    dropout_position: u128,
) -> Result<SampleResult> {
    let g = Graph::new();
    let mut rng = (cfg.dropout > 0.0).then(|| {
        let mut r = rng_stream(cfg.seed, DROPOUT_STREAM);
        r.set_word_pos(dropout_position);
        r
    });
    let out = forward(&g, sample, store, cfg, rng.as_mut())?;
    let correct = argmax(g.value(out.logits).data()) == sample.answer_id.index();
    let ce = g.cross_entropy(out.logits, sample.answer_id.index())?;
    Ok(SampleResult { loss: g.scalar(ce)?, correct, grads: g.backward(ce)? })
}

/// Dropout words reserved per sample on the mask stream.
const DROPOUT_WORDS_PER_SAMPLE: u128 = 1 << 24;

/// Runs `cfg.epochs` epochs of mini-batch Adam from fresh parameters.
pub fn train(cfg: &ModelConfig, corpus: &[EncodedSample], vocab: usize) -> Result<TrainOutcome> {
    let params = init_params(cfg, vocab)?;
    train_from(cfg, params, corpus, |_| {})
}

/// Trains `params` in place of a fresh start, reporting each epoch to `on_epoch`.
///
/// Per-sample gradients may be computed on worker threads; they are summed in
/// batch order so the result does not depend on the thread count.
pub fn train_from(
    cfg: &ModelConfig,
    mut params: ParameterStore,
    corpus: &[EncodedSample],
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::arg("training corpus is empty"));
    }
    let mut optimizer = AdamState::new(cfg.lr);
    let mut shuffle = rng_stream(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut seen: u128 = 0;
    let weights: Vec<String> = params.weight_names().map(String::from).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut correct, mut batches) = (0.0, 0usize, 0usize);
        for (batch_index, batch) in order.chunks(cfg.batch).enumerate() {
            let base = seen;
            let results: Vec<Result<SampleResult>> = batch
                .par_iter()
                .enumerate()
                .map(|(i, &idx)| {
                    sample_gradient(&params, cfg, &corpus[idx], (base + i as u128) * DROPOUT_WORDS_PER_SAMPLE)
                })
                .collect();
            seen += batch.len() as u128;

            let scale = 1.0 / batch.len() as f64;
            let mut grads = GradientMap::new();
            let mut batch_loss = 0.0;
            for result in results {
                let r = result.map_err(|e| match e {
                    Error::Numeric(op) => Error::Numeric(format!(
                        "non-finite value in `{op}` at epoch {epoch}, batch {}",
                        batch_index + 1
                    )),
                    other => other,
                })?;
                batch_loss += r.loss;
                correct += usize::from(r.correct);
                for (name, g) in r.grads {
                    match grads.get_mut(&name) {
                        Some(acc) => {
                            for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                                *a += v;
                            }
                        }
                        None => {
                            grads.insert(name, g);
                        }
                    }
                }
            }
            for g in grads.values_mut() {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            let mut penalty = 0.0;
            if cfg.l2 > 0.0 {
                for name in &weights {
                    let w = params.get(name).expect("weight names come from the store");
                    penalty += w.sum_squares();
                    let entry = grads
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(w.shape().to_vec()).expect("parameter shape is valid"));
                    for (a, x) in entry.data_mut().iter_mut().zip(w.data()) {
                        *a += 2.0 * cfg.l2 * x;
                    }
                }
            }
            let batch_loss = batch_loss * scale + cfg.l2 * penalty;
            if !batch_loss.is_finite() || grads.values().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {}",
                    batch_index + 1
                )));
            }
            if cfg.clip > 0.0 {
                clip_global_norm(&mut grads, cfg.clip);
            }
            adam_step(&mut params, &grads, &mut optimizer)?;
            loss_sum += batch_loss;
            batches += 1;
        }
        let entry = EpochLog {
            epoch,
            step: optimizer.step(),
            loss: loss_sum / batches as f64,
            accuracy: 100.0 * correct as f64 / corpus.len() as f64,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { params, log, optimizer })
}

/// Rescales every gradient so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut GradientMap, max_norm: f64) -> f64 {
    let norm = grads.values().map(Tensor::sum_squares).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.values_mut() {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
    norm
}

/// Mean objective (cross-entropy plus weight penalty) and accuracy over
/// `samples` with the current parameters.
pub fn corpus_loss(store: &ParameterStore, cfg: &ModelConfig, samples: &[EncodedSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::arg("no samples to score"));
    }
    let per: Vec<Result<(f64, bool)>> = samples
        .par_iter()
        .map(|s| {
            let g = Graph::new();
            let out = forward(&g, s, store, cfg, None)?;
            let ce = g.cross_entropy(out.logits, s.answer_id.index())?;
            Ok((g.scalar(ce)?, argmax(g.value(out.logits).data()) == s.answer_id.index()))
        })
        .collect();
    let (mut total, mut correct) = (0.0, 0usize);
    for r in per {
        let (l, c) = r?;
        total += l;
        correct += usize::from(c);
    }
    let penalty: f64 =
        store.iter().filter(|(_, p)| p.kind == ParamKind::Weight).map(|(_, p)| p.tensor.sum_squares()).sum();
    let n = samples.len() as f64;
    Ok((total / n + cfg.l2 * penalty, 100.0 * correct as f64 / n))
}
