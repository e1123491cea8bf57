use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::Graph;
use crate::corpus::{EncodedSample, TokenId};
use crate::error::{Error, Result};
use crate::model::{argmax, forward, ModelConfig};
use crate::params::ParameterStore;

/// Pass threshold on test accuracy, in percent.
pub const PASS_ACCURACY: f64 = 95.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: u8,
    pub samples: usize,
    pub correct: usize,
    /// Percent, `100 · correct / samples`.
    pub accuracy: f64,
    pub passed: bool,
}

impl EvalReport {
    pub fn from_counts(task: u8, correct: usize, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::arg("accuracy is undefined over zero samples"));
        }
        if correct > samples {
            return Err(Error::arg(format!("{correct} correct out of {samples} samples")));
        }
        Ok(EvalReport {
            task,
            samples,
            correct,
            accuracy: 100.0 * correct as f64 / samples as f64,
            // integer form of accuracy ≥ 95 so the boundary is exact
            passed: 100 * correct >= 95 * samples,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report fields are plain numbers")
    }
}

/// Most likely answer token.
pub fn predict(store: &ParameterStore, cfg: &ModelConfig, sample: &EncodedSample) -> Result<TokenId> {
    let g = Graph::new();
    let out = forward(&g, sample, store, cfg, None)?;
    Ok(TokenId(argmax(g.value(out.logits).data()) as u32))
}

/// Exact-match accuracy of argmax predictions.
pub fn evaluate(store: &ParameterStore, cfg: &ModelConfig, samples: &[EncodedSample], task: u8) -> Result<EvalReport> {
    let hits: Vec<Result<bool>> =
        samples.par_iter().map(|s| predict(store, cfg, s).map(|p| p == s.answer_id)).collect();
    let mut correct = 0;
    for h in hits {
        correct += usize::from(h?);
    }
    EvalReport::from_counts(task, correct, samples.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_inclusive() {
        let r = EvalReport::from_counts(1, 950, 1000).unwrap();
        assert_eq!(r.accuracy, 95.0);
        assert!(r.passed);
        let r = EvalReport::from_counts(1, 949, 1000).unwrap();
        assert!((r.accuracy - 94.9).abs() < 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn zero_samples_is_an_argument_error() {
        assert!(matches!(EvalReport::from_counts(1, 0, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn json_has_every_field() {
        let json = EvalReport::from_counts(4, 19, 20).unwrap().to_json();
        assert_eq!(json, r#"{"task":4,"samples":20,"correct":19,"accuracy":95.0,"passed":true}"#);
    }
}
