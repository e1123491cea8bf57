use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autodiff::Graph;
use crate::corpus::{EncodedSample, TokenId, Vocabulary};
use crate::error::Result;
use crate::model::{argmax, forward, GateTrace, ModelConfig};
use crate::params::ParameterStore;

/// Printed gates are clamped to this margin so six decimals never show 0 or 1.
pub const TRACE_MARGIN: f64 = 1e-6;

fn decode(vocab: &Vocabulary, ids: &[TokenId]) -> String {
    ids.iter().map(|&id| vocab.token(id).unwrap_or("<unk>")).collect::<Vec<_>>().join(" ")
}

/// CSV text: `#` metadata lines, a `fact_1..fact_T` header, one row per hop.
pub fn render_gate_trace(trace: &GateTrace, vocab: &Vocabulary, sample: &EncodedSample, predicted: TokenId) -> String {
    let mut out = String::new();
    let word = |id: TokenId| vocab.token(id).unwrap_or("<unk>").to_string();
    let _ = writeln!(out, "# question: {}", decode(vocab, &sample.question_ids));
    let _ = writeln!(out, "# predicted: {}", word(predicted));
    let _ = writeln!(out, "# gold: {}", word(sample.answer_id));
    for (i, s) in sample.sentences().enumerate() {
        let _ = writeln!(out, "# fact_{}: {}", i + 1, decode(vocab, s));
    }
    let header: Vec<String> = (1..=trace.facts()).map(|t| format!("fact_{t}")).collect();
    let _ = writeln!(out, "{}", header.join(","));
    for row in trace.rows() {
        let cells: Vec<String> =
            row.iter().map(|v| format!("{:.6}", v.clamp(TRACE_MARGIN, 1.0 - TRACE_MARGIN))).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// Runs the model on `sample` and writes its gate trace to `destination`.
pub fn export_gate_trace(
    store: &ParameterStore,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    sample: &EncodedSample,
    destination: &Path,
) -> Result<GateTrace> {
    let g = Graph::new();
    let out = forward(&g, sample, store, cfg, None)?;
    let predicted = TokenId(argmax(g.value(out.logits).data()) as u32);
    fs::write(destination, render_gate_trace(&out.trace, vocab, sample, predicted))?;
    Ok(out.trace)
}
