//! Episodic memory model (DMN / DMTN), the memory-network baseline, and the
//! shared configuration.

mod config;
mod episodic;
mod memn2n;
mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Graph;
use crate::corpus::EncodedSample;
use crate::error::Result;
use crate::params::ParameterStore;

pub use config::{parse_key_values, Architecture, ModelConfig, CONFIG_KEYS};
pub use episodic::{
    answer_logits, dmtn_forward, episode_pass, init_episodic, loss, memory_update, weight_penalty, EpisodicParams,
    Forward, ANSWER_BIAS, ANSWER_WEIGHT, EMBEDDING, EMBEDDING_INIT, EPISODE_GRU, INPUT_GRU, MEMORY_GRU,
};
pub use memn2n::{embed_bow, init_memn2n, memn2n_forward, memn2n_hop, MemN2NParams};
pub use trace::GateTrace;

/// RNG stream for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// RNG stream for per-epoch shuffling.
pub const SHUFFLE_STREAM: u64 = 1;
/// RNG stream for dropout masks.
pub const DROPOUT_STREAM: u64 = 2;

/// Seeded generator on one of the named streams.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fresh parameters for `cfg` over a vocabulary of `vocab` tokens.
pub fn init_params(cfg: &ModelConfig, vocab: usize) -> Result<ParameterStore> {
    cfg.validate()?;
    let mut rng = rng_stream(cfg.seed, INIT_STREAM);
    let mut store = ParameterStore::new();
    if cfg.model.is_episodic() {
        init_episodic(&mut store, cfg, vocab, &mut rng);
    } else {
        init_memn2n(&mut store, cfg, vocab, &mut rng);
    }
    Ok(store)
}

/// Forward pass of whichever architecture `cfg` selects.
pub fn forward(
    g: &Graph,
    sample: &EncodedSample,
    store: &ParameterStore,
    cfg: &ModelConfig,
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<Forward> {
    if cfg.model.is_episodic() {
        dmtn_forward(g, sample, store, cfg, dropout)
    } else {
        memn2n_forward(g, sample, store, cfg)
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
