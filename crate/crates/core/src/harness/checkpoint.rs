//! Binary checkpoint: magic, version, config text, vocabulary, tensors.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! b"DMTNCKPT"  u32 version
//! u32 len, config text (key=value lines)
//! u32 count, count × (u32 len, token bytes)
//! u32 count, count × (u32 len, name, u8 kind, u8 rank, rank × u64 dim, f64 values)
//! ```

use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::params::{ParamKind, ParameterStore};
use crate::tensor::{Tensor, MAX_RANK};

pub const MAGIC: &[u8; 8] = b"DMTNCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParameterStore,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint(params: &ParameterStore, config: &ModelConfig, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &config.to_text());
    put_u32(&mut out, vocab.len());
    for token in vocab.tokens() {
        put_str(&mut out, token);
    }
    put_u32(&mut out, params.len());
    for (name, p) in params.iter() {
        put_str(&mut out, name);
        out.push(p.kind.tag());
        out.push(p.tensor.rank() as u8);
        for &d in p.tensor.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format { offset: self.pos as u64, message: message.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("eight bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let start = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Format { offset: start as u64, message: format!("{what} is not UTF-8") })
    }
}

/// Parses a whole checkpoint; nothing is returned unless every byte checks out.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Format { offset: 0, message: "not a checkpoint (bad magic)".into() });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let config_at = r.pos;
    let text = r.string("config")?;
    let config = ModelConfig::from_text(&text)
        .map_err(|e| Error::Format { offset: config_at as u64, message: format!("bad config: {e}") })?;

    let vocab_at = r.pos;
    let count = r.u32("vocabulary size")? as usize;
    let mut tokens = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        tokens.push(r.string("token")?);
    }
    let vocab = Vocabulary::from_tokens(tokens)
        .map_err(|e| Error::Format { offset: vocab_at as u64, message: format!("bad vocabulary: {e}") })?;

    let count = r.u32("tensor count")? as usize;
    let mut params = ParameterStore::new();
    for _ in 0..count {
        let name = r.string("tensor name")?;
        let kind_at = r.pos;
        let kind = ParamKind::from_tag(r.u8("kind")?)
            .ok_or_else(|| Error::Format { offset: kind_at as u64, message: format!("unknown kind for `{name}`") })?;
        let rank = r.u8("rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(r.fail(format!("rank {rank} out of range for `{name}`")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut total: usize = 1;
        for _ in 0..rank {
            let d = r.u64("dimension")? as usize;
            total = total.checked_mul(d).ok_or_else(|| r.fail("tensor size overflows"))?;
            shape.push(d);
        }
        let bytes_needed = total.checked_mul(8).ok_or_else(|| r.fail("tensor size overflows"))?;
        let raw = r.take(bytes_needed, "tensor values")?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect();
        let tensor = Tensor::new(shape, data).map_err(|e| r.fail(format!("tensor `{name}`: {e}")))?;
        if params.contains(&name) {
            return Err(r.fail(format!("duplicate tensor `{name}`")));
        }
        params.insert(name, kind, tensor);
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last tensor"));
    }
    Ok(Checkpoint { config, vocab, params })
}

pub fn save_checkpoint(path: &Path, params: &ParameterStore, config: &ModelConfig, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, encode_checkpoint(params, config, vocab))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}
