//! Named trainable tensors and their initializers.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Role of a parameter, which decides whether L2 regularization applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    /// Weight matrices and slice tensors; penalized by L2.
    Weight,
    Bias,
    Embedding,
}

impl ParamKind {
    pub fn tag(self) -> u8 {
        match self {
            ParamKind::Weight => 0,
            ParamKind::Bias => 1,
            ParamKind::Embedding => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ParamKind::Weight),
            1 => Some(ParamKind::Bias),
            2 => Some(ParamKind::Embedding),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub tensor: Tensor,
    pub kind: ParamKind,
}

/// Ordered map from parameter name to tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: BTreeMap<String, Parameter>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, kind: ParamKind, tensor: Tensor) {
        self.entries.insert(name.into(), Parameter { tensor, kind });
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|p| &p.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name).map(|p| &mut p.tensor)
    }

    pub fn kind(&self, name: &str) -> Option<ParamKind> {
        self.entries.get(name).map(|p| p.kind)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|p| p.tensor.len()).sum()
    }

    /// Records `name` on `graph` as a trainable leaf.
    pub fn bind(&self, graph: &Graph, name: &str) -> Result<Var> {
        let tensor = self.get(name).ok_or_else(|| Error::config(format!("missing parameter `{name}`")))?;
        Ok(graph.param(name, tensor))
    }

    pub fn bind_optional(&self, graph: &Graph, name: &str) -> Option<Var> {
        self.get(name).map(|t| graph.param(name, t))
    }

    /// Names of the tensors that carry an L2 penalty.
    pub fn weight_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|(_, p)| p.kind == ParamKind::Weight).map(|(k, _)| k.as_str())
    }
}

/// Xavier-uniform tensor: entries in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier<R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, limit)
}

pub fn uniform<R: Rng>(rng: &mut R, shape: &[usize], limit: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}

pub fn zeros(shape: &[usize]) -> Tensor {
    Tensor::from_parts(shape.to_vec(), vec![0.0; shape.iter().product()])
}

/// Overwrites rows of an embedding table from a word-vector text file
/// (`token v1 v2 ... vD` per line). Returns how many rows were replaced;
/// tokens absent from `lookup` are skipped.
pub fn load_word_vectors<B: BufRead>(
    reader: B,
    table: &mut Tensor,
    lookup: impl Fn(&str) -> Option<usize>,
) -> Result<usize> {
    if table.rank() != 2 {
        return Err(Error::arg("embedding table must be a matrix"));
    }
    let dim = table.shape()[1];
    let mut replaced = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse { line: lineno + 1, message: format!("`{f}` is not a number") })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        if let Some(row) = lookup(&token.to_lowercase()) {
            table.data_mut()[row * dim..(row + 1) * dim].copy_from_slice(&values);
            replaced += 1;
        }
    }
    Ok(replaced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xavier_respects_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = xavier(&mut rng, &[10, 20], 20, 10);
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= limit));
        assert!(t.data().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn word_vectors_fill_known_rows() {
        let mut table = zeros(&[3, 2]);
        let text = "Mary 1 2\nunknown 5 5\nhallway 3 4\n";
        let n = load_word_vectors(text.as_bytes(), &mut table, |t| match t {
            "mary" => Some(1),
            "hallway" => Some(2),
            _ => None,
        })
        .unwrap();
        assert_eq!(n, 2);
        assert_eq!(table.data(), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn word_vectors_reject_wrong_width() {
        let mut table = zeros(&[2, 3]);
        let err = load_word_vectors("mary 1 2\n".as_bytes(), &mut table, |_| Some(0)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn bind_reuses_handle() {
        let mut store = ParameterStore::new();
        store.insert("w", ParamKind::Weight, Tensor::vector(vec![1.0]));
        let g = Graph::new();
        let a = store.bind(&g, "w").unwrap();
        let b = store.bind(&g, "w").unwrap();
        assert_eq!(a, b);
        assert!(store.bind(&g, "missing").is_err());
    }
}
