use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scoring::ScorerKind;

/// Which network answers the question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Episodic memory with the handcrafted-feature gate.
    Dmn,
    /// Episodic memory with a tensor gate.
    Dmtn,
    /// End-to-end memory network baseline.
    Memn2n,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Dmn, Architecture::Dmtn, Architecture::Memn2n];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Dmn => "dmn",
            Architecture::Dmtn => "dmtn",
            Architecture::Memn2n => "memn2n",
        }
    }

    pub fn is_episodic(self) -> bool {
        self != Architecture::Memn2n
    }

    /// Hop count used when none is given.
    pub fn default_hops(self) -> usize {
        match self {
            Architecture::Memn2n => 3,
            _ => 5,
        }
    }

    /// Gate scorer used when none is given.
    pub fn default_scorer(self) -> ScorerKind {
        match self {
            Architecture::Dmtn => ScorerKind::Ntn2,
            _ => ScorerKind::Dmn,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model `{s}` (expected dmn, dmtn or memn2n)")))
    }
}

/// Every hyperparameter of a run. Serialized as flat `key=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub model: Architecture,
    pub scorer: ScorerKind,
    /// Fact, memory and question width.
    pub hidden: usize,
    /// Tensor slices per gate.
    pub slices: usize,
    pub hops: usize,
    pub embed: usize,
    /// Hidden width of the handcrafted-feature gate.
    pub gate_hidden: usize,
    pub epochs: usize,
    pub l2: f64,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling; `0` disables clipping.
    pub clip: f64,
    /// Adjacent weight tying for the memory-network baseline.
    pub tied: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: Architecture::Dmtn,
            scorer: ScorerKind::Ntn2,
            hidden: 40,
            slices: 40,
            hops: 5,
            embed: 50,
            gate_hidden: 40,
            epochs: 150,
            l2: 1e-4,
            dropout: 0.0,
            lr: 1e-3,
            batch: 32,
            seed: 0,
            clip: 40.0,
            tied: true,
        }
    }
}

pub const CONFIG_KEYS: [&str; 15] = [
    "model",
    "scorer",
    "hidden",
    "slices",
    "hops",
    "embed",
    "gate_hidden",
    "epochs",
    "l2",
    "dropout",
    "lr",
    "batch",
    "seed",
    "clip",
    "tied",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::config(format!("invalid value `{value}` for `{key}`")))
}

impl ModelConfig {
    /// Defaults for `model`, with its default scorer and hop count.
    pub fn for_model(model: Architecture) -> Self {
        ModelConfig { model, scorer: model.default_scorer(), hops: model.default_hops(), ..ModelConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("slices", self.slices),
            ("hops", self.hops),
            ("embed", self.embed),
            ("gate_hidden", self.gate_hidden),
            ("batch", self.batch),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("`{key}` must be positive")));
            }
        }
        for (key, v) in [("l2", self.l2), ("lr", self.lr), ("clip", self.clip)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("`{key}` must be a finite non-negative number, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("`dropout` must lie in [0, 1), got {}", self.dropout)));
        }
        match (self.model, self.scorer) {
            (Architecture::Dmn, s) if s != ScorerKind::Dmn => {
                Err(Error::config(format!("model `dmn` uses the `dmn` gate, not `{s}`")))
            }
            (Architecture::Dmtn, ScorerKind::Dmn) => {
                Err(Error::config("model `dmtn` needs a tensor gate: ntn2, ntn3 or xntn"))
            }
            _ => Ok(()),
        }
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "model" => self.model = value.parse()?,
            "scorer" => self.scorer = value.parse()?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "slices" => self.slices = parse_num(key, value)?,
            "hops" => self.hops = parse_num(key, value)?,
            "embed" => self.embed = parse_num(key, value)?,
            "gate_hidden" => self.gate_hidden = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "l2" => self.l2 = parse_num(key, value)?,
            "dropout" => self.dropout = parse_num(key, value)?,
            "lr" => self.lr = parse_num(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "clip" => self.clip = parse_num(key, value)?,
            "tied" => self.tied = parse_num(key, value)?,
            _ => return Err(Error::config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Field values in [`CONFIG_KEYS`] order. Floats print in shortest
    /// round-trip form so parsing them back is exact.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model", self.model.to_string()),
            ("scorer", self.scorer.to_string()),
            ("hidden", self.hidden.to_string()),
            ("slices", self.slices.to_string()),
            ("hops", self.hops.to_string()),
            ("embed", self.embed.to_string()),
            ("gate_hidden", self.gate_hidden.to_string()),
            ("epochs", self.epochs.to_string()),
            ("l2", self.l2.to_string()),
            ("dropout", self.dropout.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch.to_string()),
            ("seed", self.seed.to_string()),
            ("clip", self.clip.to_string()),
            ("tied", self.tied.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses `key=value` text on top of the defaults for its `model` key.
    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        let model = match pairs.iter().find(|(k, _)| k == "model") {
            Some((_, v)) => v.parse()?,
            None => Architecture::Dmtn,
        };
        let mut cfg = ModelConfig::for_model(model);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Flat `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, got `{line}`") })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse { line: i + 1, message: "empty key".into() });
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = ModelConfig { l2: 3e-4, lr: 0.0123, seed: 99, scorer: ScorerKind::Xntn, ..Default::default() };
        assert_eq!(ModelConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn memn2n_defaults_to_three_hops() {
        let cfg = ModelConfig::from_text("model=memn2n\n").unwrap();
        assert_eq!(cfg.hops, 3);
        assert_eq!(ModelConfig::from_text("model=dmn").unwrap().scorer, ScorerKind::Dmn);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ModelConfig::from_text("hops=0"), Err(Error::Config(_))));
        assert!(matches!(ModelConfig::from_text("colour=red"), Err(Error::Config(_))));
        assert!(matches!(ModelConfig::from_text("lr=fast"), Err(Error::Config(_))));
        assert!(matches!(ModelConfig::from_text("model=dmn\nscorer=ntn2"), Err(Error::Config(_))));
        assert!(matches!(ModelConfig::from_text("just words"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let pairs = parse_key_values("# run\n\n hops = 2 \n").unwrap();
        assert_eq!(pairs, [("hops".to_string(), "2".to_string())]);
    }
}
