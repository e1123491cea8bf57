use std::collections::HashMap;

use super::parse::Story;
use crate::error::{Error, Result};

/// Vocabulary index of a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const EOS: TokenId = TokenId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const PAD_TOKEN: &str = "<pad>";
pub const EOS_TOKEN: &str = "<eos>";

/// Insertion-ordered token ↔ id map. Ids 0 and 1 are padding and end-of-sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the two reserved tokens.
    pub fn new() -> Self {
        let mut v = Vocabulary { tokens: Vec::new(), ids: HashMap::new() };
        v.insert(PAD_TOKEN);
        v.insert(EOS_TOKEN);
        v
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != EOS_TOKEN {
            return Err(Error::arg("vocabulary must start with the reserved tokens"));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::arg(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    /// Returns the id of `token`, adding it if new.
    pub fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = TokenId(self.tokens.len() as u32);
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    /// Like [`Vocabulary::id`] but failing with a vocabulary error.
    pub fn lookup(&self, token: &str) -> Result<TokenId> {
        self.id(token).ok_or_else(|| Error::Vocabulary(token.to_string()))
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn extend_from(&mut self, stories: &[Story]) {
        for story in stories {
            let mut qas = story.qas.iter();
            for s in &story.sentences {
                for t in &s.tokens {
                    self.insert(t);
                }
                if s.is_question {
                    if let Some(qa) = qas.next() {
                        self.insert(&qa.answer);
                    }
                }
            }
        }
    }
}

/// Vocabulary closed over both splits, in first-occurrence order.
pub fn build_vocabulary(train: &[Story], test: &[Story]) -> Vocabulary {
    let mut v = Vocabulary::new();
    v.extend_from(train);
    v.extend_from(test);
    v
}
