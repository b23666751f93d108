use std::collections::{BTreeSet, HashMap};

use super::Example;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const GO: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<go>", "<eos>", "<unk>"];

/// Token ↔ id bijection with four reserved ids.
///
/// Ids 0..4 are `<pad>`, `<go>`, `<eos>` and `<unk>`; corpus tokens follow in
/// sorted order, so the mapping depends only on the token set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new()).unwrap()
    }
}

impl Vocabulary {
    /// Vocabulary over every story, question and answer token.
    pub fn build<'a>(examples: impl IntoIterator<Item = &'a Example<String>>) -> Self {
        let mut set = BTreeSet::new();
        for e in examples {
            for tok in e.story.iter().flatten().chain(&e.question).chain(&e.answer) {
                set.insert(tok.to_lowercase());
            }
        }
        Self::from_tokens(set).unwrap()
    }

    /// Rebuild from the non-reserved tokens in id order (checkpoint loading).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        all.extend(tokens.into_iter().map(Into::into));
        let mut index = HashMap::with_capacity(all.len());
        for (i, t) in all.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Format(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens: all, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.id(&token.to_lowercase()).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Corpus tokens (everything after the reserved block), in id order.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    fn strict(&self, toks: &[String]) -> Result<Vec<usize>> {
        toks.iter()
            .map(|t| {
                self.id(t)
                    .ok_or_else(|| Error::Data(format!("token {t:?} is not in the vocabulary")))
            })
            .collect()
    }

    /// Encode, rejecting out-of-vocabulary tokens.
    pub fn encode(&self, e: &Example<String>) -> Result<Example> {
        Ok(Example {
            story: e
                .story
                .iter()
                .map(|s| self.strict(s))
                .collect::<Result<_>>()?,
            lines: e.lines.clone(),
            question: self.strict(&e.question)?,
            answer: self.strict(&e.answer)?,
            supporting: e.supporting.clone(),
        })
    }

    pub fn encode_all(&self, examples: &[Example<String>]) -> Result<Vec<Example>> {
        examples.iter().map(|e| self.encode(e)).collect()
    }

    /// Encode, mapping unknown tokens to `<unk>`.
    pub fn encode_lossy(&self, e: &Example<String>) -> Example {
        let f = |s: &[String]| s.iter().map(|t| self.id_or_unk(t)).collect::<Vec<_>>();
        Example {
            story: e.story.iter().map(|s| f(s)).collect(),
            lines: e.lines.clone(),
            question: f(&e.question),
            answer: f(&e.answer),
            supporting: e.supporting.clone(),
        }
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i)).collect()
    }
}
