use std::collections::BTreeMap;

use crate::data::Example;
use crate::error::{Error, Result};

/// Architecture hyperparameters.
///
/// One `size` serves every embedding and hidden state (question, word,
/// sentence, memory and decoder), and one `depth` every stacked cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub size: usize,
    pub depth: usize,
    pub memories: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    /// Longest sentence in words (the word-level unroll bound).
    pub max_sentence_len: usize,
    /// Longest answer in tokens, including the terminating EOS.
    pub max_answer_len: usize,
}

impl ModelConfig {
    pub fn new(size: usize, depth: usize, memories: usize, vocab_size: usize) -> Self {
        Self {
            size,
            depth,
            memories,
            dropout: 0.0,
            vocab_size,
            max_sentence_len: 0,
            max_answer_len: 2,
        }
    }

    /// Unroll bounds taken from `examples`: the longest sentence, and the
    /// longest answer plus EOS.
    pub fn fitted<T>(
        size: usize,
        depth: usize,
        memories: usize,
        vocab_size: usize,
        examples: &[Example<T>],
    ) -> Self {
        Self {
            max_sentence_len: examples
                .iter()
                .map(Example::max_sentence_len)
                .max()
                .unwrap_or(0),
            max_answer_len: examples.iter().map(|e| e.answer.len()).max().unwrap_or(1) + 1,
            ..Self::new(size, depth, memories, vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("size must be positive".into()));
        }
        if !(1..=3).contains(&self.depth) {
            return Err(Error::Config(format!("depth {} not in 1..=3", self.depth)));
        }
        if self.memories == 0 {
            return Err(Error::Config("at least one memory is required".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config(format!(
                "vocabulary of {} cannot hold the reserved tokens",
                self.vocab_size
            )));
        }
        if self.max_answer_len == 0 {
            return Err(Error::Config(
                "max_answer_len must leave room for EOS".into(),
            ));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("size", self.size.to_string()),
            ("depth", self.depth.to_string()),
            ("memories", self.memories.to_string()),
            ("dropout", self.dropout.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("max_sentence_len", self.max_sentence_len.to_string()),
            ("max_answer_len", self.max_answer_len.to_string()),
        ]
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(p: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = p
                .get(key)
                .ok_or_else(|| Error::Format(format!("config key {key} missing")))?;
            raw.parse()
                .map_err(|_| Error::Format(format!("config key {key} has bad value {raw:?}")))
        }
        let cfg = Self {
            size: get(pairs, "size")?,
            depth: get(pairs, "depth")?,
            memories: get(pairs, "memories")?,
            dropout: get(pairs, "dropout")?,
            vocab_size: get(pairs, "vocab_size")?,
            max_sentence_len: get(pairs, "max_sentence_len")?,
            max_answer_len: get(pairs, "max_answer_len")?,
        };
        cfg.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = ModelConfig::new(32, 1, 1, 20);
        ok.validate().unwrap();
        for bad in [
            ModelConfig {
                depth: 0,
                ..ok.clone()
            },
            ModelConfig {
                depth: 4,
                ..ok.clone()
            },
            ModelConfig {
                memories: 0,
                ..ok.clone()
            },
            ModelConfig {
                dropout: 1.0,
                ..ok.clone()
            },
            ModelConfig {
                vocab_size: 3,
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn pairs_round_trip() {
        let cfg = ModelConfig {
            dropout: 0.1,
            max_sentence_len: 7,
            max_answer_len: 3,
            ..ModelConfig::new(64, 2, 3, 41)
        };
        let map: BTreeMap<String, String> = cfg
            .to_pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(ModelConfig::from_pairs(&map).unwrap(), cfg);
    }
}
