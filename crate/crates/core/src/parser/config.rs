use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::parser::transition::TransitionSystem;

/// Number of feature slots: `s0, s1, s2, b0, lc(s0), lc(b0)`.
pub const N_SLOTS: usize = 6;

/// Dimensions and training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParserConfig {
    pub system: TransitionSystem,
    pub word_dim: usize,
    pub char_dim: usize,
    /// Per-direction state size of the character encoder.
    pub rnn_dim: usize,
    pub tb_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Forms seen fewer times than this map to the unknown-word row.
    pub min_word_freq: usize,
    /// Probability of replacing a known word by the unknown-word row in training.
    pub word_dropout: f64,
    /// Half-width of the uniform initialisation of embedding tables.
    pub embedding_init: f64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            system: TransitionSystem::ArcHybrid,
            word_dim: 32,
            char_dim: 16,
            rnn_dim: 32,
            tb_dim: 12,
            hidden: 64,
            epochs: 8,
            learning_rate: 0.02,
            min_word_freq: 2,
            word_dropout: 0.1,
            embedding_init: 0.25,
        }
    }
}

impl ParserConfig {
    /// Size of the token encoding: word, both character-encoder states and
    /// the treebank vector.
    pub fn token_dim(&self) -> usize {
        self.word_dim + 2 * self.rnn_dim + self.tb_dim
    }

    /// Size of the part of the encoding that does not depend on the
    /// treebank vector.
    pub fn lexical_dim(&self) -> usize {
        self.word_dim + 2 * self.rnn_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("rnn_dim", self.rnn_dim),
            ("tb_dim", self.tb_dim),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.word_dropout) {
            return Err(Error::Config("word_dropout must be in [0, 1)".into()));
        }
        if !(self.embedding_init > 0.0 && self.embedding_init.is_finite()) {
            return Err(Error::Config("embedding_init must be positive".into()));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("system".into(), self.system.to_string());
        m.insert("word_dim".into(), self.word_dim.to_string());
        m.insert("char_dim".into(), self.char_dim.to_string());
        m.insert("rnn_dim".into(), self.rnn_dim.to_string());
        m.insert("tb_dim".into(), self.tb_dim.to_string());
        m.insert("hidden".into(), self.hidden.to_string());
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("learning_rate".into(), self.learning_rate.to_string());
        m.insert("min_word_freq".into(), self.min_word_freq.to_string());
        m.insert("word_dropout".into(), self.word_dropout.to_string());
        m.insert("embedding_init".into(), self.embedding_init.to_string());
        m
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(pairs: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = pairs
                .get(key)
                .ok_or_else(|| Error::Config(format!("missing key {key}")))?;
            raw.parse()
                .map_err(|_| Error::Config(format!("invalid value {raw:?} for {key}")))
        }
        let config = ParserConfig {
            system: pairs
                .get("system")
                .ok_or_else(|| Error::Config("missing key system".into()))?
                .parse()?,
            word_dim: get(pairs, "word_dim")?,
            char_dim: get(pairs, "char_dim")?,
            rnn_dim: get(pairs, "rnn_dim")?,
            tb_dim: get(pairs, "tb_dim")?,
            hidden: get(pairs, "hidden")?,
            epochs: get(pairs, "epochs")?,
            learning_rate: get(pairs, "learning_rate")?,
            min_word_freq: get(pairs, "min_word_freq")?,
            word_dropout: get(pairs, "word_dropout")?,
            embedding_init: get(pairs, "embedding_init")?,
        };
        config.validate()?;
        Ok(config)
    }
}
