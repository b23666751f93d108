use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::attention::AttentionParams;
use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::params::{Init, ParamId, ParamStore};
use crate::recurrent::StackSpec;
use crate::tensor::Scalar;

/// Initialisation used by [`ModelParams::init`].
pub const DEFAULT_INIT: Init = Init::Glorot;

/// Every learned array of the network, with typed handles into one store.
///
/// The question encoder and the word-level document encoder are the same
/// [`StackSpec`]: [`ModelParams::question_encoder`] and
/// [`ModelParams::word_encoder`] return the same object.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub store: ParamStore<T>,
    /// `|V| × e`, shared by question, story and answer tokens.
    pub embedding: ParamId,
    encoder: StackSpec,
    pub sentence_fwd: StackSpec,
    pub sentence_bwd: StackSpec,
    pub memory_cell: StackSpec,
    pub memory_attention: AttentionParams,
    pub decoder_cell: StackSpec,
    pub decoder_attention: AttentionParams,
    /// `e × |V|`.
    pub output_w: ParamId,
    /// `1 × |V|`.
    pub output_b: ParamId,
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh parameters: Glorot-uniform matrices, GRU gate biases favouring
    /// state retention, other biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::init_with(config, seed, DEFAULT_INIT)
    }

    pub fn init_with(config: &ModelConfig, seed: u64, init: Init) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let (e, v, l) = (config.size, config.vocab_size, config.depth);
        let mut store = ParamStore::new();
        let embedding = store.add_init("embedding", &[v, e], init, rng);
        let encoder = StackSpec::init(&mut store, "word_encoder", l, e, e, init, rng)?;
        let sentence_fwd = StackSpec::init(&mut store, "sentence_fwd", l, e, e, init, rng)?;
        let sentence_bwd = StackSpec::init(&mut store, "sentence_bwd", l, e, e, init, rng)?;
        let memory_cell = StackSpec::init(&mut store, "memory_cell", l, e, e, init, rng)?;
        let memory_attention = AttentionParams::init(&mut store, "memory_attention", e, init, rng);
        let decoder_cell = StackSpec::init(&mut store, "decoder_cell", l, e, e, init, rng)?;
        let decoder_attention =
            AttentionParams::init(&mut store, "decoder_attention", e, init, rng);
        let output_w = store.add_init("output.w", &[e, v], init, rng);
        let output_b = store.add_zeros("output.b", &[1, v]);
        Ok(Self {
            store,
            embedding,
            encoder,
            sentence_fwd,
            sentence_bwd,
            memory_cell,
            memory_attention,
            decoder_cell,
            decoder_attention,
            output_w,
            output_b,
        })
    }

    /// Resolve the layout from a store of named arrays and check it against
    /// `config`.
    pub fn from_store(store: ParamStore<T>, config: &ModelConfig) -> Result<Self> {
        let l = config.depth;
        let find = |name: &str| {
            store
                .find(name)
                .ok_or_else(|| Error::Format(format!("missing parameter {name}")))
        };
        let p = Self {
            embedding: find("embedding")?,
            encoder: StackSpec::find(&store, "word_encoder", l)?,
            sentence_fwd: StackSpec::find(&store, "sentence_fwd", l)?,
            sentence_bwd: StackSpec::find(&store, "sentence_bwd", l)?,
            memory_cell: StackSpec::find(&store, "memory_cell", l)?,
            memory_attention: AttentionParams::find(&store, "memory_attention")?,
            decoder_cell: StackSpec::find(&store, "decoder_cell", l)?,
            decoder_attention: AttentionParams::find(&store, "decoder_attention")?,
            output_w: find("output.w")?,
            output_b: find("output.b")?,
            store,
        };
        let (e, v) = (config.size, config.vocab_size);
        let checks = [
            (p.embedding, vec![v, e]),
            (p.output_w, vec![e, v]),
            (p.output_b, vec![1, v]),
        ];
        for (id, shape) in checks {
            if p.store.get(id).shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "{} has shape {:?}, config implies {:?}",
                    p.store.name(id),
                    p.store.get(id).shape(),
                    shape
                )));
            }
        }
        if p.encoder.hidden_dim() != e {
            return Err(Error::Format(
                "encoder width does not match config size".into(),
            ));
        }
        Ok(p)
    }

    pub fn question_encoder(&self) -> &StackSpec {
        &self.encoder
    }

    pub fn word_encoder(&self) -> &StackSpec {
        &self.encoder
    }

    pub fn num_values(&self) -> usize {
        self.store.num_values()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            store: self.store.cast(),
            embedding: self.embedding,
            encoder: self.encoder.clone(),
            sentence_fwd: self.sentence_fwd.clone(),
            sentence_bwd: self.sentence_bwd.clone(),
            memory_cell: self.memory_cell.clone(),
            memory_attention: self.memory_attention.clone(),
            decoder_cell: self.decoder_cell.clone(),
            decoder_attention: self.decoder_attention.clone(),
            output_w: self.output_w,
            output_b: self.output_b,
        }
    }
}
