//! The attentive memory network.
//!
//! ```text
//! question ──► question encoder ─────────────┐ h_que
//!                                            ▼
//! story ──► word-level encoder ──► sentence-level encoder (bi) ──► H^sen, h^sen
//!           (tied with question)             │
//!                                            ▼
//!                      memory cell: m_i = g(h_que, H^sen, m_{i−1}), m_0 = h^sen
//!                                            │ M = [m_1 … m_m]
//!                                            ▼
//!                      answer decoder: attends over M, starts from m_m
//! ```
//!
//! The memory module reads the story only through the sentence-level states,
//! so its cost grows with the number of sentences, not the number of words.

mod attention;
mod checkpoint;
mod config;
mod network;
mod params;

pub use attention::{
    attend, attentive_cell_step, AttendSet, Attended, AttentionParams, AttentionVars, CellStep,
};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION,
};
pub use config::ModelConfig;
pub use network::{
    answer_loss, argmax, check_batch, decode_answer, encode_document, encode_question,
    memory_module, Bound, DecodeMode, Decoded, DocumentEncoding, MemoryOutput,
};
pub use params::{ModelParams, DEFAULT_INIT};

use crate::data::{Batch, Example, Vocabulary};
use crate::error::{Error, Result};
use crate::recurrent::Dropout;
use crate::tensor::{Scalar, Tape, Var};

/// Attention weights and context vectors of one prediction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttentionRecord {
    /// One row per memory step, one weight per story sentence.
    pub memory_attention: Vec<Vec<f64>>,
    /// One row per decoder step, one weight per memory.
    pub decoder_attention: Vec<Vec<f64>>,
    /// Context vector `d` of each memory step.
    pub memory_context: Vec<Vec<f64>>,
    /// Context vector `d` of each decoder step.
    pub decoder_context: Vec<Vec<f64>>,
}

/// Free-running output for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Decoded answer tokens, EOS excluded.
    pub tokens: Vec<usize>,
    pub record: AttentionRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOutput<T> {
    pub loss: T,
    pub prediction: Vec<usize>,
    pub record: AttentionRecord,
}

/// Configuration, vocabulary and parameters: everything a checkpoint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams<T>,
}

impl<T: Scalar> Model<T> {
    pub fn init(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        if config.vocab_size != vocab.len() {
            return Err(Error::Config(format!(
                "config vocab_size {} but vocabulary has {} entries",
                config.vocab_size,
                vocab.len()
            )));
        }
        let params = ModelParams::init(&config, seed)?;
        Ok(Self {
            config,
            vocab,
            params,
        })
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            params: self.params.cast(),
        }
    }

    /// Teacher-forced loss of `batch` recorded on `tape`, returned with the
    /// parameter binding so gradients can be read after `backward`.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape<T>,
        batch: &Batch,
        requires_grad: bool,
        dropout: &mut Dropout<'_>,
    ) -> Result<(Var, Bound)> {
        let m = self.params.bind(tape, requires_grad);
        let loss = self.loss_with(tape, &m, batch, dropout)?;
        Ok((loss, m))
    }

    /// Teacher-forced loss using parameters already bound to `tape`.
    pub fn loss_with(
        &self,
        tape: &mut Tape<T>,
        m: &Bound,
        batch: &Batch,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        check_batch(batch, self.config.vocab_size)?;
        let h_que = encode_question(tape, m, batch, dropout)?;
        let doc = encode_document(tape, m, batch, h_que, dropout)?;
        let mem = memory_module(tape, m, h_que, &doc, self.config.memories, dropout)?;
        let dec = decode_answer(
            tape,
            m,
            &mem.memories,
            DecodeMode::TeacherForced {
                targets: Some(&batch.answer),
                steps: batch.max_answer,
            },
            dropout,
        )?;
        answer_loss(tape, batch, &dec.logits)
    }

    /// Teacher-forced loss without dropout or gradients.
    pub fn batch_loss(&self, batch: &Batch) -> Result<T> {
        let mut tape = Tape::new();
        let (loss, _) = self.loss_on_tape(&mut tape, batch, false, &mut Dropout::inference())?;
        Ok(tape.value(loss).scalar_value())
    }

    /// Greedy answers and attention records for every example of `batch`.
    pub fn predict(&self, batch: &Batch) -> Result<Vec<Prediction>> {
        let mut tape = Tape::new();
        self.predict_on_tape(&mut tape, batch)
    }

    pub fn predict_on_tape(&self, tape: &mut Tape<T>, batch: &Batch) -> Result<Vec<Prediction>> {
        check_batch(batch, self.config.vocab_size)?;
        let dropout = &mut Dropout::inference();
        let m = self.params.bind(tape, false);
        let h_que = encode_question(tape, &m, batch, dropout)?;
        let doc = encode_document(tape, &m, batch, h_que, dropout)?;
        let mem = memory_module(tape, &m, h_que, &doc, self.config.memories, dropout)?;
        let dec = decode_answer(
            tape,
            &m,
            &mem.memories,
            DecodeMode::FreeRunning {
                max_len: self.config.max_answer_len,
            },
            dropout,
        )?;
        let s = batch.max_sentences;
        Ok((0..batch.size)
            .map(|b| {
                let sentences = (0..s).filter(|&i| batch.sentence_mask[b * s + i]).count();
                let emitted = (dec.tokens[b].len() + 1).min(dec.steps.len());
                Prediction {
                    tokens: dec.tokens[b].clone(),
                    record: record_for(tape, b, sentences, &mem.steps, &dec.steps[..emitted]),
                }
            })
            .collect())
    }

    /// Loss (teacher-forced), greedy prediction and attention record of a
    /// single example. `dropout` is only used for the loss pass.
    pub fn forward_example(
        &self,
        example: &Example,
        dropout: &mut Dropout<'_>,
    ) -> Result<ExampleOutput<T>> {
        let batch = Batch::single(example);
        let mut tape = Tape::new();
        let (loss, _) = self.loss_on_tape(&mut tape, &batch, false, dropout)?;
        let loss = tape.value(loss).scalar_value();
        let mut pred = self.predict(&batch)?;
        let p = pred.pop().unwrap();
        Ok(ExampleOutput {
            loss,
            prediction: p.tokens,
            record: p.record,
        })
    }
}

fn record_for<T: Scalar>(
    tape: &Tape<T>,
    b: usize,
    sentences: usize,
    memory: &[CellStep],
    decoder: &[CellStep],
) -> AttentionRecord {
    let row = |v: Var, len: Option<usize>| {
        let t = tape.value(v);
        let r: Vec<f64> = t.row(b).iter().map(|x| x.to_f64().unwrap()).collect();
        match len {
            Some(n) => r[..n].to_vec(),
            None => r,
        }
    };
    AttentionRecord {
        memory_attention: memory
            .iter()
            .map(|s| row(s.attention.weights, Some(sentences)))
            .collect(),
        decoder_attention: decoder
            .iter()
            .map(|s| row(s.attention.weights, None))
            .collect(),
        memory_context: memory
            .iter()
            .map(|s| row(s.attention.context, None))
            .collect(),
        decoder_context: decoder
            .iter()
            .map(|s| row(s.attention.context, None))
            .collect(),
    }
}
