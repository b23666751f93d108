//! Multiply-accumulate counts. Only multiplies are counted: nonlinearities,
//! softmax normalisation and additions are free.

use crate::data::{Batch, Example, RESERVED};
use crate::error::{Error, Result};
use crate::model::{
    decode_answer, encode_document, encode_question, memory_module, DecodeMode, ModelConfig,
    ModelParams,
};
use crate::recurrent::Dropout;
use crate::tensor::Tape;

/// Shape of one story: sentences, words per sentence, question words and
/// answer tokens (the decoder runs one more step for EOS).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoryShape {
    pub sentences: usize,
    pub words: usize,
    pub question: usize,
    pub answer: usize,
}

pub fn gru_step_macs(d_in: usize, d: usize) -> u64 {
    3 * (d_in * d + d * d + d) as u64
}

/// One step of a `depth`-layer stack of width `e`.
pub fn stack_step_macs(e: usize, depth: usize) -> u64 {
    depth as u64 * gru_step_macs(e, e)
}

/// Scores, context sum and output projection for one query over `k` states.
pub fn attention_macs(k: usize, e: usize) -> u64 {
    (k * (2 * e * e + e) + k * e + 2 * e * e) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCountReport {
    pub question_encoder: u64,
    pub word_encoder: u64,
    pub sentence_encoder: u64,
    /// Memory cell steps and their attention.
    pub memory: u64,
    /// The attention part of `memory`.
    pub memory_attention: u64,
    pub decoder: u64,
    /// A memory module that runs a GRU over every sentence at every step.
    pub baseline_memory: u64,
}

impl OpCountReport {
    pub fn document(&self) -> u64 {
        self.word_encoder + self.sentence_encoder
    }

    pub fn total(&self) -> u64 {
        self.question_encoder + self.document() + self.memory + self.decoder
    }

    /// Memory module cost over the baseline's.
    pub fn ratio(&self) -> f64 {
        self.memory as f64 / self.baseline_memory as f64
    }

    /// Attention-only memory cost over the baseline's.
    pub fn attend_ratio(&self) -> f64 {
        self.memory_attention as f64 / self.baseline_memory as f64
    }
}

/// Closed-form counts for a single example of `shape`.
pub fn count_ops(config: &ModelConfig, shape: StoryShape) -> OpCountReport {
    let (e, m) = (config.size, config.memories);
    let step = stack_step_macs(e, config.depth);
    let s = shape.sentences as u64;
    let memory_attention = m as u64 * attention_macs(shape.sentences, e);
    let decoder_step = step + attention_macs(m, e) + (e * config.vocab_size) as u64;
    OpCountReport {
        question_encoder: shape.question as u64 * step,
        word_encoder: s * shape.words as u64 * step,
        sentence_encoder: 2 * s * step,
        memory: m as u64 * step + memory_attention,
        memory_attention,
        decoder: (shape.answer as u64 + 1) * decoder_step,
        baseline_memory: m as u64 * s * step,
    }
}

/// Counts read off the tape's counter around each stage of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MeasuredOps {
    pub question_encoder: u64,
    pub document: u64,
    pub memory: u64,
    pub decoder: u64,
}

impl MeasuredOps {
    pub fn total(&self) -> u64 {
        self.question_encoder + self.document + self.memory + self.decoder
    }
}

/// An example of exactly `shape` with arbitrary in-vocabulary tokens.
pub fn synthetic_example(shape: StoryShape, vocab_size: usize) -> Result<Example> {
    let first = RESERVED.len();
    if vocab_size <= first {
        return Err(Error::Config(format!(
            "vocabulary of {vocab_size} has no word tokens"
        )));
    }
    if shape.sentences == 0 || shape.words == 0 || shape.question == 0 {
        return Err(Error::Config(format!(
            "story shape {shape:?} has an empty part"
        )));
    }
    let span = vocab_size - first;
    let mut next = 0usize;
    let mut word = || {
        next += 1;
        first + next % span
    };
    let story: Vec<Vec<usize>> = (0..shape.sentences)
        .map(|_| (0..shape.words).map(|_| word()).collect())
        .collect();
    Ok(Example {
        lines: (1..=shape.sentences).collect(),
        question: (0..shape.question).map(|_| word()).collect(),
        answer: (0..shape.answer).map(|_| word()).collect(),
        supporting: vec![],
        story,
    })
}

/// Run one teacher-forced forward pass of an untrained model on an example
/// of `shape` and count the multiplies each stage records.
pub fn instrumented_ops(config: &ModelConfig, shape: StoryShape, seed: u64) -> Result<MeasuredOps> {
    let params = ModelParams::<f32>::init(config, seed)?;
    let example = synthetic_example(shape, config.vocab_size)?;
    let batch = Batch::single(&example);
    let dropout = &mut Dropout::inference();
    let mut tape = Tape::new();
    let m = params.bind(&mut tape, false);

    tape.reset_macs();
    let h_que = encode_question(&mut tape, &m, &batch, dropout)?;
    let question_encoder = tape.macs();
    tape.reset_macs();
    let doc = encode_document(&mut tape, &m, &batch, h_que, dropout)?;
    let document = tape.macs();
    tape.reset_macs();
    let mem = memory_module(&mut tape, &m, h_que, &doc, config.memories, dropout)?;
    let memory = tape.macs();
    tape.reset_macs();
    decode_answer(
        &mut tape,
        &m,
        &mem.memories,
        DecodeMode::TeacherForced {
            targets: Some(&batch.answer),
            steps: batch.max_answer,
        },
        dropout,
    )?;
    Ok(MeasuredOps {
        question_encoder,
        document,
        memory,
        decoder: tape.macs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(sentences: usize, words: usize) -> StoryShape {
        StoryShape {
            sentences,
            words,
            question: 3,
            answer: 1,
        }
    }

    #[test]
    fn gru_step_by_hand() {
        // three gates of x·W (2·3) and h·U (3·3), plus r⊙h, (1−z)⊙h, z⊙h̃
        assert_eq!(gru_step_macs(2, 3), 3 * 6 + 3 * 9 + 3 * 3);
    }

    #[test]
    fn attention_by_hand() {
        let (k, e) = (4, 2);
        let keys = k * e * e;
        let queries = k * e * e;
        let scores = k * e;
        let context = k * e;
        let proj = 2 * e * e;
        assert_eq!(
            attention_macs(k, e),
            (keys + queries + scores + context + proj) as u64
        );
    }

    #[test]
    fn no_memories_cost_nothing() {
        let cfg = ModelConfig {
            memories: 0,
            ..ModelConfig::new(32, 1, 1, 20)
        };
        let r = count_ops(&cfg, shape(10, 6));
        assert_eq!((r.memory, r.memory_attention, r.baseline_memory), (0, 0, 0));
    }

    #[test]
    fn memory_cost_ignores_words() {
        let cfg = ModelConfig::new(32, 1, 3, 20);
        let a = count_ops(&cfg, shape(10, 4));
        let b = count_ops(&cfg, shape(10, 40));
        assert_eq!(a.memory, b.memory);
        assert_eq!(a.baseline_memory, b.baseline_memory);
        assert!(b.word_encoder > a.word_encoder);
    }

    #[test]
    fn attending_beats_rereading() {
        let r = count_ops(&ModelConfig::new(32, 1, 3, 20), shape(10, 6));
        assert!(r.memory < r.baseline_memory);
        assert!(r.ratio() < 1.0 && r.attend_ratio() < r.ratio());
    }

    #[test]
    fn total_is_sum() {
        let r = count_ops(&ModelConfig::new(64, 2, 2, 30), shape(7, 5));
        assert_eq!(
            r.total(),
            r.question_encoder + r.word_encoder + r.sentence_encoder + r.memory + r.decoder
        );
    }

    #[test]
    fn tape_counter_agrees() {
        for (e, depth, m) in [(8, 1, 1), (8, 2, 3), (16, 3, 2)] {
            let cfg = ModelConfig::new(e, depth, m, 25);
            let s = shape(5, 4);
            let want = count_ops(&cfg, s);
            let got = instrumented_ops(&cfg, s, 1).unwrap();
            assert_eq!(got.question_encoder, want.question_encoder);
            assert_eq!(got.document, want.document());
            assert_eq!(got.memory, want.memory);
            assert_eq!(got.decoder, want.decoder);
        }
    }
}
