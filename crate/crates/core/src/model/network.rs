//! The forward pass: question encoder, hierarchical document encoder,
//! memory module and answer decoder, all batched over padded examples.

use super::attention::{attentive_cell_step, AttendSet, AttentionVars, CellStep};
use super::params::ModelParams;
use crate::data::{Batch, EOS, GO};
use crate::error::{Error, Result};
use crate::params::Binding;
use crate::recurrent::{run_bidirectional, run_sequence, Dropout, StackVars};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// A [`ModelParams`] recorded on one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    pub binding: Binding,
    pub embedding: Var,
    /// Shared by the question encoder and the word-level document encoder.
    pub encoder: StackVars,
    pub sentence_fwd: StackVars,
    pub sentence_bwd: StackVars,
    pub memory_cell: StackVars,
    pub memory_attention: AttentionVars,
    pub decoder_cell: StackVars,
    pub decoder_attention: AttentionVars,
    pub output_w: Var,
    pub output_b: Var,
    pub size: usize,
}

impl<T: Scalar> ModelParams<T> {
    pub fn bind(&self, tape: &mut Tape<T>, requires_grad: bool) -> Bound {
        self.bind_with(self.store.bind(tape, requires_grad))
    }

    /// Resolve typed handles from variables bound elsewhere.
    pub fn bind_with(&self, binding: Binding) -> Bound {
        Bound {
            embedding: binding.var(self.embedding),
            encoder: self.question_encoder().bind(&binding),
            sentence_fwd: self.sentence_fwd.bind(&binding),
            sentence_bwd: self.sentence_bwd.bind(&binding),
            memory_cell: self.memory_cell.bind(&binding),
            memory_attention: self.memory_attention.bind(&binding),
            decoder_cell: self.decoder_cell.bind(&binding),
            decoder_attention: self.decoder_attention.bind(&binding),
            output_w: binding.var(self.output_w),
            output_b: binding.var(self.output_b),
            size: self.memory_attention.size,
            binding,
        }
    }
}

fn zeros<T: Scalar>(tape: &mut Tape<T>, rows: usize, cols: usize) -> Var {
    tape.constant(Tensor::zeros(&[rows, cols]))
}

/// Reject token ids outside the vocabulary before they reach the tape.
pub fn check_batch(batch: &Batch, vocab_size: usize) -> Result<()> {
    let bad = batch
        .story
        .iter()
        .chain(&batch.question)
        .chain(&batch.answer)
        .find(|&&t| t >= vocab_size);
    if let Some(t) = bad {
        return Err(Error::Data(format!(
            "token id {t} outside vocabulary of {vocab_size}"
        )));
    }
    Ok(())
}

/// Final state of the encoder over the question, from a zero state (`B × e`).
pub fn encode_question<T: Scalar>(
    tape: &mut Tape<T>,
    m: &Bound,
    batch: &Batch,
    dropout: &mut Dropout<'_>,
) -> Result<Var> {
    let (b, q) = (batch.size, batch.max_question);
    for row in 0..b {
        if !batch.question_mask[row * q] {
            return Err(Error::Contract(format!(
                "example {row} has an empty question"
            )));
        }
    }
    let mut inputs = Vec::with_capacity(q);
    let mut live = Vec::with_capacity(q);
    for t in 0..q {
        let ids: Vec<usize> = (0..b).map(|r| batch.question[r * q + t]).collect();
        inputs.push(tape.gather_rows(m.embedding, &ids)?);
        live.push((0..b).map(|r| batch.question_mask[r * q + t]).collect());
    }
    let h0 = zeros(tape, b, m.size);
    Ok(run_sequence(tape, &inputs, h0, &m.encoder, &live, dropout)?.last)
}

/// Output of the hierarchical document encoder.
#[derive(Debug, Clone)]
pub struct DocumentEncoding {
    /// Word-level sentence vectors `H^wrd`, `(B·S) × e` example-major.
    pub word_level: Var,
    /// Sentence-level states `H^sen` in attention layout.
    pub sentences: AttendSet,
    /// Fused final state of the sentence-level encoder (`B × e`).
    pub last: Var,
}

/// Word-level encoder per sentence (zero-initialised, tied with the question
/// encoder), then a bidirectional sentence-level encoder whose two
/// directions start from `h_que`.
pub fn encode_document<T: Scalar>(
    tape: &mut Tape<T>,
    m: &Bound,
    batch: &Batch,
    h_que: Var,
    dropout: &mut Dropout<'_>,
) -> Result<DocumentEncoding> {
    let (b, s, w) = (batch.size, batch.max_sentences, batch.max_words);
    for row in 0..b {
        if !batch.sentence_mask[row * s] {
            return Err(Error::Contract(format!("example {row} has an empty story")));
        }
    }
    let rows = b * s;
    let mut inputs = Vec::with_capacity(w);
    let mut live = Vec::with_capacity(w);
    for t in 0..w {
        let ids: Vec<usize> = (0..rows).map(|r| batch.story[r * w + t]).collect();
        inputs.push(tape.gather_rows(m.embedding, &ids)?);
        live.push((0..rows).map(|r| batch.story_mask[r * w + t]).collect());
    }
    let h0 = zeros(tape, rows, m.size);
    let words = run_sequence(tape, &inputs, h0, &m.encoder, &live, dropout)?;
    let word_level = dropout.apply(tape, words.last)?;

    let mut sentence_inputs = Vec::with_capacity(s);
    let mut sentence_live = Vec::with_capacity(s);
    for i in 0..s {
        let pick: Vec<usize> = (0..b).map(|r| r * s + i).collect();
        sentence_inputs.push(tape.gather_rows(word_level, &pick)?);
        sentence_live.push(pick.iter().map(|&j| batch.sentence_mask[j]).collect());
    }
    let sen = run_bidirectional(
        tape,
        &sentence_inputs,
        h_que,
        h_que,
        &m.sentence_fwd,
        &m.sentence_bwd,
        &sentence_live,
        dropout,
    )?;
    let sentences = AttendSet::from_positions(tape, &sen.states, batch.sentence_mask.clone())?;
    Ok(DocumentEncoding {
        word_level,
        sentences,
        last: sen.last,
    })
}

/// The `m` memories and the steps that produced them.
#[derive(Debug, Clone)]
pub struct MemoryOutput {
    /// `m_1 … m_m`, each `B × e`.
    pub memories: Vec<Var>,
    pub steps: Vec<CellStep>,
}

/// `m_i = g(h_que, H^sen, m_{i−1})` with `m_0` the sentence encoder's final
/// state.
pub fn memory_module<T: Scalar>(
    tape: &mut Tape<T>,
    m: &Bound,
    h_que: Var,
    doc: &DocumentEncoding,
    count: usize,
    dropout: &mut Dropout<'_>,
) -> Result<MemoryOutput> {
    if count == 0 {
        return Err(Error::Config(
            "memory module needs at least one memory".into(),
        ));
    }
    let rows = tape.dims(h_que).0;
    let mut state = initial_state(tape, doc.last, m.memory_cell.layers.len(), rows, m.size);
    let mut memories = Vec::with_capacity(count);
    let mut steps = Vec::with_capacity(count);
    for _ in 0..count {
        let step = attentive_cell_step(
            tape,
            h_que,
            &state,
            &doc.sentences,
            &m.memory_cell,
            &m.memory_attention,
            dropout,
        )?;
        state = step.state.clone();
        memories.push(step.output);
        steps.push(step);
    }
    Ok(MemoryOutput { memories, steps })
}

/// `init` seeds the bottom layer; upper layers start at zero.
fn initial_state<T: Scalar>(
    tape: &mut Tape<T>,
    init: Var,
    depth: usize,
    rows: usize,
    size: usize,
) -> Vec<Var> {
    let mut state = vec![init];
    for _ in 1..depth {
        state.push(zeros(tape, rows, size));
    }
    state
}

/// How the decoder chooses its next input.
#[derive(Debug, Clone, Copy)]
pub enum DecodeMode<'a> {
    /// Feed gold tokens; `targets` is `B × T` (answer then EOS, PAD after).
    TeacherForced {
        targets: Option<&'a [usize]>,
        steps: usize,
    },
    /// Feed the previous argmax until EOS or `max_len` steps.
    FreeRunning { max_len: usize },
}

#[derive(Debug, Clone)]
pub struct Decoded {
    /// Per step `B × |V|` logits.
    pub logits: Vec<Var>,
    /// Per step decoder cell output.
    pub steps: Vec<CellStep>,
    /// Free-running: emitted tokens per example, without the EOS.
    pub tokens: Vec<Vec<usize>>,
}

/// Greedy or teacher-forced decoding, attending over the memories. The
/// decoder starts from the last memory; its first input is `<go>`.
pub fn decode_answer<T: Scalar>(
    tape: &mut Tape<T>,
    m: &Bound,
    memories: &[Var],
    mode: DecodeMode<'_>,
    dropout: &mut Dropout<'_>,
) -> Result<Decoded> {
    let Some(&last) = memories.last() else {
        return Err(Error::Contract("decoder needs at least one memory".into()));
    };
    let rows = tape.dims(last).0;
    let over = AttendSet::from_positions(tape, memories, vec![true; rows * memories.len()])?;
    let mut state = initial_state(tape, last, m.decoder_cell.layers.len(), rows, m.size);
    let (steps, targets) = match mode {
        DecodeMode::TeacherForced { targets: None, .. } => {
            return Err(Error::Contract(
                "teacher forcing needs target tokens".into(),
            ))
        }
        DecodeMode::TeacherForced {
            targets: Some(t),
            steps,
        } => {
            if t.len() != rows * steps {
                return Err(Error::Contract(format!(
                    "{} targets for {rows} examples × {steps} steps",
                    t.len()
                )));
            }
            (steps, Some(t))
        }
        DecodeMode::FreeRunning { max_len } => (max_len, None),
    };
    let mut prev = vec![GO; rows];
    let mut done = vec![false; rows];
    let mut out = Decoded {
        logits: Vec::with_capacity(steps),
        steps: Vec::with_capacity(steps),
        tokens: vec![Vec::new(); rows],
    };
    for t in 0..steps {
        let x = tape.gather_rows(m.embedding, &prev)?;
        let step = attentive_cell_step(
            tape,
            x,
            &state,
            &over,
            &m.decoder_cell,
            &m.decoder_attention,
            dropout,
        )?;
        state = step.state.clone();
        let h = dropout.apply(tape, step.output)?;
        let proj = tape.matmul(h, m.output_w)?;
        let logits = tape.add_bias(proj, m.output_b)?;
        match targets {
            Some(gold) => {
                prev = (0..rows).map(|r| gold[r * steps + t]).collect();
            }
            None => {
                let values = tape.value(logits);
                for (r, finished) in done.iter_mut().enumerate() {
                    let tok = argmax(values.row(r));
                    prev[r] = tok;
                    if !*finished {
                        if tok == EOS {
                            *finished = true;
                        } else {
                            out.tokens[r].push(tok);
                        }
                    }
                }
            }
        }
        out.logits.push(logits);
        out.steps.push(step);
        if targets.is_none() && done.iter().all(|&d| d) {
            break;
        }
    }
    Ok(out)
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Mean over examples of the mean per-position cross entropy of the
/// teacher-forced logits (answer tokens and EOS).
pub fn answer_loss<T: Scalar>(tape: &mut Tape<T>, batch: &Batch, logits: &[Var]) -> Result<Var> {
    let (b, steps) = (batch.size, batch.max_answer);
    if logits.len() != steps {
        return Err(Error::Contract(format!(
            "{} logit steps for answers of length {steps}",
            logits.len()
        )));
    }
    let stacked = tape.stack_rows(logits)?;
    let mut targets = Vec::with_capacity(b * steps);
    let mut weights = Vec::with_capacity(b * steps);
    let lengths: Vec<usize> = (0..b)
        .map(|r| {
            (0..steps)
                .filter(|&t| batch.answer_mask[r * steps + t])
                .count()
        })
        .collect();
    for t in 0..steps {
        for (r, &len) in lengths.iter().enumerate() {
            let i = r * steps + t;
            targets.push(batch.answer[i]);
            weights.push(if batch.answer_mask[i] {
                T::lit(1.0 / (len as f64 * b as f64))
            } else {
                T::zero()
            });
        }
    }
    Ok(tape.cross_entropy(stacked, &targets, &weights)?)
}
