//! Mini-batch training: teacher-forced loss, global-norm clipping, Adam,
//! periodic validation with learning-rate annealing, best-checkpoint
//! selection.

mod anneal;
mod optim;
mod task;

pub use anneal::{anneal, Annealer, LOSS_MARGIN};
pub use optim::{adam_step, clip_gradients, global_norm, AdamState, BETA1, BETA2, EPSILON};
pub use task::{run_task, PreparedTask, TaskRun};

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Batch, BatchSampler, Example};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::recurrent::Dropout;
use crate::tensor::{Scalar, Tape, TensorError};

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_CLIP: f64 = 5.0;

/// Hyperparameters per bAbi task: `(size, depth, memories, batches)`.
pub const TABLE2: [(usize, usize, usize, usize); 20] = [
    (32, 1, 1, 1000),
    (64, 2, 3, 12200),
    (64, 2, 3, 14000),
    (32, 1, 1, 1200),
    (32, 1, 2, 3000),
    (32, 1, 1, 3800),
    (32, 1, 3, 5000),
    (32, 1, 1, 4400),
    (32, 1, 2, 3200),
    (32, 1, 1, 3800),
    (32, 1, 2, 1400),
    (32, 1, 1, 1200),
    (32, 1, 1, 10000),
    (64, 2, 1, 6000),
    (32, 1, 1, 2200),
    (64, 1, 2, 10200),
    (32, 1, 3, 6200),
    (32, 1, 3, 2400),
    (64, 1, 1, 13000),
    (32, 1, 3, 3600),
];

/// Table 2 row for a 1-based task id.
pub fn task_hyperparameters(task: usize) -> Result<(usize, usize, usize, usize)> {
    crate::data::check_task(task)?;
    Ok(TABLE2[task - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub max_grad_norm: f64,
    pub batch_size: usize,
    /// Training examples between evaluations.
    pub eval_every: usize,
    pub anneal_patience: usize,
    pub anneal_factor: f64,
    pub max_batches: usize,
    pub min_lr: f64,
    pub seed: u64,
    /// Stop as soon as validation error is at or below this.
    pub target_error: Option<f64>,
    /// Batches trained at the initial rate before the annealer starts
    /// watching evaluations.
    pub anneal_after: usize,
    /// Record elapsed seconds in the log; when off the column is 0 so logs
    /// of identical runs are byte-identical.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(DEFAULT_LR, DEFAULT_CLIP, 1000, 0)
    }
}

impl TrainConfig {
    pub fn new(initial_lr: f64, max_grad_norm: f64, max_batches: usize, seed: u64) -> Self {
        Self {
            initial_lr,
            max_grad_norm,
            batch_size: 50,
            eval_every: 1000,
            anneal_patience: 3,
            anneal_factor: 2.0,
            max_batches,
            min_lr: initial_lr / 1024.0,
            seed,
            target_error: None,
            anneal_after: 0,
            wall_clock: true,
        }
    }

    /// Defaults for a task: four times its Table 2 batch budget, with the
    /// first two budgets at the initial rate.
    pub fn for_task(task: usize, initial_lr: f64, seed: u64) -> Result<Self> {
        let (.., budget) = task_hyperparameters(task)?;
        Ok(Self {
            anneal_after: 2 * budget,
            ..Self::new(initial_lr, DEFAULT_CLIP, 4 * budget, seed)
        })
    }

    /// Reproduction runs: [`for_task`](Self::for_task) at [`DEFAULT_LR`],
    /// `multiplier` Table 2 budgets, stopping at zero validation error.
    pub fn reproduction(task: usize, multiplier: f64, seed: u64) -> Result<Self> {
        let (.., budget) = task_hyperparameters(task)?;
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "budget multiplier {multiplier} must be positive"
            )));
        }
        Ok(Self {
            max_batches: ((multiplier * budget as f64).round() as usize).max(1),
            target_error: Some(0.0),
            ..Self::for_task(task, DEFAULT_LR, seed)?
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("initial_lr", self.initial_lr),
            ("max_grad_norm", self.max_grad_norm),
            ("anneal_factor", self.anneal_factor),
            ("min_lr", self.min_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.batch_size == 0 || self.eval_every == 0 || self.anneal_patience == 0 {
            return Err(Error::Config(
                "batch_size, eval_every and anneal_patience must be positive".into(),
            ));
        }
        if !self.eval_every.is_multiple_of(self.batch_size) {
            return Err(Error::Config(format!(
                "eval_every {} is not a multiple of batch_size {}",
                self.eval_every, self.batch_size
            )));
        }
        Ok(())
    }

    pub fn batches_per_eval(&self) -> usize {
        self.eval_every / self.batch_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub batch: usize,
    /// Mean training loss over the batches since the previous evaluation.
    pub train_loss: f64,
    pub val_error: f64,
    /// Learning rate in effect after this evaluation.
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    pub const HEADER: &'static str = "batch\ttrain_loss\tval_error\tlr\tseconds";

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for e in &self.entries {
            writeln!(
                s,
                "{}\t{:.6}\t{:.4}\t{}\t{:.3}",
                e.batch, e.train_loss, e.val_error, e.lr, e.seconds
            )
            .unwrap();
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxBatches,
    MinLr,
    TargetReached,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    /// Parameters at the evaluation with the lowest validation error
    /// (earliest on ties); the final parameters when nothing was evaluated.
    pub best: Model<T>,
    pub best_batch: usize,
    pub best_val_error: Option<f64>,
    pub log: TrainLog,
    pub batches: usize,
    pub stop: StopReason,
}

/// Mean teacher-forced loss over `examples`.
pub fn mean_loss<T: Scalar>(model: &Model<T>, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty set".into()));
    }
    let idx: Vec<usize> = (0..examples.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(100) {
        let batch = Batch::from_indices(examples, chunk);
        total += model.batch_loss(&batch)?.to_f64().unwrap() * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Fraction of examples whose greedy answer differs from the gold sequence.
pub fn evaluate<T: Scalar>(model: &Model<T>, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Contract("cannot evaluate on an empty set".into()));
    }
    let mut wrong = 0usize;
    let idx: Vec<usize> = (0..examples.len()).collect();
    for chunk in idx.chunks(100) {
        let batch = Batch::from_indices(examples, chunk);
        for (p, &i) in model.predict(&batch)?.iter().zip(chunk) {
            if p.tokens != examples[i].answer {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / examples.len() as f64)
}

fn numeric(e: Error, batch: usize, lr: f64) -> Error {
    match e {
        Error::Tensor(TensorError::NonFinite { .. }) => Error::NonFiniteLoss { batch, lr },
        other => other,
    }
}

/// Train `model` on `train`, evaluating on `val` every `eval_every`
/// examples. `progress` sees every log entry as it is produced.
pub fn train<T: Scalar>(
    mut model: Model<T>,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&LogEntry),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    model.config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let start = Instant::now();
    let mut sampler = BatchSampler::new(train.len(), cfg.batch_size, cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD50F);
    let mut adam = AdamState::new(model.params.store.tensors());
    let mut annealer = Annealer::new(cfg.anneal_patience, cfg.anneal_factor);
    let mut lr = cfg.initial_lr;
    let mut log = TrainLog::default();
    let mut best: Option<(Model<T>, usize, f64)> = None;
    let mut window = (0.0f64, 0usize);
    let mut stop = StopReason::MaxBatches;
    let mut batches = 0;
    let rate = model.config.dropout;

    for b in 1..=cfg.max_batches {
        let indices = sampler.next_indices();
        let batch = Batch::from_indices(train, &indices);
        let mut tape = Tape::new();
        let mut dropout = if rate > 0.0 {
            Dropout::training(rate, &mut dropout_rng)?
        } else {
            Dropout::inference()
        };
        let (loss, bound) = model
            .loss_on_tape(&mut tape, &batch, true, &mut dropout)
            .map_err(|e| numeric(e, b, lr))?;
        let value = tape.value(loss).scalar_value().to_f64().unwrap();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { batch: b, lr });
        }
        tape.backward(loss).map_err(|e| numeric(e.into(), b, lr))?;
        let mut grads = bound.binding.gradients(&tape);
        let norm = clip_gradients(&mut grads, cfg.max_grad_norm);
        if !norm.is_finite() {
            return Err(Error::NonFiniteLoss { batch: b, lr });
        }
        adam_step(model.params.store.tensors_mut(), &grads, &mut adam, lr)?;
        batches = b;
        window.0 += value;
        window.1 += 1;

        if b % cfg.batches_per_eval() == 0 {
            let val_error = evaluate(&model, val)?;
            let train_loss = window.0 / window.1 as f64;
            window = (0.0, 0);
            if b > cfg.anneal_after {
                lr = annealer.observe(lr, train_loss, val_error);
            }
            let entry = LogEntry {
                batch: b,
                train_loss,
                val_error,
                lr,
                seconds: if cfg.wall_clock {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            };
            progress(&entry);
            log.entries.push(entry);
            if best.as_ref().is_none_or(|(_, _, e)| val_error < *e) {
                best = Some((model.clone(), b, val_error));
            }
            if cfg.target_error.is_some_and(|t| val_error <= t) {
                stop = StopReason::TargetReached;
                break;
            }
            if lr < cfg.min_lr {
                stop = StopReason::MinLr;
                break;
            }
        }
    }

    let (best, best_batch, best_val_error) = match best {
        Some((m, b, e)) => (m, b, Some(e)),
        None => (model, batches, None),
    };
    Ok(TrainOutcome {
        best,
        best_batch,
        best_val_error,
        log,
        batches,
        stop,
    })
}

/// Append-only TSV writer for logs streamed during training.
pub struct LogWriter<W: Write> {
    out: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", TrainLog::HEADER)?;
        Ok(Self { out })
    }

    pub fn append(&mut self, e: &LogEntry) -> Result<()> {
        let single = TrainLog {
            entries: vec![e.clone()],
        };
        let tsv = single.to_tsv();
        let line = tsv.lines().nth(1).unwrap();
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }
}
