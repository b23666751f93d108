use super::{evaluate, task_hyperparameters, train, LogEntry, TrainConfig, TrainOutcome};
use crate::data::{Example, TaskData, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

/// A task's splits encoded against the vocabulary of its training file.
/// Test words outside that vocabulary become `<unk>`.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub task: usize,
    pub vocab: Vocabulary,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl PreparedTask {
    pub fn new(data: &TaskData) -> Result<Self> {
        let vocab = data.vocabulary();
        Ok(Self {
            task: data.task,
            train: vocab.encode_all(&data.train)?,
            val: vocab.encode_all(&data.val)?,
            test: data.test.iter().map(|e| vocab.encode_lossy(e)).collect(),
            vocab,
        })
    }

    /// Model configuration with the given sizes and unroll bounds covering
    /// every split.
    pub fn config(&self, size: usize, depth: usize, memories: usize) -> ModelConfig {
        let all: Vec<Example> = self
            .train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .cloned()
            .collect();
        ModelConfig::fitted(size, depth, memories, self.vocab.len(), &all)
    }

    /// Configuration from the task's Table 2 row.
    pub fn table2_config(&self) -> Result<ModelConfig> {
        let (size, depth, memories, _) = task_hyperparameters(self.task)?;
        Ok(self.config(size, depth, memories))
    }
}

#[derive(Debug, Clone)]
pub struct TaskRun {
    pub outcome: TrainOutcome<f32>,
    pub test_error: f64,
}

/// Initialise a model from `config`, train it with `cfg` and score the best
/// checkpoint on the test split.
pub fn run_task(
    prepared: &PreparedTask,
    config: ModelConfig,
    model_seed: u64,
    cfg: &TrainConfig,
    progress: impl FnMut(&LogEntry),
) -> Result<TaskRun> {
    if prepared.train.is_empty() || prepared.val.is_empty() || prepared.test.is_empty() {
        return Err(Error::Data(format!(
            "task {} has an empty split",
            prepared.task
        )));
    }
    let model = Model::<f32>::init(config, prepared.vocab.clone(), model_seed)?;
    let outcome = train(model, &prepared.train, &prepared.val, cfg, progress)?;
    let test_error = evaluate(&outcome.best, &prepared.test)?;
    Ok(TaskRun {
        outcome,
        test_error,
    })
}
