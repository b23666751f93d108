use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::data::{check_task, TaskData};
use crate::error::{Error, Result};
use crate::train::{run_task, task_hyperparameters, LogEntry, PreparedTask, TrainConfig};

/// Published AMN test error rates in percent, tasks 1 to 20.
pub const TABLE1_AMN: [f64; 20] = [
    0.0, 4.1, 29.1, 0.0, 0.7, 0.2, 3.1, 0.3, 0.0, 0.1, 0.0, 0.0, 0.0, 3.6, 0.0, 45.4, 1.6, 0.9,
    0.3, 0.0,
];

/// A task is solved when its test error rate is below this fraction.
pub const SOLVED_BELOW: f64 = 0.05;

pub fn solved(error_rate: f64) -> bool {
    error_rate < SOLVED_BELOW
}

/// Whether the published AMN result solves `task`.
pub fn reported_solved(task: usize) -> Result<bool> {
    check_task(task)?;
    Ok(solved(TABLE1_AMN[task - 1] / 100.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub task: usize,
    pub error_rate: f64,
    pub solved: bool,
    pub batches_used: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table1Report {
    pub rows: Vec<ReportRow>,
}

impl Table1Report {
    pub const HEADER: &'static str = "task\terror_rate\tsolved\tbatches_used\tseconds";

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{}\t{:.4}\t{}\t{}\t{:.1}",
                r.task, r.error_rate, r.solved, r.batches_used, r.seconds
            )
            .unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub tasks: Vec<usize>,
    /// Training budget in multiples of the Table 2 batch count.
    pub multiplier: f64,
    /// Tasks trained concurrently.
    pub jobs: usize,
    pub seed: u64,
    pub wall_clock: bool,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            tasks: (1..=20).collect(),
            multiplier: 3.0,
            jobs: 1,
            seed: 0,
            wall_clock: true,
        }
    }
}

/// Train every task with its Table 2 row and score the best checkpoint on
/// the test split. All data is read before any training starts, so missing
/// files are reported together. Rows come back in task order.
pub fn reproduce_table1(
    data_dir: &Path,
    opts: &ReproduceOptions,
    progress: impl Fn(usize, &LogEntry) + Sync,
) -> Result<Table1Report> {
    if opts.tasks.is_empty() {
        return Err(Error::Config("no tasks to reproduce".into()));
    }
    let mut missing = Vec::new();
    let mut prepared = Vec::new();
    for &task in &opts.tasks {
        task_hyperparameters(task)?;
        match TaskData::load(data_dir, task) {
            Ok(data) => prepared.push(PreparedTask::new(&data)?),
            Err(Error::MissingFiles(paths)) => missing.extend(paths),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ReportRow>>>> =
        Mutex::new((0..prepared.len()).map(|_| None).collect());
    let run_one = |p: &PreparedTask| -> Result<ReportRow> {
        let start = Instant::now();
        let mut cfg = TrainConfig::reproduction(p.task, opts.multiplier, opts.seed)?;
        cfg.wall_clock = opts.wall_clock;
        let run = run_task(p, p.table2_config()?, opts.seed, &cfg, |e| {
            progress(p.task, e)
        })?;
        Ok(ReportRow {
            task: p.task,
            error_rate: run.test_error,
            solved: solved(run.test_error),
            batches_used: run.outcome.batches,
            seconds: if opts.wall_clock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    };
    std::thread::scope(|scope| {
        for _ in 0..opts.jobs.clamp(1, prepared.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = prepared.get(i) else { break };
                let row = run_one(p);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Report { rows })
}
