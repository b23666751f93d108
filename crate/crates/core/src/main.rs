use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use amn::data::{synth, tokenize, Batch, Example, TaskData, Vocabulary};
use amn::instrument::{
    count_ops, export_attention, instrumented_ops, reproduce_table1, solved, ReproduceOptions,
    Section, StoryShape,
};
use amn::model::{load_checkpoint, save_checkpoint, Model, ModelConfig};
use amn::train::{
    evaluate, run_task, task_hyperparameters, LogEntry, PreparedTask, TrainConfig, TrainLog,
    DEFAULT_CLIP, DEFAULT_LR, TABLE2,
};
use amn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "amn",
    version,
    about = "Attentive memory networks on bAbi tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one task and write a checkpoint and a log.
    Train(TrainArgs),
    /// Error rate of a checkpoint on one split of a task.
    Eval(EvalArgs),
    /// Read statements from stdin and answer `?` questions.
    Ask(AskArgs),
    /// Write the attention heatmap of one example.
    Visualize(VisualizeArgs),
    /// Multiply-accumulate counts of the memory module against re-reading.
    Bench(BenchArgs),
    /// Train and test several tasks and print a Table 1 style report.
    Reproduce(ReproduceArgs),
    /// Write generated bAbi-format files for the supported tasks.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, env = "AMN_DATA_DIR")]
    data_dir: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=20))]
    task: u8,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    memories: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = DEFAULT_LR)]
    lr: f64,
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    clip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_batches: Option<usize>,
    /// Batches at the initial rate before annealing starts.
    #[arg(long)]
    anneal_after: Option<usize>,
    /// Stop once validation error is at or below this.
    #[arg(long)]
    target_error: Option<f64>,
    /// Output directory for `model.amn` and `train.tsv`.
    #[arg(long)]
    out: PathBuf,
    /// Log 0 seconds instead of elapsed time, so reruns are byte-identical.
    #[arg(long)]
    no_wall_clock: bool,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "test")]
    set: Split,
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct VisualizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "val")]
    set: Split,
    #[arg(long)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 3)]
    memories: usize,
    #[arg(long, default_value_t = 10)]
    sentences: usize,
    #[arg(long, default_value_t = 6)]
    words: usize,
    #[arg(long, default_value_t = 4)]
    question: usize,
    #[arg(long, default_value_t = 1)]
    answer: usize,
    #[arg(long, default_value_t = 20)]
    vocab: usize,
    /// One summary line per distinct Table 2 configuration instead.
    #[arg(long)]
    table2: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, env = "AMN_DATA_DIR")]
    data_dir: PathBuf,
    /// Comma-separated task ids.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20"
    )]
    tasks: Vec<usize>,
    /// Batch budget in multiples of each task's Table 2 count.
    #[arg(long, default_value_t = 3.0)]
    multiplier: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_wall_clock: bool,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,4,12")]
    tasks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Ask(a) => {
            let model = load_checkpoint::<f32>(&a.model)?;
            ask_session(&model, io::stdin().lock(), &mut io::stdout().lock())
        }
        Command::Visualize(a) => visualize_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Reproduce(a) => reproduce_cmd(a),
        Command::Synth(a) => {
            for &task in &a.tasks {
                let (train, test) = synth::write_task(&a.out, task, a.seed)?;
                println!("{}\n{}", train.display(), test.display());
            }
            Ok(())
        }
    }
}

fn log_line(e: &LogEntry) -> String {
    let one = TrainLog {
        entries: vec![e.clone()],
    };
    one.to_tsv().lines().nth(1).unwrap().to_string()
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let task = a.data.task as usize;
    let (size, depth, memories, _) = task_hyperparameters(task)?;
    let prepared = PreparedTask::new(&TaskData::load(&a.data.data_dir, task)?)?;
    let config = ModelConfig {
        dropout: a.dropout,
        ..prepared.config(
            a.size.unwrap_or(size),
            a.layers.unwrap_or(depth),
            a.memories.unwrap_or(memories),
        )
    };
    config.validate()?;
    let mut cfg = TrainConfig::for_task(task, a.lr, a.seed)?;
    cfg.max_grad_norm = a.clip;
    cfg.wall_clock = !a.no_wall_clock;
    cfg.target_error = a.target_error;
    if let Some(n) = a.max_batches {
        cfg.max_batches = n;
    }
    if let Some(n) = a.anneal_after {
        cfg.anneal_after = n;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&a.out)?;
    if !a.quiet {
        eprintln!("{}", TrainLog::HEADER);
    }
    let run = run_task(&prepared, config, a.seed, &cfg, |e| {
        if !a.quiet {
            eprintln!("{}", log_line(e));
        }
    })?;
    let model_path = a.out.join("model.amn");
    let log_path = a.out.join("train.tsv");
    save_checkpoint(&model_path, &run.outcome.best)?;
    run.outcome.log.write(&log_path)?;
    let val = run.outcome.best_val_error.unwrap_or(f64::NAN);
    println!(
        "task {task}: best batch {} val error {val:.4} test error {:.4} ({:?}, {} batches)",
        run.outcome.best_batch, run.test_error, run.outcome.stop, run.outcome.batches
    );
    println!("{}\n{}", model_path.display(), log_path.display());
    Ok(())
}

fn split_examples(model: &Model<f32>, data: &TaskData, set: Split) -> Result<Vec<Example>> {
    let strict = |raw: &[Example<String>], name: &str| {
        model.vocab.encode_all(raw).map_err(|e| {
            Error::Contract(format!(
                "model vocabulary does not cover the {name} split: {e}"
            ))
        })
    };
    let examples = match set {
        Split::Train => strict(&data.train, "train")?,
        Split::Val => strict(&data.val, "val")?,
        Split::Test => {
            if let Some(t) = data
                .test
                .iter()
                .flat_map(|e| &e.answer)
                .find(|t| model.vocab.id(t).is_none())
            {
                return Err(Error::Contract(format!(
                    "test answer {t:?} is not in the model vocabulary"
                )));
            }
            data.test
                .iter()
                .map(|e| model.vocab.encode_lossy(e))
                .collect()
        }
    };
    let longest = examples.iter().map(|e| e.answer.len()).max().unwrap_or(0);
    if longest >= model.config.max_answer_len {
        return Err(Error::Contract(format!(
            "answers of {longest} tokens exceed the model's bound of {}",
            model.config.max_answer_len - 1
        )));
    }
    Ok(examples)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let model = load_checkpoint::<f32>(&a.model)?;
    let data = TaskData::load(&a.data.data_dir, a.data.task as usize)?;
    let examples = split_examples(&model, &data, a.set)?;
    let rate = evaluate(&model, &examples)?;
    let name = match a.set {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    println!(
        "task {} {name} error rate {rate:.4} {}",
        a.data.task,
        if solved(rate) { "solved" } else { "not solved" }
    );
    Ok(())
}

/// Line-oriented question answering over a growing story.
fn ask_session(model: &Model<f32>, input: impl BufRead, out: &mut impl Write) -> Result<()> {
    let vocab: &Vocabulary = &model.vocab;
    let mut story: Vec<String> = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "reset" {
            story.clear();
            writeln!(out, "story cleared")?;
            continue;
        }
        let Some(question) = line.strip_prefix('?') else {
            if !tokenize(line).is_empty() {
                story.push(line.to_string());
            }
            continue;
        };
        let q = tokenize(question);
        if story.is_empty() || q.is_empty() {
            writeln!(out, "tell me a statement first, then ask with a leading ?")?;
            continue;
        }
        let encode = |text: &str| tokenize(text).iter().map(|t| vocab.id_or_unk(t)).collect();
        let example = Example {
            story: story.iter().map(|s| encode(s)).collect(),
            lines: (1..=story.len()).collect(),
            question: encode(question),
            answer: vec![],
            supporting: vec![],
        };
        let mut pred = model.predict(&Batch::single(&example))?;
        let p = pred.pop().unwrap();
        let answer = vocab.decode(&p.tokens).join(",");
        let top = p.record.memory_attention.last().and_then(|w| {
            w.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, &weight)| (i, weight))
        });
        match top {
            Some((i, weight)) => writeln!(out, "{answer}\t(attended: {} [{weight:.3}])", story[i])?,
            None => writeln!(out, "{answer}")?,
        }
    }
    Ok(())
}

fn visualize_cmd(a: VisualizeArgs) -> Result<()> {
    let model = load_checkpoint::<f32>(&a.model)?;
    let data = TaskData::load(&a.data.data_dir, a.data.task as usize)?;
    let examples = split_examples(&model, &data, a.set)?;
    let raw = match a.set {
        Split::Train => &data.train,
        Split::Val => &data.val,
        Split::Test => &data.test,
    };
    let Some(example) = examples.get(a.index) else {
        return Err(Error::Config(format!(
            "index {} out of range for {} examples",
            a.index,
            examples.len()
        )));
    };
    let mut pred = model.predict(&Batch::single(example))?;
    let p = pred.pop().unwrap();
    let sentences: Vec<String> = raw[a.index].story.iter().map(|s| s.join(" ")).collect();
    let dump = export_attention(&p.record, &sentences, &a.out)?;
    println!("question: {}", raw[a.index].question.join(" "));
    println!(
        "answer: {} (gold {})",
        model.vocab.decode(&p.tokens).join(","),
        raw[a.index].answer.join(",")
    );
    for step in 1..=p.record.memory_attention.len() {
        if let Some(i) = dump.argmax(Section::Memory, step) {
            println!("memory step {step} attends: {}", sentences[i - 1]);
        }
    }
    println!("{}", a.out.display());
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let shape = StoryShape {
        sentences: a.sentences,
        words: a.words,
        question: a.question,
        answer: a.answer,
    };
    if a.table2 {
        let mut configs: Vec<(usize, usize, usize)> =
            TABLE2.iter().map(|&(e, d, m, _)| (e, d, m)).collect();
        configs.sort_unstable();
        configs.dedup();
        println!("size\tlayers\tmemories\tmemory\tattend\tbaseline\tratio\tattend_ratio");
        for (e, d, m) in configs {
            let r = count_ops(&ModelConfig::new(e, d, m, a.vocab), shape);
            println!(
                "{e}\t{d}\t{m}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                r.memory,
                r.memory_attention,
                r.baseline_memory,
                r.ratio(),
                r.attend_ratio()
            );
        }
        return Ok(());
    }
    let config = ModelConfig::new(a.size, a.layers, a.memories, a.vocab);
    config.validate()?;
    let r = count_ops(&config, shape);
    let measured = instrumented_ops(&config, shape, 0)?;
    println!("component\tformula\tinstrumented");
    println!(
        "question_encoder\t{}\t{}",
        r.question_encoder, measured.question_encoder
    );
    println!("word_encoder\t{}\t-", r.word_encoder);
    println!("sentence_encoder\t{}\t-", r.sentence_encoder);
    println!("document\t{}\t{}", r.document(), measured.document);
    println!("memory\t{}\t{}", r.memory, measured.memory);
    println!("memory_attention\t{}\t-", r.memory_attention);
    println!("decoder\t{}\t{}", r.decoder, measured.decoder);
    println!("total\t{}\t{}", r.total(), measured.total());
    println!("baseline_memory\t{}\t-", r.baseline_memory);
    println!("ratio\t{:.4}", r.ratio());
    println!("attend_ratio\t{:.4}", r.attend_ratio());
    Ok(())
}

fn reproduce_cmd(a: ReproduceArgs) -> Result<()> {
    let opts = ReproduceOptions {
        tasks: a.tasks,
        multiplier: a.multiplier,
        jobs: a.jobs,
        seed: a.seed,
        wall_clock: !a.no_wall_clock,
    };
    let quiet = a.quiet;
    let report = reproduce_table1(&a.data_dir, &opts, |task, e| {
        if !quiet {
            eprintln!("task {task}\t{}", log_line(e));
        }
    })?;
    let tsv = report.to_tsv();
    print!("{tsv}");
    if let Some(path) = a.out.as_deref() {
        write_report(path, &tsv)?;
    }
    Ok(())
}

fn write_report(path: &Path, tsv: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, tsv)?;
    Ok(())
}
