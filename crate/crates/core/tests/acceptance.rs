//! One PASS/FAIL line per acceptance criterion. Exits nonzero on any FAIL.
//!
//! Reproduction criteria train on generated task files (10,000 training and
//! 1,000 test questions) and take a few minutes on one core per task; the
//! three runs share a thread pool.

mod common;

use std::time::Instant;

use amn::data::{split_train_val, Batch, Example};
use amn::instrument::{
    count_ops, instrumented_ops, last_mention, oracle_task1, reported_solved, solved, StoryShape,
};
use amn::model::{write_checkpoint, Model, ModelConfig, ModelParams};
use amn::params::{Binding, Init};
use amn::recurrent::Dropout;
use amn::tensor::{grad_check, Tape, Tensor, TensorError, Var};
use amn::train::{evaluate, train, TaskRun, TrainConfig, TABLE2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { name, pass, detail }
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

fn probe(tape: &mut Tape<f64>, out: Var) -> amn::tensor::Result<Var> {
    let (r, c) = tape.dims(out);
    let w = (0..r * c)
        .map(|i| 0.5 + ((i * 7 + 3) % 11) as f64 / 10.0)
        .collect();
    let weighted = tape.mul_const(out, w)?;
    tape.sum(weighted)
}

type OpFn = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> amn::tensor::Result<Var>>;

/// A random instance of every differentiable operation.
fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, OpFn, Vec<Tensor<f64>>)> {
    let (r, c, k) = (
        rng.gen_range(1..=5),
        rng.gen_range(1..=5),
        rng.gen_range(1..=5),
    );
    let a = rand_matrix(rng, r, c);
    let b = rand_matrix(rng, r, c);
    let mut mask: Vec<bool> = (0..r * c).map(|_| rng.gen()).collect();
    for row in mask.chunks_mut(c) {
        row[0] = true;
    }
    let live: Vec<bool> = (0..r).map(|_| rng.gen()).collect();
    let idx: Vec<usize> = (0..2 * r).map(|i| (i * 5) % r).collect();
    let targets: Vec<usize> = (0..r).map(|_| rng.gen_range(0..c)).collect();
    let weights: Vec<f64> = (0..r).map(|_| rng.gen_range(0.1..1.0)).collect();
    vec![
        (
            "matmul",
            Box::new(|t, v| t.matmul(v[0], v[1])),
            vec![a.clone(), rand_matrix(rng, c, k)],
        ),
        (
            "add",
            Box::new(|t, v| t.add(v[0], v[1])),
            vec![a.clone(), b.clone()],
        ),
        (
            "sub",
            Box::new(|t, v| t.sub(v[0], v[1])),
            vec![a.clone(), b.clone()],
        ),
        (
            "mul",
            Box::new(|t, v| t.mul(v[0], v[1])),
            vec![a.clone(), b.clone()],
        ),
        (
            "add_bias",
            Box::new(|t, v| t.add_bias(v[0], v[1])),
            vec![a.clone(), rand_matrix(rng, 1, c)],
        ),
        ("tanh", Box::new(|t, v| t.tanh(v[0])), vec![a.clone()]),
        ("sigmoid", Box::new(|t, v| t.sigmoid(v[0])), vec![a.clone()]),
        (
            "one_minus",
            Box::new(|t, v| t.one_minus(v[0])),
            vec![a.clone()],
        ),
        (
            "scale",
            Box::new(|t, v| t.scale(v[0], -1.7)),
            vec![a.clone()],
        ),
        ("sum", Box::new(|t, v| t.sum(v[0])), vec![a.clone()]),
        (
            "concat_cols",
            Box::new(|t, v| t.concat_cols(&[v[0], v[1]])),
            vec![a.clone(), rand_matrix(rng, r, k)],
        ),
        (
            "stack_rows",
            Box::new(|t, v| t.stack_rows(&[v[0], v[1]])),
            vec![a.clone(), b.clone()],
        ),
        (
            "gather_rows",
            Box::new(move |t, v| t.gather_rows(v[0], &idx)),
            vec![a.clone()],
        ),
        (
            "reshape",
            Box::new(move |t, v| t.reshape(v[0], c, r)),
            vec![a.clone()],
        ),
        (
            "softmax_masked",
            Box::new(move |t, v| t.softmax_masked(v[0], &mask)),
            vec![a.clone()],
        ),
        (
            "weighted_row_sum",
            Box::new(|t, v| t.weighted_row_sum(v[0], v[1])),
            vec![rand_matrix(rng, r, k), rand_matrix(rng, r * k, c)],
        ),
        (
            "masked_update",
            Box::new(move |t, v| t.masked_update(v[0], v[1], &live)),
            vec![a.clone(), b.clone()],
        ),
        (
            "cross_entropy",
            Box::new(move |t, v| t.cross_entropy(v[0], &targets, &weights)),
            vec![a],
        ),
    ]
}

fn gradient_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = (0.0f64, "");
    for _ in 0..20 {
        for (name, f, inputs) in op_cases(&mut rng) {
            let scalar = name == "cross_entropy" || name == "sum";
            let report = grad_check(
                |t, v| {
                    let out = f(t, v)?;
                    if scalar {
                        Ok(out)
                    } else {
                        probe(t, out)
                    }
                },
                &inputs,
                1e-5,
            )
            .unwrap();
            if report.max_rel_error > worst.0 {
                worst = (report.max_rel_error, name);
            }
        }
    }

    let (vocab, ex) = common::synthetic(1, 3, 11);
    let base = ex[0].clone();
    let toy = Example {
        story: base.story[..2].to_vec(),
        lines: vec![1, 2],
        ..base
    };
    let cfg = ModelConfig {
        max_sentence_len: toy.max_sentence_len(),
        max_answer_len: toy.answer.len() + 1,
        ..ModelConfig::new(4, 1, 1, vocab.len())
    };
    let params = ModelParams::<f64>::init_with(&cfg, 5, Init::Uniform(1.0)).unwrap();
    let model = Model {
        config: cfg,
        vocab,
        params,
    };
    let batch = Batch::single(&toy);
    let inputs = model.params.store.tensors().to_vec();
    let full = grad_check(
        |tape: &mut Tape<f64>, vars| {
            let m = model.params.bind_with(Binding::from_vars(vars.to_vec()));
            model
                .loss_with(tape, &m, &batch, &mut Dropout::inference())
                .map_err(|e| TensorError::Contract(e.to_string()))
        },
        &inputs,
        1e-4,
    )
    .unwrap();
    verdict(
        "gradient correctness",
        worst.0 < 1e-4 && full.max_rel_error < 1e-4,
        format!(
            "ops max rel {:.2e} ({}), toy model max rel {:.2e}",
            worst.0, worst.1, full.max_rel_error
        ),
    )
}

struct Reproduction {
    task: usize,
    run: TaskRun,
    model_val: Vec<Example>,
    secs: f64,
}

/// Table 2 configuration and the reproduction schedule on generated data.
fn reproduce(task: usize, seed: u64) -> Reproduction {
    let start = Instant::now();
    let (vocab, all) = common::synthetic(task, 11_000, 42);
    let (trainval, test) = all.split_at(10_000);
    let (tr, val) = split_train_val(trainval);
    let (size, depth, memories, _) = TABLE2[task - 1];
    let config = ModelConfig {
        max_sentence_len: all.iter().map(|e| e.max_sentence_len()).max().unwrap(),
        max_answer_len: all.iter().map(|e| e.answer.len()).max().unwrap() + 1,
        ..ModelConfig::new(size, depth, memories, vocab.len())
    };
    let model = Model::<f32>::init(config, vocab, seed).unwrap();
    let cfg = TrainConfig {
        wall_clock: false,
        ..TrainConfig::reproduction(task, 3.0, seed ^ 3).unwrap()
    };
    let outcome = train(model, &tr, &val, &cfg, |_| {}).unwrap();
    let test_error = evaluate(&outcome.best, test).unwrap();
    Reproduction {
        task,
        run: TaskRun {
            outcome,
            test_error,
        },
        model_val: val,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn describe(r: &Reproduction) -> String {
    let o = &r.run.outcome;
    format!(
        "task {}: best val {:.3} at batch {} of {} ({:?}), test {:.3}, {:.0}s",
        r.task,
        o.best_val_error.unwrap_or(1.0),
        o.best_batch,
        o.batches,
        o.stop,
        r.run.test_error,
        r.secs
    )
}

fn attention_normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut rows = 0;
    for _ in 0..1000 {
        let model = common::random_model(&mut rng);
        let ex = common::random_example(&mut rng, model.config.vocab_size);
        let p = model.predict(&Batch::single(&ex)).unwrap().pop().unwrap();
        rows += p.record.memory_attention.len() + p.record.decoder_attention.len();
        worst = worst.max(common::attention_row_error(&p.record));
    }
    verdict(
        "attention normalization",
        worst < 1e-6,
        format!("1000 passes, {rows} rows, max |sum - 1| {worst:.2e}"),
    )
}

fn efficiency() -> Verdict {
    let shape = |sentences, words| StoryShape {
        sentences,
        words,
        question: 4,
        answer: 1,
    };
    let mut failures = 0;
    let mut worst_attend: f64 = 0.0;
    let mut worst_instr: f64 = 0.0;
    for &(e, depth, m, _) in &TABLE2 {
        let cfg = ModelConfig::new(e, depth, m, 40);
        for s in 2..=100 {
            let r = count_ops(&cfg, shape(s, 6));
            worst_attend = worst_attend.max(r.attend_ratio());
            if r.memory_attention >= r.baseline_memory {
                failures += 1;
            }
            if [1, 12, 60]
                .iter()
                .any(|&w| count_ops(&cfg, shape(s, w)).memory != r.memory)
            {
                failures += 1;
            }
        }
        for s in [2, 10, 40] {
            let want = count_ops(&cfg, shape(s, 6));
            let got = instrumented_ops(&cfg, shape(s, 6), 1).unwrap();
            for (a, b) in [
                (got.total(), want.total()),
                (got.memory, want.memory),
                (got.document, want.document()),
                (got.decoder, want.decoder),
            ] {
                worst_instr = worst_instr.max((a as f64 - b as f64).abs() / b as f64);
            }
        }
    }
    verdict(
        "efficiency",
        failures == 0 && worst_instr < 0.01,
        format!(
            "{failures} violations, max attend/baseline {worst_attend:.3}, formula vs counter {worst_instr:.2e}"
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let text = amn::data::synth::generate(1, 10_000, 42).unwrap();
    let raw = amn::data::parse_babi_str(&text, "task 1").unwrap();
    let (_, val) = split_train_val(&raw);
    let agree = val
        .iter()
        .filter(|ex| oracle_task1(&ex.story, &ex.question).ok().as_ref() == Some(&ex.answer[0]))
        .count();
    verdict(
        "oracle equivalence",
        agree == val.len() && !val.is_empty(),
        format!("{agree}/{} validation answers", val.len()),
    )
}

fn overfit() -> Verdict {
    let (vocab, all) = common::synthetic(1, 50, 8);
    let model = common::small_model(&vocab, &all, 32, 1, 1, 2).cast::<f32>();
    let cfg = TrainConfig {
        eval_every: 50 * 20,
        anneal_after: 2000,
        wall_clock: false,
        ..TrainConfig::new(0.01, 5.0, 2000, 6)
    };
    let out = train(model, &all, &all, &cfg, |_| {}).unwrap();
    let hit = out.log.entries.iter().find(|e| e.train_loss < 0.01);
    verdict(
        "overfit sanity",
        hit.is_some(),
        match hit {
            Some(e) => format!("loss {:.4} at batch {}", e.train_loss, e.batch),
            None => format!(
                "final loss {:.4}",
                out.log.entries.last().map_or(f64::NAN, |e| e.train_loss)
            ),
        },
    )
}

fn determinism() -> Verdict {
    let run = || {
        let (vocab, all) = common::synthetic(1, 600, 9);
        let model = common::small_model(&vocab, &all, 16, 1, 1, 4).cast::<f32>();
        let (tr, val) = all.split_at(500);
        let cfg = TrainConfig {
            wall_clock: false,
            eval_every: 500,
            ..TrainConfig::new(0.01, 5.0, 60, 3)
        };
        let out = train(model, tr, val, &cfg, |_| {}).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &out.best).unwrap();
        (out.log.to_tsv(), bytes)
    };
    let (a, b) = (run(), run());
    verdict(
        "determinism",
        a == b,
        format!("log {} bytes, checkpoint {} bytes", a.0.len(), a.1.len()),
    )
}

/// Share of validation examples whose memory attention peaks on the last
/// sentence mentioning the actor.
fn last_mention_rate(r: &Reproduction) -> String {
    let model = &r.run.outcome.best;
    let mut hits = 0;
    let n = r.model_val.len().min(500);
    for ex in &r.model_val[..n] {
        let story: Vec<Vec<&str>> = ex.story.iter().map(|s| model.vocab.decode(s)).collect();
        let question = model.vocab.decode(&ex.question);
        let p = model.predict(&Batch::single(ex)).unwrap().pop().unwrap();
        let row = &p.record.memory_attention[0];
        let peak = (0..row.len())
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .unwrap();
        if last_mention(&story, &question).unwrap() == Some(peak) {
            hits += 1;
        }
    }
    format!("{hits}/{n}")
}

fn main() {
    let mut verdicts = vec![gradient_correctness()];

    let runs: Vec<Reproduction> = std::thread::scope(|s| {
        let handles: Vec<_> = [1, 4, 12]
            .into_iter()
            .map(|t| s.spawn(move || reproduce(t, 1)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let t1 = &runs[0];
    let o1 = &t1.run.outcome;
    verdicts.push(verdict(
        "task 1 reproduction",
        o1.best_val_error.is_some_and(|v| v < 0.05)
            && o1.best_batch <= 3000
            && t1.run.test_error <= 0.05,
        describe(t1),
    ));
    verdicts.push(verdict(
        "task 4 reproduction",
        runs[1].run.outcome.batches <= 3600 && runs[1].run.test_error <= 0.05,
        describe(&runs[1]),
    ));
    let matches: Vec<String> = runs
        .iter()
        .map(|r| {
            let ok = solved(r.run.test_error) == reported_solved(r.task).unwrap();
            format!("task {} {}", r.task, if ok { "matches" } else { "differs" })
        })
        .collect();
    verdicts.push(verdict(
        "solved outcomes match published",
        matches.iter().all(|m| m.ends_with("matches")),
        format!("{}; {}", matches.join(", "), describe(&runs[2])),
    ));

    verdicts.push(attention_normalization());
    verdicts.push(efficiency());
    verdicts.push(oracle_equivalence());
    verdicts.push(overfit());
    verdicts.push(determinism());

    for v in &verdicts {
        println!(
            "{} {}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    println!(
        "INFO last-mention probe on task 1: {}",
        last_mention_rate(t1)
    );
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    if failed > 0 {
        println!("{failed} of {} criteria failed", verdicts.len());
        std::process::exit(1);
    }
}
