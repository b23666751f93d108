#![allow(dead_code)]

use amn::data::{parse_babi_str, synth, Example, Vocabulary};
use amn::model::{Model, ModelConfig};

pub fn synthetic(task: usize, questions: usize, seed: u64) -> (Vocabulary, Vec<Example>) {
    let text = synth::generate(task, questions, seed).unwrap();
    let raw = parse_babi_str(&text, "synthetic").unwrap();
    let vocab = Vocabulary::build(&raw);
    let encoded = vocab.encode_all(&raw).unwrap();
    (vocab, encoded)
}

pub fn small_model(
    vocab: &Vocabulary,
    examples: &[Example],
    size: usize,
    depth: usize,
    memories: usize,
    seed: u64,
) -> Model<f64> {
    let cfg = ModelConfig {
        max_sentence_len: examples.iter().map(|e| e.max_sentence_len()).max().unwrap(),
        max_answer_len: examples.iter().map(|e| e.answer.len()).max().unwrap() + 1,
        ..ModelConfig::new(size, depth, memories, vocab.len())
    };
    Model::init(cfg, vocab.clone(), seed).unwrap()
}

/// A story of random shape over word ids `4..vocab_size`.
pub fn random_example(rng: &mut impl rand::Rng, vocab_size: usize) -> Example {
    let word = |rng: &mut dyn rand::RngCore| rand::Rng::gen_range(rng, 4..vocab_size);
    let sentences = rng.gen_range(1..=8);
    let story: Vec<Vec<usize>> = (0..sentences)
        .map(|_| (0..rng.gen_range(1..=6)).map(|_| word(rng)).collect())
        .collect();
    Example {
        lines: (1..=sentences).collect(),
        question: (0..rng.gen_range(1..=4)).map(|_| word(rng)).collect(),
        answer: (0..rng.gen_range(1..=2)).map(|_| word(rng)).collect(),
        supporting: vec![],
        story,
    }
}

/// A random configuration and an untrained model for it.
pub fn random_model(rng: &mut impl rand::Rng) -> Model<f64> {
    let vocab_size = rng.gen_range(8..30);
    let tokens: Vec<String> = (4..vocab_size).map(|i| format!("w{i:02}")).collect();
    let vocab = Vocabulary::from_tokens(tokens).unwrap();
    let cfg = ModelConfig {
        max_sentence_len: 6,
        max_answer_len: 3,
        ..ModelConfig::new(
            rng.gen_range(2..=12),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            vocab.len(),
        )
    };
    Model::init(cfg, vocab, rng.gen()).unwrap()
}

/// Largest deviation from 1 of any attention row of `record`.
pub fn attention_row_error(record: &amn::model::AttentionRecord) -> f64 {
    record
        .memory_attention
        .iter()
        .chain(&record.decoder_attention)
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}
