use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Example, EOS, PAD};

/// A padded group of examples.
///
/// All token grids are row-major with `PAD` in dead positions and a parallel
/// liveness mask. Story tokens are laid out as
/// `[example][sentence][word]`, i.e. index `(b·S + s)·W + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the examples in the slice the batch was built from.
    pub indices: Vec<usize>,
    pub size: usize,
    pub max_sentences: usize,
    pub max_words: usize,
    pub max_question: usize,
    /// Longest answer plus its terminating EOS.
    pub max_answer: usize,
    pub story: Vec<usize>,
    pub story_mask: Vec<bool>,
    /// `B × S`: which sentence slots hold a real sentence.
    pub sentence_mask: Vec<bool>,
    pub question: Vec<usize>,
    pub question_mask: Vec<bool>,
    /// Gold answers followed by EOS, `B × T`.
    pub answer: Vec<usize>,
    pub answer_mask: Vec<bool>,
}

impl Batch {
    pub fn new(examples: &[&Example], indices: Vec<usize>) -> Self {
        let size = examples.len();
        let max_sentences = examples
            .iter()
            .map(|e| e.story.len())
            .max()
            .unwrap_or(0)
            .max(1);
        let max_words = examples
            .iter()
            .map(|e| e.max_sentence_len())
            .max()
            .unwrap_or(0)
            .max(1);
        let max_question = examples
            .iter()
            .map(|e| e.question.len())
            .max()
            .unwrap_or(0)
            .max(1);
        let max_answer = examples
            .iter()
            .map(|e| e.answer.len() + 1)
            .max()
            .unwrap_or(1);
        let (s_max, w_max) = (max_sentences, max_words);
        let mut story = vec![PAD; size * s_max * w_max];
        let mut story_mask = vec![false; size * s_max * w_max];
        let mut sentence_mask = vec![false; size * s_max];
        let mut question = vec![PAD; size * max_question];
        let mut question_mask = vec![false; size * max_question];
        let mut answer = vec![PAD; size * max_answer];
        let mut answer_mask = vec![false; size * max_answer];
        for (b, e) in examples.iter().enumerate() {
            for (s, sent) in e.story.iter().enumerate() {
                sentence_mask[b * s_max + s] = true;
                for (w, &tok) in sent.iter().enumerate() {
                    let i = (b * s_max + s) * w_max + w;
                    story[i] = tok;
                    story_mask[i] = true;
                }
            }
            for (t, &tok) in e.question.iter().enumerate() {
                question[b * max_question + t] = tok;
                question_mask[b * max_question + t] = true;
            }
            for (t, &tok) in e.answer.iter().chain(std::iter::once(&EOS)).enumerate() {
                answer[b * max_answer + t] = tok;
                answer_mask[b * max_answer + t] = true;
            }
        }
        Self {
            indices,
            size,
            max_sentences,
            max_words,
            max_question,
            max_answer,
            story,
            story_mask,
            sentence_mask,
            question,
            question_mask,
            answer,
            answer_mask,
        }
    }

    /// Batch from a subset of `examples`.
    pub fn from_indices(examples: &[Example], indices: &[usize]) -> Self {
        let picked: Vec<&Example> = indices.iter().map(|&i| &examples[i]).collect();
        Self::new(&picked, indices.to_vec())
    }

    pub fn single(example: &Example) -> Self {
        Self::new(&[example], vec![0])
    }
}

/// One shuffled epoch of batches covering every example exactly once; the
/// last batch may be smaller.
pub fn batchify(examples: &[Example], batch_size: usize, seed: u64) -> Vec<Batch> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
        .chunks(batch_size)
        .map(|c| Batch::from_indices(examples, c))
        .collect()
}

/// Endless stream of full batches, reshuffling at every epoch boundary.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(num_examples: usize, batch_size: usize, seed: u64) -> Self {
        assert!(num_examples > 0 && batch_size > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..num_examples).collect();
        order.shuffle(&mut rng);
        Self {
            order,
            pos: 0,
            batch_size,
            rng,
        }
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}
