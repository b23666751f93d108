//! Generator for bAbi-style task files.
//!
//! Produces text in the v1.2 line format for the tasks whose world model is
//! simple enough to restate here: location tracking (task 1), two-argument
//! spatial relations (task 4) and conjunction (task 12). Files use the en-10k
//! naming, so [`TaskData::load`](super::TaskData::load) reads them like the
//! distribution files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{task_file_name, Part};
use crate::error::{Error, Result};

pub const ACTORS: [&str; 4] = ["Mary", "John", "Daniel", "Sandra"];
pub const LOCATIONS: [&str; 6] = [
    "bathroom", "hallway", "garden", "office", "bedroom", "kitchen",
];
pub const MOVES: [&str; 5] = [
    "moved to",
    "went to",
    "journeyed to",
    "travelled to",
    "went back to",
];
const DIRECTIONS: [&str; 4] = ["north", "east", "south", "west"];

/// Tasks this module can generate.
pub const SUPPORTED: [usize; 3] = [1, 4, 12];

/// Generate at least `questions` questions of `task` (whole stories only,
/// truncated to exactly `questions`).
pub fn generate(task: usize, questions: usize, seed: u64) -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (task as u64).wrapping_mul(0x9E37_79B9));
    let mut out = String::new();
    let mut emitted = 0;
    while emitted < questions {
        let story = match task {
            1 => movement_story(&mut rng, false),
            4 => relation_story(&mut rng),
            12 => movement_story(&mut rng, true),
            _ => {
                return Err(Error::Config(format!(
                    "no generator for task {task} (supported: {SUPPORTED:?})"
                )))
            }
        };
        for line in story {
            out.push_str(&line);
            out.push('\n');
            if line.contains('\t') {
                emitted += 1;
                if emitted == questions {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Write the 10,000-question training file and 1,000-question test file of
/// `task` into `dir`.
pub fn write_task(dir: &Path, task: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let train = dir.join(task_file_name(task, Part::Train)?);
    let test = dir.join(task_file_name(task, Part::Test)?);
    std::fs::write(&train, generate(task, 10_000, seed)?)?;
    std::fs::write(&test, generate(task, 1_000, seed.wrapping_add(0x5EED))?)?;
    Ok((train, test))
}

/// Five blocks of two statements and a question. With `pairs`, every
/// statement moves two actors at once.
fn movement_story(rng: &mut ChaCha8Rng, pairs: bool) -> Vec<String> {
    let mut place: [Option<(usize, usize)>; 4] = [None; 4]; // (location, line)
    let mut lines = Vec::with_capacity(15);
    let mut n = 0;
    for _ in 0..5 {
        for _ in 0..2 {
            n += 1;
            let verb = MOVES.choose(rng).unwrap();
            let loc = rng.gen_range(0..LOCATIONS.len());
            if pairs {
                let mut who: Vec<usize> = (0..ACTORS.len()).collect();
                who.shuffle(rng);
                let (a, b) = (who[0], who[1]);
                place[a] = Some((loc, n));
                place[b] = Some((loc, n));
                lines.push(format!(
                    "{n} {} and {} {verb} the {}.",
                    ACTORS[a], ACTORS[b], LOCATIONS[loc]
                ));
            } else {
                let a = rng.gen_range(0..ACTORS.len());
                let loc = match place[a] {
                    Some((cur, _)) if cur == loc => {
                        (loc + 1 + rng.gen_range(0..LOCATIONS.len() - 1)) % LOCATIONS.len()
                    }
                    _ => loc,
                };
                place[a] = Some((loc, n));
                lines.push(format!("{n} {} {verb} the {}.", ACTORS[a], LOCATIONS[loc]));
            }
        }
        n += 1;
        let known: Vec<usize> = (0..ACTORS.len()).filter(|&a| place[a].is_some()).collect();
        let who = *known.choose(rng).unwrap();
        let (loc, line) = place[who].unwrap();
        lines.push(format!(
            "{n} Where is {}? \t{}\t{line}",
            ACTORS[who], LOCATIONS[loc]
        ));
    }
    lines
}

/// Two statements sharing a location and one question about either.
fn relation_story(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut locs: Vec<usize> = (0..LOCATIONS.len()).collect();
    locs.shuffle(rng);
    let (hub, x, z) = (locs[0], locs[1], locs[2]);
    let d1 = rng.gen_range(0..4);
    // The second direction lies on the other axis, so no question has two answers.
    let d2 = (d1 + if rng.gen_bool(0.5) { 1 } else { 3 }) % 4;
    let first = (x, d1, hub);
    let second = if rng.gen_bool(0.5) {
        (z, d2, hub)
    } else {
        (hub, d2, z)
    };
    let mut lines = Vec::with_capacity(3);
    for (i, (a, d, b)) in [first, second].into_iter().enumerate() {
        lines.push(format!(
            "{} The {} is {} of the {}.",
            i + 1,
            LOCATIONS[a],
            DIRECTIONS[d],
            LOCATIONS[b]
        ));
    }
    let which = rng.gen_range(0..2);
    let (a, d, b) = if which == 0 { first } else { second };
    let mut q = String::new();
    if rng.gen_bool(0.5) {
        write!(
            q,
            "3 What is {} of the {}? \t{}\t{}",
            DIRECTIONS[d],
            LOCATIONS[b],
            LOCATIONS[a],
            which + 1
        )
        .unwrap();
    } else {
        write!(
            q,
            "3 What is the {} {} of? \t{}\t{}",
            LOCATIONS[a],
            DIRECTIONS[d],
            LOCATIONS[b],
            which + 1
        )
        .unwrap();
    }
    lines.push(q);
    lines
}
