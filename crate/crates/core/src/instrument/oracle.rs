use crate::error::{Error, Result};

/// Verbs of task-1 movement statements.
pub const MOVE_VERBS: [&str; 4] = ["moved", "went", "journeyed", "travelled"];

/// The actor a `where is X` question asks about.
fn questioned_actor<S: AsRef<str>>(question: &[S]) -> Result<&str> {
    match question {
        [w, .., x] if w.as_ref() == "where" => Ok(x.as_ref()),
        _ => Err(Error::Contract(format!(
            "not a where-question: {:?}",
            question.iter().map(AsRef::as_ref).collect::<Vec<_>>()
        ))),
    }
}

fn is_move<S: AsRef<str>>(sentence: &[S]) -> bool {
    sentence.iter().any(|w| MOVE_VERBS.contains(&w.as_ref()))
}

/// Index of the last movement statement whose subject is the questioned
/// actor.
pub fn last_mention<S: AsRef<str>>(story: &[Vec<S>], question: &[S]) -> Result<Option<usize>> {
    let actor = questioned_actor(question)?;
    Ok(story
        .iter()
        .rposition(|s| s.first().is_some_and(|w| w.as_ref() == actor) && is_move(s)))
}

/// Location of the questioned actor's most recent move.
pub fn oracle_task1<S: AsRef<str>>(story: &[Vec<S>], question: &[S]) -> Result<String> {
    match last_mention(story, question)? {
        Some(i) => Ok(story[i].last().unwrap().as_ref().to_string()),
        None => Err(Error::NoAnswer(format!(
            "{} never moves in the story",
            questioned_actor(question)?
        ))),
    }
}
