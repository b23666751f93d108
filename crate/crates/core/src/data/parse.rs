use std::path::Path;

use super::Example;
use crate::error::{Error, Result};

/// Lowercase, split on whitespace and drop `.`, `?`, `!` and `,`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| matches!(c, '.' | '?' | '!' | ','))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn parse_babi_file(path: &Path) -> Result<Vec<Example<String>>> {
    let text = std::fs::read_to_string(path)?;
    parse_babi_str(&text, &path.display().to_string())
}

/// Parse bAbi v1.2 text. `source` names the input in error messages.
///
/// Statements look like `N words .`, questions like
/// `N words ?<TAB>answer<TAB>supporting line numbers`. A line numbered 1
/// starts a new story. Each question becomes one example whose story is every
/// statement seen so far in the current story; questions are never part of a
/// story.
pub fn parse_babi_str(text: &str, source: &str) -> Result<Vec<Example<String>>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut examples = Vec::new();
    let mut story: Vec<Vec<String>> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let trimmed = raw.trim_start();
        let (num, rest) = trimmed
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(lineno, "expected a line number followed by text".into()))?;
        let n: usize = num
            .parse()
            .map_err(|_| err(lineno, format!("expected a line number, found {num:?}")))?;
        if n == 1 {
            story.clear();
            lines.clear();
        }
        if rest.contains('\t') {
            let mut fields = rest.split('\t');
            let question = tokenize(fields.next().unwrap_or_default());
            let answer_field = fields
                .next()
                .ok_or_else(|| err(lineno, "question line without an answer".into()))?;
            let support_field = fields
                .next()
                .ok_or_else(|| err(lineno, "question line without supporting facts".into()))?;
            if question.is_empty() {
                return Err(err(lineno, "empty question".into()));
            }
            let answer: Vec<String> = answer_field
                .split(',')
                .map(|a| a.trim().to_lowercase())
                .filter(|a| !a.is_empty())
                .collect();
            if answer.is_empty() {
                return Err(err(lineno, "empty answer".into()));
            }
            let mut supporting = Vec::new();
            for s in support_field.split_whitespace() {
                let id: usize = s
                    .parse()
                    .map_err(|_| err(lineno, format!("bad supporting fact id {s:?}")))?;
                let idx = lines.iter().position(|&l| l == id).ok_or_else(|| {
                    err(
                        lineno,
                        format!("supporting fact {id} is not a statement of this story"),
                    )
                })?;
                supporting.push(idx);
            }
            examples.push(Example {
                story: story.clone(),
                lines: lines.clone(),
                question,
                answer,
                supporting,
            });
        } else {
            if rest.trim_end().ends_with('?') {
                return Err(err(
                    lineno,
                    "question line is missing its tab-separated answer".into(),
                ));
            }
            let tokens = tokenize(rest);
            if tokens.is_empty() {
                return Err(err(lineno, "empty statement".into()));
            }
            story.push(tokens);
            lines.push(n);
        }
    }
    Ok(examples)
}
