//! Attention heatmaps as TSV: one row per (step, attended item).
//!
//! ```text
//! section  step  index  weight  text
//! memory   1     1      0.031   mary moved to the bathroom
//! decoder  1     1      1       memory 1
//! ```
//!
//! Steps and indices count from 1.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::AttentionRecord;

pub const HEATMAP_HEADER: &str = "section\tstep\tindex\tweight\ttext";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Section {
    /// Memory steps over story sentences.
    Memory,
    /// Decoder steps over memories.
    Decoder,
}

impl Section {
    pub fn name(self) -> &'static str {
        match self {
            Section::Memory => "memory",
            Section::Decoder => "decoder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatRow {
    pub section: Section,
    pub step: usize,
    pub index: usize,
    pub weight: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeatmapDump {
    pub rows: Vec<HeatRow>,
}

impl HeatmapDump {
    /// Rows for `record`; `sentences` are the story sentences the memory
    /// steps attended over.
    pub fn from_record<S: AsRef<str>>(record: &AttentionRecord, sentences: &[S]) -> Result<Self> {
        let mut rows = Vec::new();
        for (step, weights) in record.memory_attention.iter().enumerate() {
            if weights.len() != sentences.len() {
                return Err(Error::Contract(format!(
                    "memory step {} has {} weights for {} sentences",
                    step + 1,
                    weights.len(),
                    sentences.len()
                )));
            }
            for (i, (&weight, text)) in weights.iter().zip(sentences).enumerate() {
                rows.push(HeatRow {
                    section: Section::Memory,
                    step: step + 1,
                    index: i + 1,
                    weight,
                    text: text.as_ref().replace(['\t', '\n'], " "),
                });
            }
        }
        for (step, weights) in record.decoder_attention.iter().enumerate() {
            for (i, &weight) in weights.iter().enumerate() {
                rows.push(HeatRow {
                    section: Section::Decoder,
                    step: step + 1,
                    index: i + 1,
                    weight,
                    text: format!("memory {}", i + 1),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(HEATMAP_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.section.name(),
                r.step,
                r.index,
                r.weight,
                r.text
            )
            .unwrap();
        }
        s
    }

    /// Total weight of every `(section, step)` in order of appearance.
    pub fn step_sums(&self) -> Vec<(Section, usize, f64)> {
        let mut out: Vec<(Section, usize, f64)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((s, t, sum)) if *s == r.section && *t == r.step => *sum += r.weight,
                _ => out.push((r.section, r.step, r.weight)),
            }
        }
        out
    }

    /// Index of the most attended item of a step.
    pub fn argmax(&self, section: Section, step: usize) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.section == section && r.step == step)
            .fold(None, |best: Option<&HeatRow>, r| match best {
                Some(b) if b.weight >= r.weight => Some(b),
                _ => Some(r),
            })
            .map(|r| r.index)
    }
}

/// Build the dump for `record` and write it to `path`.
pub fn export_attention<S: AsRef<str>>(
    record: &AttentionRecord,
    sentences: &[S],
    path: &Path,
) -> Result<HeatmapDump> {
    let dump = HeatmapDump::from_record(record, sentences)?;
    std::fs::write(path, dump.to_tsv())?;
    Ok(dump)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sentence_single_row() {
        let record = AttentionRecord {
            memory_attention: vec![vec![1.0]],
            ..Default::default()
        };
        let dump = HeatmapDump::from_record(&record, &["mary moved to the hallway"]).unwrap();
        assert_eq!(dump.rows.len(), 1);
        assert_eq!(
            dump.to_tsv(),
            format!("{HEATMAP_HEADER}\nmemory\t1\t1\t1\tmary moved to the hallway\n")
        );
    }

    #[test]
    fn sections_and_argmax() {
        let record = AttentionRecord {
            memory_attention: vec![vec![0.2, 0.7, 0.1], vec![0.5, 0.25, 0.25]],
            decoder_attention: vec![vec![0.4, 0.6]],
            ..Default::default()
        };
        let dump = HeatmapDump::from_record(&record, &["a", "b", "c"]).unwrap();
        assert_eq!(dump.rows.len(), 8);
        assert_eq!(dump.argmax(Section::Memory, 1), Some(2));
        assert_eq!(dump.argmax(Section::Memory, 2), Some(1));
        assert_eq!(dump.argmax(Section::Decoder, 1), Some(2));
        let sums = dump.step_sums();
        assert_eq!(sums.len(), 3);
        assert!(sums.iter().all(|&(_, _, s)| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sentence_count_must_match() {
        let record = AttentionRecord {
            memory_attention: vec![vec![0.5, 0.5]],
            ..Default::default()
        };
        assert!(HeatmapDump::from_record(&record, &["only one"]).is_err());
    }

    #[test]
    fn written_file_matches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("heat.tsv");
        let record = AttentionRecord {
            memory_attention: vec![vec![0.25, 0.75]],
            decoder_attention: vec![vec![1.0]],
            ..Default::default()
        };
        let dump = export_attention(&record, &["x\ty", "z"], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, dump.to_tsv());
        assert!(text.contains("x y"));
    }
}
