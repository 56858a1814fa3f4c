//! Monte Carlo sample batches and their CSV form.
//!
//! One row per (phase, output subset, sample, output) with the class-1 score
//! of the base model on that noisy input. Scores are written with shortest
//! round-trip formatting, so certifying from a reloaded file reproduces a
//! fresh run exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class-1 scores of one output subset for one sampling phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// 1 selects the candidate, 2 estimates its bound.
    pub phase: u8,
    pub subset: usize,
    pub outputs: Vec<usize>,
    /// `scores[sample][k]` for output `outputs[k]`.
    pub scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub batches: Vec<SampleBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    phase: u8,
    subset: usize,
    sample: usize,
    output: usize,
    label: u8,
    score: f64,
}

impl SampleSet {
    pub fn batch(&self, phase: u8, subset: usize) -> Option<&SampleBatch> {
        self.batches.iter().find(|b| b.phase == phase && b.subset == subset)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for b in &self.batches {
            for (s, row) in b.scores.iter().enumerate() {
                for (&output, &score) in b.outputs.iter().zip(row) {
                    out.serialize(Row {
                        phase: b.phase,
                        subset: b.subset,
                        sample: s,
                        output,
                        label: u8::from(score > 0.5),
                        score,
                    })?;
                }
            }
        }
        out.flush().map_err(|e| Error::io("sample csv", e))?;
        Ok(())
    }

    /// Parses the CSV form. Rows of one batch must be contiguous, samples
    /// numbered from 0 in order and every sample must list the same outputs.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut batches: Vec<SampleBatch> = Vec::new();
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            let at = |msg: String| Error::Input(format!("sample row {}: {msg}", line + 1));
            if !(0.0..=1.0).contains(&row.score) {
                return Err(at(format!("score {} outside [0, 1]", row.score)));
            }
            if row.label != u8::from(row.score > 0.5) {
                return Err(at(format!("label {} disagrees with score {}", row.label, row.score)));
            }
            if !matches!(row.phase, 1 | 2) {
                return Err(at(format!("phase {} must be 1 or 2", row.phase)));
            }
            let same = batches.last().is_some_and(|b| b.phase == row.phase && b.subset == row.subset);
            if !same {
                if batches.iter().any(|b| b.phase == row.phase && b.subset == row.subset) {
                    return Err(at(format!("batch (phase {}, subset {}) is not contiguous", row.phase, row.subset)));
                }
                if row.sample != 0 {
                    return Err(at("a batch must start at sample 0".into()));
                }
                batches.push(SampleBatch {
                    phase: row.phase,
                    subset: row.subset,
                    outputs: Vec::new(),
                    scores: Vec::new(),
                });
            }
            let b = batches.last_mut().expect("pushed above");
            let first = b.scores.len() <= 1 && row.sample == 0;
            if first {
                if b.scores.is_empty() {
                    b.scores.push(Vec::new());
                }
                if b.outputs.contains(&row.output) {
                    return Err(at(format!("output {} repeated in sample 0", row.output)));
                }
                b.outputs.push(row.output);
                b.scores[0].push(row.score);
                continue;
            }
            let k = b.scores.last().map_or(0, Vec::len);
            if k == b.outputs.len() {
                if row.sample != b.scores.len() {
                    return Err(at(format!("expected sample {}, found {}", b.scores.len(), row.sample)));
                }
                b.scores.push(Vec::new());
            } else if row.sample != b.scores.len() - 1 {
                return Err(at(format!("sample {} is missing outputs", b.scores.len() - 1)));
            }
            let row_scores = b.scores.last_mut().expect("nonempty");
            let k = row_scores.len();
            if b.outputs[k] != row.output {
                return Err(at(format!("expected output {}, found {}", b.outputs[k], row.output)));
            }
            row_scores.push(row.score);
        }
        if let Some(b) = batches.iter().find(|b| b.scores.last().is_some_and(|r| r.len() != b.outputs.len())) {
            return Err(Error::Input(format!(
                "last sample of batch (phase {}, subset {}) is incomplete",
                b.phase, b.subset
            )));
        }
        Ok(SampleSet { batches })
    }
}
