//! Prediction quality measurement.
//!
//! Dropout is the positive class throughout. Binary metrics with undefined
//! denominators report 0.0 and set an explicit flag rather than poisoning
//! downstream aggregates with NaN. Accuracy is also tracked per
//! (known-history, horizon) chapter pair so reports can show how quality
//! shifts as the horizon moves past the known history.

pub mod bench;

pub use bench::{compare_prompt_strategies, BenchConfig, BenchReport, RunManifest};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PredictionInstance;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("got {predictions} predictions for {instances} instances")]
    LengthMismatch { predictions: usize, instances: usize },
    #[error("pair ({c_h}, {c_p}) is outside a {max}-chapter course")]
    PairOutOfRange { c_h: u32, c_p: u32, max: u32 },
}

/// Outcome tallies; dropout is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub true_negative: u64,
    pub false_negative: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.true_positive += 1,
            (true, false) => self.false_positive += 1,
            (false, false) => self.true_negative += 1,
            (false, true) => self.false_negative += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn correct(&self) -> u64 {
        self.true_positive + self.true_negative
    }
}

/// Scalar metrics computed from counts. When a denominator is zero the
/// metric reads 0.0 and the matching `*_defined` flag is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy_defined: bool,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

impl Metrics {
    pub fn from_counts(c: &ConfusionCounts) -> Metrics {
        let (accuracy, accuracy_defined) = ratio(c.correct(), c.total());
        let (precision, precision_defined) = ratio(c.true_positive, c.true_positive + c.false_positive);
        let (recall, recall_defined) = ratio(c.true_positive, c.true_positive + c.false_negative);
        let f1_defined = precision_defined && recall_defined && precision + recall > 0.0;
        let f1 = if f1_defined { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
            accuracy_defined,
            precision_defined,
            recall_defined,
            f1_defined,
        }
    }
}

/// Per-(c_h, c_p) accuracy cells. Only pairs with c_p >= c_h exist; cells
/// below the diagonal stay empty by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAccuracyMatrix {
    pub chapter_count: u32,
    /// Row-major (correct, total) per cell, indexed [c_h - 1][c_p - 1].
    cells: Vec<Vec<(u64, u64)>>,
}

impl PairAccuracyMatrix {
    pub fn new(chapter_count: u32) -> PairAccuracyMatrix {
        let l = chapter_count as usize;
        PairAccuracyMatrix { chapter_count, cells: vec![vec![(0, 0); l]; l] }
    }

    pub fn record(&mut self, c_h: u32, c_p: u32, correct: bool) -> Result<(), EvalError> {
        let l = self.chapter_count;
        if c_h < 1 || c_p < c_h || c_p > l {
            return Err(EvalError::PairOutOfRange { c_h, c_p, max: l });
        }
        let cell = &mut self.cells[(c_h - 1) as usize][(c_p - 1) as usize];
        cell.1 += 1;
        if correct {
            cell.0 += 1;
        }
        Ok(())
    }

    pub fn counts(&self, c_h: u32, c_p: u32) -> Option<(u64, u64)> {
        if c_h < 1 || c_p < c_h || c_p > self.chapter_count {
            return None;
        }
        Some(self.cells[(c_h - 1) as usize][(c_p - 1) as usize])
    }

    /// Cell accuracy, None when the pair is invalid or has no samples.
    pub fn accuracy(&self, c_h: u32, c_p: u32) -> Option<f64> {
        match self.counts(c_h, c_p) {
            Some((correct, total)) if total > 0 => Some(correct as f64 / total as f64),
            _ => None,
        }
    }

    /// Pooled accuracy over every recorded sample.
    pub fn overall_accuracy(&self) -> Option<f64> {
        let (mut correct, mut total) = (0u64, 0u64);
        for row in &self.cells {
            for &(c, t) in row {
                correct += c;
                total += t;
            }
        }
        if total == 0 {
            None
        } else {
            Some(correct as f64 / total as f64)
        }
    }

    /// Pooled accuracy per horizon gap c_p - c_h, indexed by gap 0..L.
    pub fn by_gap(&self) -> Vec<Option<f64>> {
        let l = self.chapter_count as usize;
        let mut sums = vec![(0u64, 0u64); l];
        for (row, cells) in self.cells.iter().enumerate() {
            for (col, &(c, t)) in cells.iter().enumerate() {
                if col >= row {
                    let gap = col - row;
                    sums[gap].0 += c;
                    sums[gap].1 += t;
                }
            }
        }
        sums.into_iter()
            .map(|(c, t)| if t == 0 { None } else { Some(c as f64 / t as f64) })
            .collect()
    }

    /// Fixed-width text grid; below-diagonal cells are blank, empty cells
    /// print a dash.
    pub fn render_grid(&self) -> String {
        let l = self.chapter_count;
        let mut out = String::new();
        out.push_str(&" ".repeat(7));
        for c_p in 1..=l {
            out.push_str(&format!("{:>8}", format!("c_p={c_p}")));
        }
        out.push('\n');
        for c_h in 1..=l {
            out.push_str(&format!("{:<7}", format!("c_h={c_h}")));
            for c_p in 1..=l {
                let cell = if c_p < c_h {
                    String::new()
                } else {
                    match self.accuracy(c_h, c_p) {
                        Some(a) => format!("{a:.3}"),
                        None => "-".to_string(),
                    }
                };
                out.push_str(&format!("{cell:>8}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Full evaluation of predicted labels against instance labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub matrix: PairAccuracyMatrix,
}

pub fn evaluate(
    instances: &[PredictionInstance],
    predicted: &[bool],
    chapter_count: u32,
) -> Result<EvalReport, EvalError> {
    if instances.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predicted.len(),
            instances: instances.len(),
        });
    }
    let mut counts = ConfusionCounts::default();
    let mut matrix = PairAccuracyMatrix::new(chapter_count);
    for (inst, &pred) in instances.iter().zip(predicted) {
        counts.add(pred, inst.label);
        matrix.record(inst.c_h, inst.c_p, pred == inst.label)?;
    }
    Ok(EvalReport { counts, metrics: Metrics::from_counts(&counts), matrix })
}
