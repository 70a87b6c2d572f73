//! Dropout prediction datasets.
//!
//! Each instance asks: given a student's interaction history before chapter
//! `c_h`, will they have dropped out by the end of chapter `c_p`? A student
//! with drop chapter D yields one instance per diagonal pair `(c, c)` plus
//! the off-diagonal pairs `(c, D)` for `c < D`, so a cohort of S students
//! over L chapters yields exactly `S * L + sum(D - 1)` instances.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::courselog::{serialize_transcript, CourseLog, InteractionRecord, LogError};

/// Errors raised while building or splitting datasets.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("test ratio {0} outside the open interval (0, 1)")]
    BadRatio(f64),
    #[error("need at least {needed} students to split, got {got}")]
    TooFewStudents { needed: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One dropout prediction instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionInstance {
    pub student_id: String,
    /// History cutoff: the transcript covers chapters before this one.
    pub c_h: u32,
    /// Prediction horizon: has the student dropped by the end of this chapter?
    pub c_p: u32,
    /// True when the student's drop chapter is at or before `c_p`.
    pub label: bool,
    pub transcript: String,
}

/// All valid `(c_h, c_p)` pairs for a student with the given drop chapter.
///
/// Diagonal pairs `(c, c)` exist for every chapter; off-diagonal pairs
/// `(c, D)` exist for history cutoffs before the drop chapter. Completers
/// (no drop chapter) get only the diagonal.
pub fn enumerate_pairs(drop_chapter: Option<u32>, chapter_count: u32) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for c in 1..=chapter_count {
        pairs.push((c, c));
        if let Some(d) = drop_chapter {
            if c < d {
                pairs.push((c, d));
            }
        }
    }
    pairs.sort();
    pairs
}

/// Dropout label for a horizon: true iff the student dropped at or before
/// chapter `c_p`. Completers are always false.
pub fn label(drop_chapter: Option<u32>, c_p: u32) -> bool {
    matches!(drop_chapter, Some(d) if d <= c_p)
}

/// Expand a course log into prediction instances, one student at a time in
/// roster order, pairs in ascending order.
pub fn build_dataset(log: &CourseLog) -> Result<Vec<PredictionInstance>, DatasetError> {
    let mut by_student: BTreeMap<&str, Vec<&InteractionRecord>> = BTreeMap::new();
    for record in &log.records {
        by_student.entry(record.student_id.as_str()).or_default().push(record);
    }
    let mut out = Vec::new();
    for student in &log.students {
        let state = &log.completions[&student.student_id];
        let records = by_student.get(student.student_id.as_str()).map_or(&[][..], Vec::as_slice);
        for (c_h, c_p) in enumerate_pairs(state.drop_chapter, log.chapter_count) {
            let history: Vec<&InteractionRecord> =
                records.iter().copied().filter(|r| r.chapter < c_h).collect();
            let transcript = serialize_transcript(&history, &log.chapter_titles);
            out.push(PredictionInstance {
                student_id: student.student_id.clone(),
                c_h,
                c_p,
                label: label(state.drop_chapter, c_p),
                transcript,
            });
        }
    }
    Ok(out)
}

/// Instance counts per `(c_h, c_p)` cell; rows are history cutoffs, columns
/// horizons, both 1-based.
pub fn count_matrix(instances: &[PredictionInstance], chapter_count: u32) -> Vec<Vec<u64>> {
    let l = chapter_count as usize;
    let mut matrix = vec![vec![0u64; l]; l];
    for inst in instances {
        let r = inst.c_h as usize - 1;
        let c = inst.c_p as usize - 1;
        if r < l && c < l {
            matrix[r][c] += 1;
        }
    }
    matrix
}

/// A train/test partition grouped by student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<PredictionInstance>,
    pub test: Vec<PredictionInstance>,
    pub test_ratio: f64,
    pub seed: u64,
}

/// Split instances into train and test sets without splitting any student.
///
/// Students are shuffled under the seed, then assigned to the test side
/// until its instance count is as close as possible to `test_ratio * N`
/// (grouping makes an exact ratio unattainable in general). Instances keep
/// their original order within each side.
pub fn split(
    instances: &[PredictionInstance],
    test_ratio: f64,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(DatasetError::BadRatio(test_ratio));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut group_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        let id = inst.student_id.as_str();
        if !group_sizes.contains_key(id) {
            order.push(id);
        }
        *group_sizes.entry(id).or_insert(0) += 1;
    }
    if order.len() < 2 {
        return Err(DatasetError::TooFewStudents { needed: 2, got: order.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let target = test_ratio * instances.len() as f64;
    let mut test_students: Vec<&str> = Vec::new();
    let mut test_count = 0usize;
    for id in &order {
        let size = group_sizes[id];
        let grown = (test_count + size) as f64;
        if (grown - target).abs() <= (test_count as f64 - target).abs() {
            test_students.push(id);
            test_count += size;
        } else {
            break;
        }
    }
    // Never let either side be empty.
    if test_students.is_empty() {
        test_students.push(order[0]);
    }
    if test_students.len() == order.len() {
        test_students.pop();
    }

    let in_test: std::collections::BTreeSet<&str> = test_students.into_iter().collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for inst in instances {
        if in_test.contains(inst.student_id.as_str()) {
            test.push(inst.clone());
        } else {
            train.push(inst.clone());
        }
    }
    Ok(DatasetSplit { train, test, test_ratio, seed })
}

/// Serialize instances as one JSON object per line.
pub fn write_instances(instances: &[PredictionInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst).expect("instance serializes"));
        out.push('\n');
    }
    out
}

/// Parse instances from the line-delimited JSON form.
pub fn read_instances(input: &str) -> Result<Vec<PredictionInstance>, DatasetError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: PredictionInstance = serde_json::from_str(line)
            .map_err(|e| DatasetError::Parse { line: idx + 1, msg: e.to_string() })?;
        out.push(inst);
    }
    Ok(out)
}
