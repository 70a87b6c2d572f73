//! Feature extraction for the fine-tuned classifier.
//!
//! The handcrafted featurizer reads engagement numbers straight off the
//! rendered transcript plus the normalized chapter pair; the embedding
//! featurizer delegates the transcript to an embedding client and appends
//! the chapter pair. Handcrafted features are standardized with train-set
//! moments stored alongside the model.

use serde::{Deserialize, Serialize};

use super::{EmbeddingClient, PredictError};
use crate::courselog::TranscriptStats;
use crate::dataset::PredictionInstance;

/// Per-coordinate affine map fitted on the train set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fit means and standard deviations (population) per coordinate.
    /// Zero-variance coordinates keep a divisor of 1 so they map to 0.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer, PredictError> {
        if rows.is_empty() {
            return Err(PredictError::EmptyTrainingData);
        }
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0; dim];
        for row in rows {
            for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *var += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { means, stds })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Which feature pipeline a model was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturizerKind {
    Handcrafted,
    Embedding { dim: usize },
}

/// Turns prediction instances into model input vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub kind: FeaturizerKind,
    pub chapter_count: u32,
    /// Present once fitted; applied to handcrafted features only.
    pub standardizer: Option<Standardizer>,
}

impl Featurizer {
    /// Raw handcrafted features, before standardization:
    /// message count, mean message length, chapters engaged, total
    /// characters, then the chapter pair normalized by course length.
    pub fn raw_handcrafted(inst: &PredictionInstance, chapter_count: u32) -> Vec<f64> {
        let stats = TranscriptStats::scan(&inst.transcript);
        let l = f64::from(chapter_count.max(1));
        vec![
            f64::from(stats.student_msg_count),
            stats.mean_msg_len(),
            f64::from(stats.chapters_engaged),
            stats.student_chars as f64,
            f64::from(inst.c_h) / l,
            f64::from(inst.c_p) / l,
        ]
    }

    /// Fit the handcrafted featurizer's standardizer on a train set.
    pub fn fit_handcrafted(
        train: &[PredictionInstance],
        chapter_count: u32,
    ) -> Result<Featurizer, PredictError> {
        let rows: Vec<Vec<f64>> =
            train.iter().map(|i| Self::raw_handcrafted(i, chapter_count)).collect();
        Ok(Featurizer {
            kind: FeaturizerKind::Handcrafted,
            chapter_count,
            standardizer: Some(Standardizer::fit(&rows)?),
        })
    }

    /// An embedding-backed featurizer; no standardization is applied.
    pub fn embedding(dim: usize, chapter_count: u32) -> Featurizer {
        Featurizer { kind: FeaturizerKind::Embedding { dim }, chapter_count, standardizer: None }
    }

    /// Output dimension.
    pub fn dim(&self) -> usize {
        match self.kind {
            FeaturizerKind::Handcrafted => 6,
            FeaturizerKind::Embedding { dim } => dim + 2,
        }
    }

    /// Featurize one instance. Embedding featurizers need their client.
    pub fn featurize(
        &self,
        inst: &PredictionInstance,
        embed: Option<&dyn EmbeddingClient>,
    ) -> Result<Vec<f64>, PredictError> {
        match self.kind {
            FeaturizerKind::Handcrafted => {
                let raw = Self::raw_handcrafted(inst, self.chapter_count);
                Ok(match &self.standardizer {
                    Some(s) => s.apply(&raw),
                    None => raw,
                })
            }
            FeaturizerKind::Embedding { dim } => {
                let client = embed.ok_or(PredictError::MissingEmbedClient)?;
                let mut v = client.embed(&inst.transcript)?;
                if v.len() != dim {
                    return Err(PredictError::DimensionMismatch { expected: dim, got: v.len() });
                }
                let l = f64::from(self.chapter_count.max(1));
                v.push(f64::from(inst.c_h) / l);
                v.push(f64::from(inst.c_p) / l);
                Ok(v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::TransportError;

    fn inst(id: &str, c_h: u32, c_p: u32, transcript: &str) -> PredictionInstance {
        PredictionInstance {
            student_id: id.into(),
            c_h,
            c_p,
            label: false,
            transcript: transcript.into(),
        }
    }

    #[test]
    fn raw_features_read_the_transcript() {
        let t = "[CHAPTER 1] A\nstudent: abcd\nai_teacher: r\nstudent: abcdefgh\n[CHAPTER 2] B\nstudent: ab";
        let f = Featurizer::raw_handcrafted(&inst("s", 3, 5, t), 6);
        assert_eq!(f, vec![3.0, 14.0 / 3.0, 2.0, 14.0, 0.5, 5.0 / 6.0]);
    }

    #[test]
    fn empty_transcript_features_are_zero_except_the_pair() {
        let f = Featurizer::raw_handcrafted(
            &inst("s", 1, 1, crate::courselog::NO_PRIOR_INTERACTIONS),
            6,
        );
        assert_eq!(f[..4], [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardized_train_features_have_zero_mean_unit_variance() {
        // Oracle: recompute moments of the standardized rows independently.
        let instances: Vec<PredictionInstance> = (0..40)
            .map(|i| {
                let mut t = String::from("[CHAPTER 1] A\n");
                for j in 0..=(i % 7) {
                    t.push_str(&format!("student: message {j} number {i}\n"));
                }
                inst(&format!("s{i}"), 1 + (i % 6) as u32, 1 + (i % 6) as u32, &t)
            })
            .collect();
        let fz = Featurizer::fit_handcrafted(&instances, 6).unwrap();
        let rows: Vec<Vec<f64>> =
            instances.iter().map(|i| fz.featurize(i, None).unwrap()).collect();
        let n = rows.len() as f64;
        for d in 0..6 {
            let mean: f64 = rows.iter().map(|r| r[d]).sum::<f64>() / n;
            let var: f64 = rows.iter().map(|r| (r[d] - mean) * (r[d] - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "coordinate {d} mean {mean}");
            // Constant coordinates stay at variance 0 by design.
            assert!(var < 1e-9 || (var - 1.0).abs() < 1e-6, "coordinate {d} variance {var}");
        }
    }

    #[test]
    fn zero_variance_coordinate_maps_to_zero() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 3.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        let out = s.apply(&rows[0]);
        assert_eq!(out[0], 0.0);
        assert!(out[1] < 0.0);
    }

    struct FixedEmbedder {
        dim: usize,
    }

    impl EmbeddingClient for FixedEmbedder {
        fn tag(&self) -> &str {
            "fixed-embed"
        }
        fn dim(&self) -> usize {
            self.dim
        }
        fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
            Ok(vec![text.len() as f64; self.dim])
        }
    }

    #[test]
    fn embedding_featurizer_appends_the_chapter_pair() {
        let fz = Featurizer::embedding(4, 6);
        assert_eq!(fz.dim(), 6);
        let v = fz.featurize(&inst("s", 3, 6, "abc"), Some(&FixedEmbedder { dim: 4 })).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v[4], 0.5);
        assert_eq!(v[5], 1.0);
    }

    #[test]
    fn embedding_featurizer_guards_client_and_dimension() {
        let fz = Featurizer::embedding(4, 6);
        assert!(matches!(
            fz.featurize(&inst("s", 1, 1, "x"), None),
            Err(PredictError::MissingEmbedClient)
        ));
        let wrong = FixedEmbedder { dim: 3 };
        assert!(matches!(
            fz.featurize(&inst("s", 1, 1, "x"), Some(&wrong)),
            Err(PredictError::DimensionMismatch { expected: 4, got: 3 })
        ));
    }
}
