//! Few-shot example selection strategies.
//!
//! Strategies trade diversity for specificity: uniform random draws, an
//! all-retention set, a contrast pair of extremes (the least engaged dropout
//! against the most engaged retention), and the pair padded with random
//! picks. Engagement is measured on the rendered transcript itself, so
//! selection works on datasets without the original log.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::courselog::TranscriptStats;
use crate::dataset::PredictionInstance;

/// How to pick few-shot examples from a labeled pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Uniform draw of `k` examples.
    Random,
    /// Uniform draw of `k` retention-labeled examples.
    OnlyFalse,
    /// The least-engaged dropout and the most-engaged retention.
    SpecialPair,
    /// The contrast pair plus `k - 2` uniform draws.
    SpecialPlusCasual,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::OnlyFalse => "only_false",
            StrategyKind::SpecialPair => "special_pair",
            StrategyKind::SpecialPlusCasual => "special_plus_casual",
        }
    }

    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Random,
        StrategyKind::OnlyFalse,
        StrategyKind::SpecialPair,
        StrategyKind::SpecialPlusCasual,
    ];
}

/// A selection strategy with its example budget and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotStrategy {
    pub kind: StrategyKind,
    /// Number of examples to select; the pair strategy always yields 2.
    pub k: usize,
    pub seed: u64,
}

impl FewShotStrategy {
    pub fn new(kind: StrategyKind, k: usize, seed: u64) -> FewShotStrategy {
        FewShotStrategy { kind, k, seed }
    }
}

fn engagement(inst: &PredictionInstance) -> f64 {
    TranscriptStats::scan(&inst.transcript).msgs_per_chapter()
}

/// On equal engagement the instance with the lowest id (then pair) wins.
fn tie_before(a: &PredictionInstance, b: &PredictionInstance) -> bool {
    (a.student_id.as_str(), a.c_h, a.c_p) < (b.student_id.as_str(), b.c_h, b.c_p)
}

fn pick_extreme<'a>(
    items: impl Iterator<Item = &'a PredictionInstance>,
    want_max: bool,
) -> Option<&'a PredictionInstance> {
    let mut best: Option<(&PredictionInstance, f64)> = None;
    for item in items {
        let e = engagement(item);
        best = Some(match best {
            None => (item, e),
            Some((held, held_e)) => {
                let replaces = if want_max { e > held_e } else { e < held_e };
                if replaces || (e == held_e && tie_before(item, held)) {
                    (item, e)
                } else {
                    (held, held_e)
                }
            }
        });
    }
    best.map(|(item, _)| item)
}

fn draw<'a>(
    pool: &[&'a PredictionInstance],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a PredictionInstance> {
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    indices.shuffle(rng);
    let mut picked: Vec<usize> = indices.into_iter().take(k).collect();
    picked.sort();
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Select few-shot examples for a query instance.
///
/// The query's own student is always excluded from the pool, so a student
/// never judges their own future. Ties on the engagement extremes break by
/// lowest student id.
pub fn select_examples<'a>(
    pool: &'a [PredictionInstance],
    strategy: &FewShotStrategy,
    query: &PredictionInstance,
) -> Result<Vec<&'a PredictionInstance>, PredictError> {
    if strategy.k == 0 {
        return Err(PredictError::BadExampleCount { needed: 1, got: 0 });
    }
    let eligible: Vec<&PredictionInstance> =
        pool.iter().filter(|p| p.student_id != query.student_id).collect();
    if eligible.is_empty() {
        return Err(PredictError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    match strategy.kind {
        StrategyKind::Random => Ok(draw(&eligible, strategy.k, &mut rng)),
        StrategyKind::OnlyFalse => {
            let retained: Vec<&PredictionInstance> =
                eligible.iter().copied().filter(|p| !p.label).collect();
            if retained.is_empty() {
                return Err(PredictError::NoRetainedExample);
            }
            Ok(draw(&retained, strategy.k, &mut rng))
        }
        StrategyKind::SpecialPair | StrategyKind::SpecialPlusCasual => {
            if strategy.k < 2 {
                return Err(PredictError::BadExampleCount { needed: 2, got: strategy.k });
            }
            let dropped = pick_extreme(eligible.iter().copied().filter(|p| p.label), false)
                .ok_or(PredictError::NoDroppedExample)?;
            let retained = pick_extreme(eligible.iter().copied().filter(|p| !p.label), true)
                .ok_or(PredictError::NoRetainedExample)?;
            let mut picked = vec![dropped, retained];
            if strategy.kind == StrategyKind::SpecialPlusCasual {
                let rest: Vec<&PredictionInstance> = eligible
                    .iter()
                    .copied()
                    .filter(|p| !std::ptr::eq(*p, dropped) && !std::ptr::eq(*p, retained))
                    .collect();
                picked.extend(draw(&rest, strategy.k - 2, &mut rng));
            }
            Ok(picked)
        }
    }
}
