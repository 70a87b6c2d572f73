//! Course-progress-adaptive dropout prediction.
//!
//! As a course accumulates labeled history, the controller moves through
//! three stages: zero-shot prompting with no data, few-shot prompting once a
//! small example pool exists, and a fine-tuned classifier once training-scale
//! data is available. When a stage fails at prediction time the controller
//! can degrade to the next simpler stage instead of failing the request.

use serde::{Deserialize, Serialize};

use crate::dataset::PredictionInstance;
use crate::predict::{
    ask_for_verdict, render_prompt, select_examples, DecodingParams, EmbeddingClient,
    FewShotStrategy, PredictError, PredictionOutcome, PromptTemplate, Stage, TextModelClient,
    TrainedModel,
};

/// Thresholds on the labeled-instance count that switch stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePolicy {
    /// Minimum labeled instances before few-shot prompting is used.
    pub few_shot_min: usize,
    /// Minimum labeled instances before the fine-tuned model is used.
    pub fine_tune_min: usize,
    /// Degrade to a simpler stage when the selected one fails.
    pub fallback_enabled: bool,
}

impl Default for StagePolicy {
    fn default() -> StagePolicy {
        StagePolicy { few_shot_min: 20, fine_tune_min: 200, fallback_enabled: true }
    }
}

impl StagePolicy {
    pub fn validate(&self) -> Result<(), PredictError> {
        if self.few_shot_min > self.fine_tune_min {
            return Err(PredictError::BadPolicy(format!(
                "few_shot_min {} exceeds fine_tune_min {}",
                self.few_shot_min, self.fine_tune_min
            )));
        }
        Ok(())
    }
}

/// Pick a stage from the stock of labeled instances and model availability.
/// The stage is monotone in the count: more data never selects a simpler
/// stage. Without a trained model the ceiling is few-shot.
pub fn select_stage(labeled_count: usize, policy: &StagePolicy, model_available: bool) -> Stage {
    if labeled_count < policy.few_shot_min {
        Stage::ZeroShot
    } else if labeled_count < policy.fine_tune_min || !model_available {
        Stage::FewShot
    } else {
        Stage::FineTuned
    }
}

/// Everything needed to serve predictions at the current course state.
pub struct Predictor<'a> {
    /// Labeled instances accumulated so far; also the few-shot pool.
    pub pool: &'a [PredictionInstance],
    pub model: Option<&'a TrainedModel>,
    pub client: &'a dyn TextModelClient,
    pub embed: Option<&'a dyn EmbeddingClient>,
    pub template: &'a PromptTemplate,
    pub strategy: FewShotStrategy,
    pub policy: StagePolicy,
    pub params: DecodingParams,
    pub retry_budget: usize,
}

impl Predictor<'_> {
    /// Stage the policy selects for the current pool and model.
    pub fn selected_stage(&self) -> Stage {
        select_stage(self.pool.len(), &self.policy, self.model.is_some())
    }

    fn run_stage(&self, stage: Stage, query: &PredictionInstance) -> Result<PredictionOutcome, PredictError> {
        match stage {
            Stage::ZeroShot => {
                let prompt = render_prompt(self.template, &[], query);
                let (label, raw) =
                    ask_for_verdict(self.client, &prompt, &self.params, self.retry_budget)?;
                Ok(PredictionOutcome {
                    label,
                    p_dropout: if label { 1.0 } else { 0.0 },
                    stage,
                    degraded_from: None,
                    raw_response: Some(raw),
                })
            }
            Stage::FewShot => {
                let examples = select_examples(self.pool, &self.strategy, query)?;
                let prompt = render_prompt(self.template, &examples, query);
                let (label, raw) =
                    ask_for_verdict(self.client, &prompt, &self.params, self.retry_budget)?;
                Ok(PredictionOutcome {
                    label,
                    p_dropout: if label { 1.0 } else { 0.0 },
                    stage,
                    degraded_from: None,
                    raw_response: Some(raw),
                })
            }
            Stage::FineTuned => {
                let model = self.model.ok_or(PredictError::MissingModel)?;
                model.predict(query, self.embed)
            }
        }
    }

    /// Predict with one forced stage and no fallback.
    pub fn predict_at(
        &self,
        stage: Stage,
        query: &PredictionInstance,
    ) -> Result<PredictionOutcome, PredictError> {
        self.policy.validate()?;
        self.run_stage(stage, query)
    }

    /// Predict one instance, degrading through simpler stages on failure
    /// when the policy allows it. The query's own label is never read.
    pub fn predict(&self, query: &PredictionInstance) -> Result<PredictionOutcome, PredictError> {
        self.policy.validate()?;
        let selected = self.selected_stage();
        let mut stage = selected;
        loop {
            match self.run_stage(stage, query) {
                Ok(mut outcome) => {
                    if stage != selected {
                        outcome.degraded_from = Some(selected);
                    }
                    return Ok(outcome);
                }
                Err(err) => {
                    if !self.policy.fallback_enabled {
                        return Err(err);
                    }
                    stage = match stage {
                        Stage::FineTuned => Stage::FewShot,
                        Stage::FewShot => Stage::ZeroShot,
                        Stage::ZeroShot => {
                            return Err(PredictError::AllStagesFailed {
                                stage: selected,
                                message: err.to_string(),
                            })
                        }
                    };
                }
            }
        }
    }
}
