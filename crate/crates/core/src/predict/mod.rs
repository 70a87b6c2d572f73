//! Dropout predictors.
//!
//! Three prediction stages share one outcome type: zero-shot prompting,
//! few-shot prompting with selected examples, and a fine-tuned classifier
//! over transcript features. Model access goes through small client traits
//! so scripted stand-ins can drive every stage offline.

pub mod client;
pub mod examples;
pub mod features;
pub mod mlp;
pub mod prompt;

pub use client::{
    map_bounded, CachedClient, DecodingParams, EmbeddingClient, ResponseCache, TextModelClient,
    TransportError,
};
pub use examples::{select_examples, FewShotStrategy, StrategyKind};
pub use features::{Featurizer, FeaturizerKind, Standardizer};
pub use mlp::{MlpModel, TrainConfig, TrainedModel};
pub use prompt::{
    ask_for_verdict, parse_email_response, parse_verdict, render_prompt, EmailTemplate,
    PromptTemplate, TemplateError, ANSWER_PREFIX, DEFAULT_RETRY_BUDGET, TRANSCRIPT_BEGIN,
    TRANSCRIPT_END, VERDICT_DROPOUT, VERDICT_RETAIN,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which predictor produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ZeroShot,
    FewShot,
    FineTuned,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::ZeroShot => "zero_shot",
            Stage::FewShot => "few_shot",
            Stage::FineTuned => "fine_tuned",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One dropout prediction with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    /// True means predicted dropout by the horizon chapter.
    pub label: bool,
    /// Dropout probability; prompted stages emit hard 0/1 values.
    pub p_dropout: f64,
    /// Stage that produced the answer.
    pub stage: Stage,
    /// Stage originally selected, when a fallback downgraded it.
    pub degraded_from: Option<Stage>,
    /// Raw model response for prompted stages.
    pub raw_response: Option<String>,
}

/// Errors raised while predicting.
#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no verdict in response after {attempts} attempts; last response: {last:?}")]
    MalformedResponse { attempts: usize, last: String },
    #[error("example pool is empty")]
    EmptyPool,
    #[error("example pool has no retention-labeled instance to contrast")]
    NoRetainedExample,
    #[error("example pool has no dropout-labeled instance to contrast")]
    NoDroppedExample,
    #[error("strategy needs k >= {needed}, got {got}")]
    BadExampleCount { needed: usize, got: usize },
    #[error("no trained model available")]
    MissingModel,
    #[error("no embedding client available")]
    MissingEmbedClient,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data is single-class; both outcomes are required")]
    SingleClassTraining,
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("all stages failed; selected stage was {stage}: {message}")]
    AllStagesFailed { stage: Stage, message: String },
    #[error("invalid stage policy: {0}")]
    BadPolicy(String),
}
