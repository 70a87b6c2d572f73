//! `predict`: one dropout prediction for a named student.

use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::{parse_course_log, serialize_transcript};
use retain_core::cpadp::Predictor;
use retain_core::dataset::{read_instances, PredictionInstance};
use retain_core::hashing::derive_seed;
use retain_core::predict::{
    CachedClient, EmbeddingClient, FewShotStrategy, PromptTemplate, ResponseCache, Stage,
    StrategyKind, TrainedModel,
};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, Workspace};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Course log holding the student's history.
    #[arg(long)]
    pub log: PathBuf,
    /// Student to predict for.
    #[arg(long)]
    pub student: String,
    /// Horizon chapter; defaults to the student's current chapter.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Force one stage instead of letting the policy choose.
    #[arg(long, value_parser = parse_stage)]
    pub stage: Option<Stage>,
    /// Labeled instance pool for few-shot examples and stage selection.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained model file for the fine-tuned stage.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn parse_stage(value: &str) -> Result<Stage, String> {
    match value {
        "zero_shot" => Ok(Stage::ZeroShot),
        "few_shot" => Ok(Stage::FewShot),
        "fine_tuned" => Ok(Stage::FineTuned),
        other => Err(format!("unknown stage {other:?}; use zero_shot, few_shot, or fine_tuned")),
    }
}

pub fn parse_strategy(value: &str) -> Result<StrategyKind, String> {
    StrategyKind::ALL
        .into_iter()
        .find(|k| k.label() == value)
        .ok_or_else(|| format!("unknown few-shot strategy {value:?}"))
}

/// Build the instance the predictor sees for a student mid-course: history
/// before the current chapter, horizon defaulting to that same chapter.
pub fn current_instance(
    log: &retain_core::courselog::CourseLog,
    student_id: &str,
    horizon: Option<u32>,
) -> Result<PredictionInstance, CliError> {
    let state = log
        .completions
        .get(student_id)
        .ok_or_else(|| CliError::Data(format!("unknown student {student_id:?}")))?;
    let current = state.drop_chapter.ok_or_else(|| {
        CliError::Data(format!("student {student_id:?} already completed the course"))
    })?;
    let c_p = horizon.unwrap_or(current);
    if c_p < current || c_p > log.chapter_count {
        return Err(CliError::Usage(format!(
            "horizon {c_p} must lie between the current chapter {current} and {}",
            log.chapter_count
        )));
    }
    let history = log.history_slice(student_id, current)?;
    Ok(PredictionInstance {
        student_id: student_id.to_string(),
        c_h: current,
        c_p,
        label: false,
        transcript: serialize_transcript(&history, &log.chapter_titles),
    })
}

pub fn run(args: &PredictArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, _) = read_input(&args.log)?;
    let log = parse_course_log(&raw)?;

    let pool = match &args.dataset {
        Some(path) => {
            let (text, _) = read_input(path)?;
            read_instances(&text)?
        }
        None => Vec::new(),
    };
    let model = match &args.model {
        Some(path) => {
            let (text, _) = read_input(path)?;
            Some(TrainedModel::from_json(&text).map_err(|e| CliError::Data(e.to_string()))?)
        }
        None => None,
    };
    if args.stage == Some(Stage::FineTuned) && model.is_none() {
        return Err(CliError::Config(
            "forced stage fine_tuned requires --model with a trained model file".to_string(),
        ));
    }

    let clients = crate::commands::build_clients(config, &pool)?;
    let cache = ResponseCache::on_disk(workspace.path("cache", "verdicts"))
        .map_err(|e| crate::error::io_data("opening response cache", e))?;
    let cached = CachedClient::new(clients.verdict.as_ref(), &cache);
    let embedder = crate::commands::build_embedder(config)?;
    let template = PromptTemplate::default_dropout();

    let strategy_kind = parse_strategy(&config.policy.few_shot_strategy)
        .map_err(CliError::Config)?;
    let predictor = Predictor {
        pool: &pool,
        model: model.as_ref(),
        client: &cached,
        embed: Some(&embedder as &dyn EmbeddingClient),
        template: &template,
        strategy: FewShotStrategy::new(
            strategy_kind,
            config.policy.few_shot_k,
            derive_seed(config.seeds.master, "few-shot"),
        ),
        policy: config.policy.stage_policy(),
        params: config.clients.decoding_params(),
        retry_budget: config.clients.retry_budget,
    };

    let query = current_instance(&log, &args.student, args.horizon)?;
    let outcome = match args.stage {
        Some(stage) => predictor.predict_at(stage, &query)?,
        None => predictor.predict(&query)?,
    };

    let printed = serde_json::json!({
        "student_id": query.student_id,
        "c_h": query.c_h,
        "c_p": query.c_p,
        "label": outcome.label,
        "p_dropout": outcome.p_dropout,
        "stage": outcome.stage.label(),
        "degraded_from": outcome.degraded_from.map(|s| s.label()),
    });
    println!("{}", serde_json::to_string_pretty(&printed).expect("outcome serializes"));
    Ok(())
}
