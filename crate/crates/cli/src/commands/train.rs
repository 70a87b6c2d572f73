//! `train`: fit the fine-tuned classifier on a labeled instance file.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::dataset::{read_instances, split};
use retain_core::eval::evaluate;
use retain_core::hashing::derive_seed;
use retain_core::predict::{EmbeddingClient, TrainConfig, TrainedModel};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled instance file from build-dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Basename for the model under models/.
    #[arg(long)]
    pub out: String,
    /// Held-out fraction of instances, grouped by student.
    #[arg(long, default_value_t = 0.2)]
    pub test_ratio: f64,
    /// Course chapter count the instances came from.
    #[arg(long, default_value_t = 6)]
    pub chapters: u32,
    /// Featurize transcripts through the embedding client instead of the
    /// handcrafted engagement features.
    #[arg(long)]
    pub embed: bool,
    /// Training epochs.
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
}

pub fn run(args: &TrainArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, dataset_hash) = read_input(&args.dataset)?;
    let instances = read_instances(&raw)?;

    let split_seed = derive_seed(config.seeds.master, "split");
    let parts = split(&instances, args.test_ratio, split_seed)?;

    let embedder = if args.embed { Some(crate::commands::build_embedder(config)?) } else { None };
    let embed_ref: Option<&dyn EmbeddingClient> =
        embedder.as_ref().map(|e| e as &dyn EmbeddingClient);

    let train_config = TrainConfig {
        epochs: args.epochs,
        seed: derive_seed(config.seeds.master, "train"),
        ..TrainConfig::default()
    };
    let model = TrainedModel::fit(&parts.train, args.chapters, &train_config, embed_ref)?;

    let mut predictions = Vec::with_capacity(parts.test.len());
    for inst in &parts.test {
        predictions.push(model.predict(inst, embed_ref)?.label);
    }
    let report = evaluate(&parts.test, &predictions, args.chapters)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("dataset".to_string(), dataset_hash);
    let params = serde_json::json!({
        "test_ratio": args.test_ratio,
        "split_seed": split_seed,
        "train_seed": train_config.seed,
        "epochs": train_config.epochs,
        "featurizer": if args.embed { "embedding" } else { "handcrafted" },
        "train_instances": parts.train.len(),
        "test_instances": parts.test.len(),
    });

    let model_path = workspace.path("models", &format!("{}.model.json", args.out));
    write_artifact(&model_path, model.to_json().as_bytes(), inputs.clone(), params.clone())?;

    let eval_json = serde_json::to_string_pretty(&report).expect("report serializes");
    let eval_path = workspace.path("reports", &format!("{}.train-eval.json", args.out));
    write_artifact(&eval_path, eval_json.as_bytes(), inputs, params)?;

    let m = &report.metrics;
    println!(
        "trained on {} instances, evaluated on {} held-out: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4}",
        parts.train.len(),
        parts.test.len(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1
    );
    println!("model -> {}", model_path.display());
    Ok(())
}
