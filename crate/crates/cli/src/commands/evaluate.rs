//! `evaluate`: score a trained model on a labeled instance file, render the
//! pair-accuracy grid, or benchmark few-shot prompt strategies.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::dataset::read_instances;
use retain_core::eval::{compare_prompt_strategies, evaluate, BenchConfig};
use retain_core::hashing::derive_seed;
use retain_core::predict::{PromptTemplate, TrainedModel};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labeled instance file to score against.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Basename for the evaluation report under reports/.
    #[arg(long)]
    pub out: String,
    /// Trained model file; required unless --prompt-bench is set.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Course chapter count the instances came from.
    #[arg(long, default_value_t = 6)]
    pub chapters: u32,
    /// Also print per-(history, horizon) accuracy as a grid.
    #[arg(long)]
    pub heatmap: bool,
    /// Benchmark few-shot example selection strategies instead of scoring
    /// a model.
    #[arg(long)]
    pub prompt_bench: bool,
    /// Examples per prompt in the benchmark.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
}

fn run_model_eval(args: &EvaluateArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, dataset_hash) = read_input(&args.dataset)?;
    let instances = read_instances(&raw)?;
    let model_path = args.model.as_ref().ok_or_else(|| {
        CliError::Usage("evaluate needs --model unless --prompt-bench is set".to_string())
    })?;
    let (model_text, model_hash) = read_input(model_path)?;
    let model = TrainedModel::from_json(&model_text).map_err(|e| CliError::Data(e.to_string()))?;

    let embedder = crate::commands::build_embedder(config)?;
    let embed_ref = Some(&embedder as &dyn retain_core::predict::EmbeddingClient);
    let mut predictions = Vec::with_capacity(instances.len());
    for inst in &instances {
        predictions.push(model.predict(inst, embed_ref)?.label);
    }
    let report = evaluate(&instances, &predictions, args.chapters)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("dataset".to_string(), dataset_hash);
    inputs.insert("model".to_string(), model_hash);
    let params = serde_json::json!({
        "chapters": args.chapters,
        "instances": instances.len(),
    });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let out_path = workspace.path("reports", &format!("{}.eval.json", args.out));
    write_artifact(&out_path, json.as_bytes(), inputs, params)?;

    let m = &report.metrics;
    println!(
        "evaluated {} instances: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4}",
        instances.len(),
        m.accuracy,
        m.precision,
        m.recall,
        m.f1
    );
    if args.heatmap {
        println!("\naccuracy per (history, horizon) chapter pair:");
        print!("{}", report.matrix.render_grid());
    }
    println!("report -> {}", out_path.display());
    Ok(())
}

fn run_prompt_bench(args: &EvaluateArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, dataset_hash) = read_input(&args.dataset)?;
    let instances = read_instances(&raw)?;

    // Queries and example pool must stay disjoint, grouped by student.
    let parts = retain_core::dataset::split(
        &instances,
        0.5,
        derive_seed(config.seeds.master, "bench-split"),
    )?;
    let clients = crate::commands::build_clients(config, &instances)?;
    let template = PromptTemplate::default_dropout();
    let bench_config = BenchConfig {
        k: args.k,
        seeds: vec![
            derive_seed(config.seeds.master, "bench-0"),
            derive_seed(config.seeds.master, "bench-1"),
            derive_seed(config.seeds.master, "bench-2"),
        ],
        retry_budget: config.clients.retry_budget,
        params: config.clients.decoding_params(),
    };
    let report = compare_prompt_strategies(
        &parts.train,
        &parts.test,
        clients.verdict.as_ref(),
        &template,
        &bench_config,
    )?;

    let mut inputs = BTreeMap::new();
    inputs.insert("dataset".to_string(), dataset_hash);
    let params = serde_json::json!({
        "k": args.k,
        "seeds": bench_config.seeds,
        "pool": parts.train.len(),
        "queries": parts.test.len(),
    });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let out_path = workspace.path("reports", &format!("{}.prompt-bench.json", args.out));
    write_artifact(&out_path, json.as_bytes(), inputs, params)?;

    print!("{}", report.render_table());
    println!("report -> {}", out_path.display());
    Ok(())
}

pub fn run(args: &EvaluateArgs, config: &RetainConfig) -> Result<(), CliError> {
    if args.prompt_bench {
        run_prompt_bench(args, config)
    } else {
        run_model_eval(args, config)
    }
}
