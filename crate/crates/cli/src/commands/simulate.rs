//! `simulate`: draw a synthetic cohort and write its log plus answer key.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::emit_course_log;
use retain_core::hashing::{derive_seed, sha256_hex};
use retain_core::simkit::{emit_ground_truth, generate_cohort, CohortSpec};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Basename for the emitted files under logs/.
    #[arg(long)]
    pub out: String,
    /// Cohort spec as TOML; defaults to the built-in six-chapter course.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override the derived simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &SimulateArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let seed = args.seed.unwrap_or_else(|| derive_seed(config.seeds.master, "simulate"));
    let (spec, spec_hash) = match &args.spec {
        None => {
            let spec = CohortSpec::table1_default(seed);
            (spec, "builtin:table1_default".to_string())
        }
        Some(path) => {
            let (text, hash) = crate::workspace::read_input(path)?;
            let mut spec: CohortSpec = toml::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            spec.seed = seed;
            (spec, hash)
        }
    };

    let cohort = generate_cohort(&spec)?;
    let log_text = emit_course_log(&cohort.log);
    let truth_text = emit_ground_truth(&cohort.truth);

    let mut inputs = BTreeMap::new();
    inputs.insert("spec".to_string(), spec_hash);
    let params = serde_json::json!({
        "seed": seed,
        "students": cohort.log.students.len(),
        "chapters": spec.chapter_count,
    });

    let log_path = workspace.path("logs", &format!("{}.course.jsonl", args.out));
    write_artifact(&log_path, log_text.as_bytes(), inputs.clone(), params.clone())?;
    let truth_path = workspace.path("logs", &format!("{}.truth.jsonl", args.out));
    inputs.insert("course_log".to_string(), sha256_hex(log_text.as_bytes()));
    write_artifact(&truth_path, truth_text.as_bytes(), inputs, params)?;

    println!(
        "simulated {} students over {} chapters -> {}",
        cohort.log.students.len(),
        spec.chapter_count,
        log_path.display()
    );
    Ok(())
}
