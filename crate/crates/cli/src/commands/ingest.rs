//! `ingest`: validate a raw course log and store the normalized form.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::{emit_course_log, parse_course_log};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw course log (line-delimited JSON).
    #[arg(long)]
    pub log: PathBuf,
    /// Basename for the normalized copy under logs/.
    #[arg(long)]
    pub name: String,
}

pub fn run(args: &IngestArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, raw_hash) = read_input(&args.log)?;
    let log = parse_course_log(&raw)?;
    let normalized = emit_course_log(&log);

    let mut inputs = BTreeMap::new();
    inputs.insert("raw_log".to_string(), raw_hash);
    let params = serde_json::json!({
        "course_id": log.course_id,
        "students": log.students.len(),
        "records": log.records.len(),
        "chapters": log.chapter_count,
    });
    let out_path = workspace.path("logs", &format!("{}.course.jsonl", args.name));
    write_artifact(&out_path, normalized.as_bytes(), inputs, params)?;

    println!(
        "ingested course {:?}: {} students, {} interaction records, {} chapters -> {}",
        log.course_id,
        log.students.len(),
        log.records.len(),
        log.chapter_count,
        out_path.display()
    );
    Ok(())
}
