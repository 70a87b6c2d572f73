//! `analyze`: dropout-correlate report over one course log.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::parse_course_log;
use retain_core::stats::{correlation_report, ProgressBuckets, TABLE_MARKER};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Course log to analyze.
    #[arg(long)]
    pub log: PathBuf,
    /// Basename for the report under reports/.
    #[arg(long)]
    pub out: String,
}

pub fn run(args: &AnalyzeArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, log_hash) = read_input(&args.log)?;
    let log = parse_course_log(&raw)?;
    let buckets = ProgressBuckets::default_for(log.chapter_count);
    let report = correlation_report(&log, &buckets)?;
    let document = report.to_document();

    let mut inputs = BTreeMap::new();
    inputs.insert("course_log".to_string(), log_hash);
    let params = serde_json::json!({
        "buckets": buckets.labels(),
        "students": report.students,
    });
    let out_path = workspace.path("reports", &format!("{}.analysis.txt", args.out));
    write_artifact(&out_path, document.as_bytes(), inputs, params)?;

    // Print the readable half, leaving the JSON block in the artifact.
    let human = document.split(TABLE_MARKER).next().unwrap_or("").trim_end();
    println!("{human}");
    println!("\nreport -> {}", out_path.display());
    Ok(())
}
