//! `build-dataset`: enumerate prediction instances from a course log.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::parse_course_log;
use retain_core::dataset::{build_dataset, count_matrix, write_instances, PredictionInstance};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Course log to enumerate.
    #[arg(long)]
    pub log: PathBuf,
    /// Basename for the instance file under datasets/.
    #[arg(long)]
    pub out: String,
    /// Also print the pair count matrix and label balance, and write them
    /// as a stats report.
    #[arg(long)]
    pub stats: bool,
}

/// Per-pair instance counts plus label balance.
#[derive(Debug, serde::Serialize)]
pub struct DatasetStats {
    pub instances: usize,
    pub students: usize,
    pub dropout_labels: usize,
    pub retain_labels: usize,
    pub majority_baseline: f64,
    pub matrix: Vec<Vec<u64>>,
}

pub fn dataset_stats(instances: &[PredictionInstance], chapter_count: u32) -> DatasetStats {
    let dropout_labels = instances.iter().filter(|i| i.label).count();
    let retain_labels = instances.len() - dropout_labels;
    let students: std::collections::BTreeSet<&str> =
        instances.iter().map(|i| i.student_id.as_str()).collect();
    let majority_baseline = if instances.is_empty() {
        0.0
    } else {
        dropout_labels.max(retain_labels) as f64 / instances.len() as f64
    };
    DatasetStats {
        instances: instances.len(),
        students: students.len(),
        dropout_labels,
        retain_labels,
        majority_baseline,
        matrix: count_matrix(instances, chapter_count),
    }
}

/// Render the count matrix with rows as history chapters and columns as
/// horizon chapters; structurally empty cells are blank.
pub fn render_count_matrix(matrix: &[Vec<u64>]) -> String {
    let l = matrix.len();
    let mut out = String::new();
    out.push_str(&format!("{:>7}", ""));
    for c_p in 1..=l {
        out.push_str(&format!("{:>8}", format!("c_p={c_p}")));
    }
    out.push('\n');
    for (row_idx, row) in matrix.iter().enumerate() {
        out.push_str(&format!("{:>7}", format!("c_h={}", row_idx + 1)));
        for (col_idx, &count) in row.iter().enumerate() {
            if col_idx < row_idx {
                out.push_str(&format!("{:>8}", ""));
            } else {
                out.push_str(&format!("{count:>8}"));
            }
        }
        out.push('\n');
    }
    out
}

pub fn run(args: &BuildDatasetArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, log_hash) = read_input(&args.log)?;
    let log = parse_course_log(&raw)?;
    let instances = build_dataset(&log)?;
    let body = write_instances(&instances);

    let mut inputs = BTreeMap::new();
    inputs.insert("course_log".to_string(), log_hash);
    let stats = dataset_stats(&instances, log.chapter_count);
    let params = serde_json::json!({
        "instances": stats.instances,
        "students": stats.students,
        "chapters": log.chapter_count,
    });
    let out_path = workspace.path("datasets", &format!("{}.instances.jsonl", args.out));
    write_artifact(&out_path, body.as_bytes(), inputs.clone(), params.clone())?;

    println!(
        "built {} instances for {} students -> {}",
        stats.instances,
        stats.students,
        out_path.display()
    );

    if args.stats {
        let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
        let stats_path = workspace.path("reports", &format!("{}.dataset-stats.json", args.out));
        write_artifact(&stats_path, stats_json.as_bytes(), inputs, params)?;
        println!("\ninstance counts per (history, horizon) chapter pair:");
        print!("{}", render_count_matrix(&stats.matrix));
        println!(
            "\nlabels: {} dropout / {} retain (majority baseline {:.4})",
            stats.dropout_labels, stats.retain_labels, stats.majority_baseline
        );
        println!("stats -> {}", stats_path.display());
    }
    Ok(())
}
