//! `measure`: compare login activity around an intervention day and split
//! returning students into self-initiated and recalled groups.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;

use retain_core::courselog::parse_course_log;
use retain_core::intervene::{group_comparison, login_delta, post_window_students, GroupRow};

use crate::config::RetainConfig;
use crate::error::CliError;
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Course log with login events.
    #[arg(long)]
    pub log: PathBuf,
    /// Intervention day the windows center on.
    #[arg(long)]
    pub day: u32,
    /// Window size in days on each side of the intervention day.
    #[arg(long, default_value_t = 3)]
    pub window: u32,
    /// Campaign whose records mark students as recalled.
    #[arg(long)]
    pub campaign: String,
    /// Report name under reports/.
    #[arg(long)]
    pub out: String,
}

fn render_row(row: &GroupRow) -> String {
    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.2}"),
        None => "n/a".to_string(),
    };
    format!(
        "{:<16} n={:<4} offline days {:>6} (of {})  chapters {:>6}  messages {:>6}  words/msg {:>7}",
        row.label,
        row.headcount,
        fmt(row.offline_days_mean),
        row.offline_days_count,
        fmt(row.chapter_mean),
        fmt(row.message_count_mean),
        fmt(row.message_length_mean),
    )
}

pub fn run(args: &MeasureArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, log_hash) = read_input(&args.log)?;
    let log = parse_course_log(&raw)?;

    let records_file = workspace.path("campaigns", "records.jsonl");
    let records = super::intervene::read_records(&records_file)?;
    let intervened: BTreeSet<String> = records
        .iter()
        .filter(|r| r.campaign_id == args.campaign)
        .map(|r| r.student_id.clone())
        .collect();

    let delta = login_delta(&log.events, args.day, args.window);
    let returned = post_window_students(&log.events, args.day, args.window);
    let comparison = group_comparison(&log, &returned, &intervened, args.day)?;

    let report = serde_json::json!({
        "campaign_id": args.campaign,
        "intervention_day": args.day,
        "window_days": args.window,
        "login_delta": delta,
        "returned_students": returned,
        "comparison": comparison,
    });
    let rendered = serde_json::to_string_pretty(&report).expect("report serializes");

    let mut inputs = BTreeMap::new();
    inputs.insert("course_log".to_string(), log_hash);
    let params = serde_json::json!({
        "campaign_id": args.campaign,
        "day": args.day,
        "window": args.window,
    });
    let out_path = workspace.path("reports", &format!("{}.measure.json", args.out));
    write_artifact(&out_path, rendered.as_bytes(), inputs, params)?;

    println!(
        "logins {} days before day {}: {}, {} days after: {}",
        args.window, args.day, delta.pre_count, args.window, delta.post_count
    );
    println!("{} students active in the post window", returned.len());
    println!("{}", render_row(&comparison.self_initiated));
    println!("{}", render_row(&comparison.recalled));
    println!("measure report -> {}", out_path.display());
    Ok(())
}
