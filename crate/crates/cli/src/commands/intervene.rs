//! `intervene`: flag at-risk students, draft recall emails, deliver them,
//! and record the campaign.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;

use retain_core::courselog::parse_course_log;
use retain_core::cpadp::Predictor;
use retain_core::dataset::read_instances;
use retain_core::hashing::derive_seed;
use retain_core::intervene::{
    run_campaign, CampaignConfig, FileSink, InterventionRecord, MailSink, SmtpConfig, SmtpSink,
};
use retain_core::predict::{
    CachedClient, EmailTemplate, EmbeddingClient, FewShotStrategy, PromptTemplate, ResponseCache,
    TrainedModel,
};

use crate::config::RetainConfig;
use crate::error::{io_data, CliError};
use crate::workspace::{read_input, write_artifact, Workspace};

#[derive(Debug, Args)]
pub struct InterveneArgs {
    /// Course log to scan for at-risk students.
    #[arg(long)]
    pub log: PathBuf,
    /// Campaign identifier; one campaign sends at most one email per student.
    #[arg(long)]
    pub campaign: String,
    /// Course day the campaign runs on.
    #[arg(long)]
    pub day: u32,
    /// Delivery sink: "file:<dir>" or "smtp"; defaults to the config sink.
    #[arg(long)]
    pub sink: Option<String>,
    /// Labeled instance pool for few-shot examples and stage selection.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained model file for the fine-tuned stage.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

enum SinkChoice {
    File(PathBuf),
    Smtp,
}

fn parse_sink(args: &InterveneArgs, config: &RetainConfig, workspace: &Workspace) -> Result<SinkChoice, CliError> {
    let chosen = args.sink.clone().unwrap_or_else(|| config.mail.sink.clone());
    if chosen == "smtp" {
        return Ok(SinkChoice::Smtp);
    }
    if chosen == "file" {
        let outbox = workspace.path("campaigns", &args.campaign).join("outbox");
        return Ok(SinkChoice::File(outbox));
    }
    if let Some(dir) = chosen.strip_prefix("file:") {
        if dir.is_empty() {
            return Err(CliError::Usage("file sink needs a directory: file:<dir>".to_string()));
        }
        return Ok(SinkChoice::File(PathBuf::from(dir)));
    }
    Err(CliError::Usage(format!("unknown sink {chosen:?}; use file:<dir> or smtp")))
}

fn build_sink(choice: &SinkChoice, config: &RetainConfig) -> Result<Box<dyn MailSink>, CliError> {
    match choice {
        SinkChoice::File(dir) => {
            let sink = FileSink::new(dir).map_err(|e| io_data("opening file sink", e))?;
            Ok(Box::new(sink))
        }
        SinkChoice::Smtp => {
            if config.mail.smtp_host.is_empty() {
                return Err(CliError::Config(
                    "smtp sink needs mail.smtp_host (or RETAIN_SMTP_HOST)".to_string(),
                ));
            }
            Ok(Box::new(SmtpSink::new(SmtpConfig {
                host: config.mail.smtp_host.clone(),
                port: config.mail.smtp_port,
                helo_domain: config.mail.helo_domain.clone(),
                from_address: config.mail.from_address.clone(),
                credentials: config.smtp_credentials(),
                io_timeout: Duration::from_secs(30),
            })))
        }
    }
}

fn records_path(workspace: &Workspace) -> PathBuf {
    workspace.path("campaigns", "records.jsonl")
}

pub fn read_records(path: &PathBuf) -> Result<Vec<InterventionRecord>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_data(&format!("reading {}", path.display()), e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: InterventionRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        records.push(record);
    }
    Ok(records)
}

fn append_records(path: &PathBuf, records: &[InterventionRecord]) -> Result<(), CliError> {
    use std::io::Write;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_data(&format!("opening {}", path.display()), e))?;
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| io_data(&format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

/// Campaign summaries are append-only: each invocation writes run1, run2,
/// and so on, so a retry after partial delivery failures never mutates an
/// earlier summary.
fn next_run_path(workspace: &Workspace, campaign: &str) -> Result<PathBuf, CliError> {
    for n in 1..=9999u32 {
        let candidate = workspace.path("campaigns", &format!("{campaign}.run{n}.json"));
        if !candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(CliError::Data(format!("campaign {campaign:?} has too many recorded runs")))
}

pub fn run(args: &InterveneArgs, config: &RetainConfig) -> Result<(), CliError> {
    let workspace = Workspace::open(&config.paths.workspace)?;
    let (raw, log_hash) = read_input(&args.log)?;
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

    let clients = crate::commands::build_clients(config, &pool)?;
    let cache = ResponseCache::on_disk(workspace.path("cache", "verdicts"))
        .map_err(|e| io_data("opening response cache", e))?;
    let cached = CachedClient::new(clients.verdict.as_ref(), &cache);
    let email_cache = ResponseCache::on_disk(workspace.path("cache", "emails"))
        .map_err(|e| io_data("opening email cache", e))?;
    let cached_email = CachedClient::new(clients.email.as_ref(), &email_cache);
    let embedder = crate::commands::build_embedder(config)?;
    let template = PromptTemplate::default_dropout();
    let strategy_kind = super::predict::parse_strategy(&config.policy.few_shot_strategy)
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

    let sink_choice = parse_sink(args, config, &workspace)?;
    let mut sink = build_sink(&sink_choice, config)?;
    let records_file = records_path(&workspace);
    let prior = read_records(&records_file)?;

    let campaign_config = CampaignConfig {
        campaign_id: args.campaign.clone(),
        day: args.day,
        probability_floor: config.policy.probability_floor,
        cooldown_days: config.policy.cooldown_days,
        retry_budget: config.clients.retry_budget,
        in_flight: config.clients.in_flight,
        delivery_attempts: config.mail.delivery_attempts,
        delivery_base_delay_ms: config.mail.delivery_base_delay_ms,
        mail_domain: config.mail.mail_domain.clone(),
        params: config.clients.decoding_params(),
    };
    let email_template = EmailTemplate::default_email();
    let outcome = run_campaign(
        &log,
        &predictor,
        &cached_email,
        &email_template,
        sink.as_mut(),
        &prior,
        &campaign_config,
    );

    append_records(&records_file, &outcome.records)?;

    let mut inputs = BTreeMap::new();
    inputs.insert("course_log".to_string(), log_hash);
    let params = serde_json::json!({
        "campaign_id": args.campaign,
        "day": args.day,
        "probability_floor": campaign_config.probability_floor,
        "cooldown_days": campaign_config.cooldown_days,
    });
    let summary = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
    let out_path = next_run_path(&workspace, &args.campaign)?;
    write_artifact(&out_path, summary.as_bytes(), inputs, params)?;

    let m = &outcome.manifest;
    println!(
        "campaign {:?} day {}: {} at risk, {} delivered, {} in cooldown, {} failures",
        m.campaign_id,
        m.day,
        m.at_risk_count,
        m.delivered_count,
        m.skipped_cooldown.len(),
        m.failures.len()
    );
    for failure in &m.failures {
        eprintln!("  failed {}: {}", failure.student_id, failure.message);
    }
    println!("campaign record -> {}", out_path.display());
    Ok(())
}
