//! Side-by-side comparison of example-selection strategies.
//!
//! Every strategy answers the same queries against the same pool and model
//! client, with per-query selection seeds derived from a per-run seed so a
//! rerun reproduces the exact example draws. Responses are cached by prompt
//! hash, so prompts repeated across seeds cost one model call.

use serde::{Deserialize, Serialize};

use crate::dataset::PredictionInstance;
use crate::hashing::{derive_seed, sha256_hex};
use crate::predict::{
    ask_for_verdict, render_prompt, select_examples, CachedClient, DecodingParams, FewShotStrategy,
    PredictError, PromptTemplate, ResponseCache, StrategyKind, TextModelClient,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Examples per few-shot prompt.
    pub k: usize,
    /// One full pass per seed; accuracy is averaged across them.
    pub seeds: Vec<u64>,
    pub retry_budget: usize,
    pub params: DecodingParams,
}

impl Default for BenchConfig {
    fn default() -> BenchConfig {
        BenchConfig {
            k: 4,
            seeds: vec![1, 2, 3],
            retry_budget: 2,
            params: DecodingParams::default(),
        }
    }
}

/// Tally for one pass over the queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub correct: usize,
    pub answered: usize,
    /// Queries that produced no verdict (selection or model failure).
    pub failures: usize,
}

impl SeedRun {
    fn empty(seed: u64) -> SeedRun {
        SeedRun { seed, correct: 0, answered: 0, failures: 0 }
    }

    /// Accuracy over answered queries; 0.0 when nothing was answered.
    pub fn accuracy(&self) -> f64 {
        if self.answered == 0 {
            0.0
        } else {
            self.correct as f64 / self.answered as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyBench {
    pub label: String,
    pub runs: Vec<SeedRun>,
    pub mean_accuracy: f64,
}

/// Inputs that pin down a bench run for reproduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset_hash: String,
    pub client_tag: String,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub pool_count: usize,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub manifest: RunManifest,
    /// Single zero-shot pass; selection seeds do not apply.
    pub zero_shot: SeedRun,
    /// One entry per strategy, in a fixed order.
    pub strategies: Vec<StrategyBench>,
}

impl BenchReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22}{:>10}{:>10}\n", "strategy", "accuracy", "failures"));
        out.push_str(&format!(
            "{:<22}{:>10.3}{:>10}\n",
            "zero_shot",
            self.zero_shot.accuracy(),
            self.zero_shot.failures
        ));
        for s in &self.strategies {
            let failures: usize = s.runs.iter().map(|r| r.failures).sum();
            out.push_str(&format!("{:<22}{:>10.3}{:>10}\n", s.label, s.mean_accuracy, failures));
        }
        out
    }
}

fn run_query(
    client: &dyn TextModelClient,
    template: &PromptTemplate,
    examples: &[&PredictionInstance],
    query: &PredictionInstance,
    config: &BenchConfig,
    run: &mut SeedRun,
) {
    let prompt = render_prompt(template, examples, query);
    match ask_for_verdict(client, &prompt, &config.params, config.retry_budget) {
        Ok((label, _)) => {
            run.answered += 1;
            if label == query.label {
                run.correct += 1;
            }
        }
        Err(_) => run.failures += 1,
    }
}

/// Run the zero-shot baseline and every selection strategy over the same
/// queries, averaging strategy accuracy across the configured seeds.
pub fn compare_prompt_strategies(
    pool: &[PredictionInstance],
    queries: &[PredictionInstance],
    client: &dyn TextModelClient,
    template: &PromptTemplate,
    config: &BenchConfig,
) -> Result<BenchReport, PredictError> {
    if config.k == 0 {
        return Err(PredictError::BadPolicy("bench needs k >= 1".into()));
    }
    if config.seeds.is_empty() {
        return Err(PredictError::BadPolicy("bench needs at least one seed".into()));
    }
    if queries.is_empty() {
        return Err(PredictError::BadPolicy("bench needs at least one query".into()));
    }

    let cache = ResponseCache::in_memory();
    let cached = CachedClient::new(client, &cache);

    let mut zero_shot = SeedRun::empty(0);
    for query in queries {
        run_query(&cached, template, &[], query, config, &mut zero_shot);
    }

    let mut strategies = Vec::new();
    for kind in StrategyKind::ALL {
        let mut runs = Vec::new();
        for &seed in &config.seeds {
            let mut run = SeedRun::empty(seed);
            for (idx, query) in queries.iter().enumerate() {
                let strategy = FewShotStrategy::new(
                    kind,
                    config.k,
                    derive_seed(seed, &format!("query-{idx}")),
                );
                match select_examples(pool, &strategy, query) {
                    Ok(examples) => {
                        run_query(&cached, template, &examples, query, config, &mut run)
                    }
                    Err(_) => run.failures += 1,
                }
            }
            runs.push(run);
        }
        let mean_accuracy =
            runs.iter().map(SeedRun::accuracy).sum::<f64>() / runs.len() as f64;
        strategies.push(StrategyBench { label: kind.label().to_string(), runs, mean_accuracy });
    }

    let dataset_hash = {
        let blob = serde_json::to_string(&(pool, queries)).expect("instances serialize");
        sha256_hex(blob.as_bytes())
    };
    Ok(BenchReport {
        manifest: RunManifest {
            dataset_hash,
            client_tag: client.tag().to_string(),
            seeds: config.seeds.clone(),
            k: config.k,
            pool_count: pool.len(),
            query_count: queries.len(),
        },
        zero_shot,
        strategies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::{TransportError, VERDICT_RETAIN};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct RetainClient;

    impl TextModelClient for RetainClient {
        fn tag(&self) -> &str {
            "retain-always"
        }
        fn complete(&self, _p: &str, _d: &DecodingParams) -> Result<String, TransportError> {
            Ok(VERDICT_RETAIN.to_string())
        }
    }

    struct CountingClient {
        calls: AtomicUsize,
    }

    impl TextModelClient for CountingClient {
        fn tag(&self) -> &str {
            "counting"
        }
        fn complete(&self, _p: &str, _d: &DecodingParams) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(VERDICT_RETAIN.to_string())
        }
    }

    fn inst(id: &str, label: bool, words: usize) -> PredictionInstance {
        PredictionInstance {
            student_id: id.into(),
            c_h: 2,
            c_p: 4,
            label,
            transcript: format!("[CHAPTER 1] T\nstudent: {}", "word ".repeat(words).trim_end()),
        }
    }

    fn pool() -> Vec<PredictionInstance> {
        (0..12).map(|i| inst(&format!("p{i:02}"), i % 2 == 0, i + 1)).collect()
    }

    fn queries() -> Vec<PredictionInstance> {
        vec![
            inst("qa", false, 3),
            inst("qb", true, 4),
            inst("qc", false, 5),
            inst("qd", true, 6),
        ]
    }

    #[test]
    fn constant_client_scores_the_base_rate() {
        let pool = pool();
        let queries = queries();
        let config = BenchConfig { k: 3, seeds: vec![11, 12], ..Default::default() };
        let report =
            compare_prompt_strategies(&pool, &queries, &RetainClient, &PromptTemplate::default_dropout(), &config)
                .unwrap();
        // Retain-always is right exactly on the retained queries: 2 of 4.
        assert_eq!(report.zero_shot.accuracy(), 0.5);
        assert_eq!(report.zero_shot.failures, 0);
        assert_eq!(report.strategies.len(), StrategyKind::ALL.len());
        for s in &report.strategies {
            assert_eq!(s.mean_accuracy, 0.5, "strategy {}", s.label);
            assert_eq!(s.runs.len(), 2);
            for run in &s.runs {
                assert_eq!(run.answered, 4);
                assert_eq!(run.failures, 0);
            }
        }
        assert_eq!(report.manifest.query_count, 4);
        assert_eq!(report.manifest.pool_count, 12);
        assert_eq!(report.manifest.client_tag, "retain-always");
    }

    #[test]
    fn reruns_reproduce_the_report_exactly() {
        let pool = pool();
        let queries = queries();
        let config = BenchConfig { k: 3, seeds: vec![5, 6, 7], ..Default::default() };
        let template = PromptTemplate::default_dropout();
        let a = compare_prompt_strategies(&pool, &queries, &RetainClient, &template, &config).unwrap();
        let b = compare_prompt_strategies(&pool, &queries, &RetainClient, &template, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn selection_failures_are_tallied_not_fatal() {
        // Pool with no retained instance: only_false cannot select examples.
        let pool: Vec<_> = (0..6).map(|i| inst(&format!("p{i}"), true, i + 1)).collect();
        let queries = vec![inst("qa", true, 3), inst("qb", false, 4)];
        let config = BenchConfig { k: 2, seeds: vec![1], ..Default::default() };
        let report =
            compare_prompt_strategies(&pool, &queries, &RetainClient, &PromptTemplate::default_dropout(), &config)
                .unwrap();
        let only_false = report
            .strategies
            .iter()
            .find(|s| s.label == StrategyKind::OnlyFalse.label())
            .unwrap();
        assert_eq!(only_false.runs[0].failures, 2);
        assert_eq!(only_false.runs[0].answered, 0);
        assert_eq!(only_false.mean_accuracy, 0.0);
        let random = report
            .strategies
            .iter()
            .find(|s| s.label == StrategyKind::Random.label())
            .unwrap();
        assert_eq!(random.runs[0].failures, 0);
    }

    #[test]
    fn prompt_cache_dedupes_repeated_prompts() {
        let pool = pool();
        let queries = queries();
        let client = CountingClient { calls: AtomicUsize::new(0) };
        let config = BenchConfig { k: 3, seeds: vec![9, 9], ..Default::default() };
        compare_prompt_strategies(&pool, &queries, &client, &PromptTemplate::default_dropout(), &config)
            .unwrap();
        let calls = client.calls.load(Ordering::SeqCst);
        // Identical seeds repeat every few-shot prompt, and the zero-shot
        // pass issues one prompt per query, so at most one pass worth of
        // distinct prompts hits the client.
        let upper = queries.len() * (1 + StrategyKind::ALL.len());
        assert!(calls <= upper, "calls {calls} > upper {upper}");
        assert!(calls >= queries.len());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let pool = pool();
        let queries = queries();
        let template = PromptTemplate::default_dropout();
        let no_k = BenchConfig { k: 0, ..Default::default() };
        assert!(matches!(
            compare_prompt_strategies(&pool, &queries, &RetainClient, &template, &no_k),
            Err(PredictError::BadPolicy(_))
        ));
        let no_seeds = BenchConfig { seeds: vec![], ..Default::default() };
        assert!(matches!(
            compare_prompt_strategies(&pool, &queries, &RetainClient, &template, &no_seeds),
            Err(PredictError::BadPolicy(_))
        ));
        let no_queries = BenchConfig::default();
        assert!(matches!(
            compare_prompt_strategies(&pool, &[], &RetainClient, &template, &no_queries),
            Err(PredictError::BadPolicy(_))
        ));
    }

    #[test]
    fn table_lists_every_strategy_row() {
        let pool = pool();
        let queries = queries();
        let config = BenchConfig { k: 2, seeds: vec![3], ..Default::default() };
        let report =
            compare_prompt_strategies(&pool, &queries, &RetainClient, &PromptTemplate::default_dropout(), &config)
                .unwrap();
        let table = report.render_table();
        assert!(table.contains("zero_shot"));
        for kind in StrategyKind::ALL {
            assert!(table.contains(kind.label()), "missing {}", kind.label());
        }
        assert!(table.contains("0.500"));
    }
}
