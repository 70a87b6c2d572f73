//! Acceptance suite: nine numbered criteria covering dataset combinatorics,
//! statistics oracles, classifier training, the staged predictor, the email
//! loop, effect measurement, and whole-pipeline reproducibility. Each test
//! prints one `[criterion N] PASS` line and enforces a wall-clock budget;
//! tolerances are pinned as constants next to the checks that use them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use retain_core::courselog::{parse_course_log, AuthorRole, CourseLog, DAY_MS};
use retain_core::cpadp::{Predictor, StagePolicy};
use retain_core::dataset::{build_dataset, count_matrix, split, PredictionInstance};
use retain_core::eval::{compare_prompt_strategies, evaluate, BenchConfig};
use retain_core::hashing::sha256_hex;
use retain_core::intervene::{
    group_comparison, login_delta, post_window_students, receipt_id, run_campaign, CampaignConfig,
    FileSink, GroupRow, LoginDelta,
};
use retain_core::predict::{
    CachedClient, DecodingParams, EmailTemplate, FewShotStrategy, MlpModel, PromptTemplate,
    ResponseCache, StrategyKind, TrainConfig, TrainedModel,
};
use retain_core::simkit::{build_mock_client, generate_cohort, CohortSpec, MockScript};
use retain_core::stats::{chi_square, pearson, ProgressBuckets};

fn finish(criterion: u32, started: Instant, budget: Duration, summary: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "[criterion {criterion}] FAIL: took {elapsed:.2?}, budget {budget:.0?}"
    );
    println!("[criterion {criterion}] PASS ({elapsed:.2?} of {budget:.0?}): {summary}");
}

#[test]
fn criterion_1_dataset_combinatorics_are_exact() {
    let started = Instant::now();
    let budget = Duration::from_secs(5);

    let spec = CohortSpec::table1_default(13);
    assert_eq!(spec.histogram, vec![34, 22, 8, 3, 7, 2, 110]);
    let cohort = generate_cohort(&spec).unwrap();
    assert_eq!(cohort.log.students.len(), 186);

    let instances = build_dataset(&cohort.log).unwrap();
    assert_eq!(instances.len(), 1201, "34+22+8+3+7+2+110 students over 6 chapters");

    let expected_matrix: Vec<Vec<u64>> = vec![
        vec![186, 22, 8, 3, 7, 2],
        vec![0, 186, 8, 3, 7, 2],
        vec![0, 0, 186, 3, 7, 2],
        vec![0, 0, 0, 186, 7, 2],
        vec![0, 0, 0, 0, 186, 2],
        vec![0, 0, 0, 0, 0, 186],
    ];
    assert_eq!(count_matrix(&instances, 6), expected_matrix);

    let dropper = cohort
        .truth
        .iter()
        .find(|t| t.drop_chapter == Some(3))
        .expect("the histogram guarantees chapter-3 droppers");
    let pairs: Vec<(u32, u32, bool)> = instances
        .iter()
        .filter(|i| i.student_id == dropper.student_id)
        .map(|i| (i.c_h, i.c_p, i.label))
        .collect();
    let expected_pairs = vec![
        (1, 1, false),
        (1, 3, true),
        (2, 2, false),
        (2, 3, true),
        (3, 3, true),
        (4, 4, true),
        (5, 5, true),
        (6, 6, true),
    ];
    assert_eq!(pairs, expected_pairs, "chapter-3 dropper enumerates exactly these pairs");

    finish(1, started, budget, "1201 instances, exact count matrix, exact dropper pairs");
}

#[test]
fn criterion_2_count_identity_holds_on_random_cohorts() {
    let started = Instant::now();
    let budget = Duration::from_secs(30);

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for trial in 0..100u32 {
        let chapter_count = rng.gen_range(2..=8u32);
        let mut histogram: Vec<u32> =
            (0..=chapter_count).map(|_| rng.gen_range(0..6u32)).collect();
        if histogram.iter().sum::<u32>() == 0 {
            histogram[chapter_count as usize] = 3;
        }
        let spec = CohortSpec {
            course_id: format!("cohort-{trial}"),
            chapter_count,
            chapter_titles: (1..=chapter_count).map(|c| format!("Chapter {c}")).collect(),
            histogram: histogram.clone(),
            base_message_rate: 1.0,
            rate_per_level: 1.2,
            base_message_words: 12.0,
            words_per_level: 6.0,
            length_sigma: 0.4,
            semester_days: chapter_count * 7 + 20,
            seed: rng.gen(),
        };
        let cohort = generate_cohort(&spec).unwrap();
        let instances = build_dataset(&cohort.log).unwrap();

        let students = histogram.iter().map(|&h| h as u64).sum::<u64>();
        let dropper_extras: u64 = cohort
            .truth
            .iter()
            .filter_map(|t| t.drop_chapter)
            .map(|d| (d - 1) as u64)
            .sum();
        assert_eq!(
            instances.len() as u64,
            students * chapter_count as u64 + dropper_extras,
            "count identity failed on trial {trial}"
        );

        let drop_by_id: BTreeMap<&str, Option<u32>> =
            cohort.truth.iter().map(|t| (t.student_id.as_str(), t.drop_chapter)).collect();
        for inst in &instances {
            let drop = drop_by_id[inst.student_id.as_str()];
            let recomputed = matches!(drop, Some(d) if d <= inst.c_p);
            assert_eq!(
                inst.label, recomputed,
                "label mismatch on trial {trial} for {} at ({}, {})",
                inst.student_id, inst.c_h, inst.c_p
            );
        }
    }

    finish(2, started, budget, "N = S*L + sum(D-1) and stored labels verified on 100 cohorts");
}

#[test]
fn criterion_3_statistics_match_definitional_oracles() {
    let started = Instant::now();
    let budget = Duration::from_secs(10);

    const CHI_SQUARE_TOLERANCE: f64 = 1e-9;
    const PEARSON_TOLERANCE: f64 = 1e-10;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..200u32 {
        let categories = rng.gen_range(2..=4usize);
        let max_progress = rng.gen_range(2..=6u32);
        let buckets = ProgressBuckets::default_for(max_progress);
        let n = rng.gen_range(20..120usize);

        let mut labels = vec!["g0".to_string(), "g1".to_string()];
        let mut progress = vec![0u32, max_progress];
        for _ in 0..n {
            labels.push(format!("g{}", rng.gen_range(0..categories)));
            progress.push(rng.gen_range(0..=max_progress));
        }

        let result = chi_square(&labels, &progress, &buckets).unwrap();

        let row_names: Vec<String> = {
            let set: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
            set.into_iter().map(str::to_string).collect()
        };
        let mut table = vec![vec![0u64; buckets.len()]; row_names.len()];
        for (label, &p) in labels.iter().zip(&progress) {
            let row = row_names.iter().position(|r| r == label).unwrap();
            let col = buckets.bucket_of(p).unwrap();
            table[row][col] += 1;
        }
        let kept: Vec<usize> = (0..buckets.len())
            .filter(|&c| table.iter().any(|row| row[c] > 0))
            .collect();
        let observed: Vec<Vec<u64>> =
            table.iter().map(|row| kept.iter().map(|&c| row[c]).collect()).collect();
        assert_eq!(result.observed, observed, "tabulation mismatch on trial {trial}");

        let grand: f64 = observed.iter().flatten().sum::<u64>() as f64;
        let row_totals: Vec<f64> =
            observed.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let col_totals: Vec<f64> = (0..kept.len())
            .map(|c| observed.iter().map(|r| r[c] as f64).sum())
            .collect();
        let mut statistic = 0.0;
        for (r, row) in observed.iter().enumerate() {
            for (c, &o) in row.iter().enumerate() {
                let e = row_totals[r] * col_totals[c] / grand;
                statistic += (o as f64 - e).powi(2) / e;
            }
        }
        let dof = (row_names.len() as u32 - 1) * (kept.len() as u32 - 1);
        assert_eq!(result.dof, dof, "dof mismatch on trial {trial}");
        assert!(
            (result.statistic - statistic).abs() < CHI_SQUARE_TOLERANCE,
            "chi-square off oracle by {} on trial {trial}",
            (result.statistic - statistic).abs()
        );
    }

    let labels: Vec<String> = std::iter::repeat("A".to_string())
        .take(20)
        .chain(std::iter::repeat("B".to_string()).take(20))
        .collect();
    let progress: Vec<u32> =
        std::iter::repeat(0).take(20).chain(std::iter::repeat(2).take(20)).collect();
    let diagonal = chi_square(&labels, &progress, &ProgressBuckets::default_for(2)).unwrap();
    assert_eq!(diagonal.observed, vec![vec![20, 0], vec![0, 20]]);
    assert_eq!(diagonal.statistic, 40.0, "perfect 20/20 separation is exactly 40");

    for trial in 0..200u32 {
        let n = rng.gen_range(2..=200usize);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> =
            x.iter().map(|&v| rng.gen_range(-1.0..1.0) * v + rng.gen_range(-2.0..2.0)).collect();
        let result = pearson(&x, &y).unwrap();

        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let cov: f64 = x.iter().zip(&y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|&a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|&b| (b - my).powi(2)).sum();
        let oracle = cov / (vx.sqrt() * vy.sqrt());
        assert!(
            (result.r - oracle).abs() < PEARSON_TOLERANCE,
            "pearson off oracle by {} on trial {trial} (n={n})",
            (result.r - oracle).abs()
        );
        assert_eq!(result.n, n);
    }

    finish(3, started, budget, "200 chi-square and 200 pearson oracle matches, exact 40.0 case");
}

fn separable_toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n {
        let x0: f64 = rng.gen_range(-2.0..2.0);
        let x1: f64 = rng.gen_range(-1.0..1.0);
        let offset = if x0 >= 0.0 { 0.5 } else { -0.5 };
        xs.push(vec![x0 + offset, x1]);
        ys.push(x0 >= 0.0);
    }
    (xs, ys)
}

#[test]
fn criterion_4_classifier_gradients_and_training_are_sound() {
    let started = Instant::now();
    let budget = Duration::from_secs(60);

    const GRADIENT_REL_TOLERANCE: f64 = 1e-4;
    const SOFTMAX_TOLERANCE: f64 = 1e-9;
    const TOY_ACCURACY_FLOOR: f64 = 0.99;

    let (xs, ys) = separable_toy(12, 5);
    let warmup = TrainConfig { hidden: (6, 4), learning_rate: 0.05, epochs: 3, batch_size: 8, seed: 3 };
    let model = MlpModel::train(&xs, &ys, &warmup).unwrap();
    let (_, grads) = model.gradients(&xs, &ys);
    let eps = 1e-5;
    let mut max_rel = 0.0f64;
    let mut probe = model.clone();
    for layer in 0..3 {
        for slot in 0..model.weights[layer].len() + model.biases[layer].len() {
            let (is_weight, idx) = if slot < model.weights[layer].len() {
                (true, slot)
            } else {
                (false, slot - model.weights[layer].len())
            };
            let analytic = if is_weight {
                grads.weights[layer][idx]
            } else {
                grads.biases[layer][idx]
            };
            let read = |m: &MlpModel| {
                if is_weight {
                    m.weights[layer][idx]
                } else {
                    m.biases[layer][idx]
                }
            };
            let original = read(&model);
            let write = |m: &mut MlpModel, v: f64| {
                if is_weight {
                    m.weights[layer][idx] = v;
                } else {
                    m.biases[layer][idx] = v;
                }
            };
            write(&mut probe, original + eps);
            let up = probe.loss(&xs, &ys);
            write(&mut probe, original - eps);
            let down = probe.loss(&xs, &ys);
            write(&mut probe, original);
            let numeric = (up - down) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
    }
    assert!(
        max_rel < GRADIENT_REL_TOLERANCE,
        "worst gradient relative error {max_rel} across every parameter"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let (p, q) = model.predict_proba(&x).unwrap();
        assert!((p + q - 1.0).abs() < SOFTMAX_TOLERANCE, "softmax drifted: {p} + {q}");
    }

    let (xs, ys) = separable_toy(200, 1);
    let config =
        TrainConfig { hidden: (8, 4), learning_rate: 0.05, epochs: 200, batch_size: 16, seed: 2 };
    let fitted = MlpModel::train(&xs, &ys, &config).unwrap();
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| (fitted.predict_proba(x).unwrap().0 >= 0.5) == y)
        .count();
    let accuracy = correct as f64 / xs.len() as f64;
    assert!(accuracy >= TOY_ACCURACY_FLOOR, "separable toy accuracy {accuracy}");

    let again = MlpModel::train(&xs, &ys, &config).unwrap();
    assert_eq!(fitted, again, "same seed must reproduce identical weights");

    finish(4, started, budget, "gradients, softmax, separable fit, and seeded determinism");
}

#[test]
fn criterion_5_trained_model_generalizes_across_students() {
    let started = Instant::now();
    let budget = Duration::from_secs(120);

    const ACCURACY_FLOOR: f64 = 0.90;
    const F1_FLOOR: f64 = 0.85;

    let spec = CohortSpec::table1_default(17);
    let cohort = generate_cohort(&spec).unwrap();
    assert!(cohort.log.students.len() >= 150, "cohort too small for this check");

    let instances = build_dataset(&cohort.log).unwrap();
    let parts = split(&instances, 0.2, 23).unwrap();
    let train_ids: BTreeSet<&str> = parts.train.iter().map(|i| i.student_id.as_str()).collect();
    let test_ids: BTreeSet<&str> = parts.test.iter().map(|i| i.student_id.as_str()).collect();
    assert!(train_ids.is_disjoint(&test_ids), "split leaked a student across sides");
    assert_eq!(parts.train.len() + parts.test.len(), instances.len());

    let model = TrainedModel::fit(&parts.train, 6, &TrainConfig::default(), None).unwrap();
    let predicted: Vec<bool> =
        parts.test.iter().map(|i| model.predict(i, None).unwrap().label).collect();
    let report = evaluate(&parts.test, &predicted, 6).unwrap();

    assert!(
        report.metrics.accuracy >= ACCURACY_FLOOR,
        "held-out accuracy {:.4} under {ACCURACY_FLOOR}",
        report.metrics.accuracy
    );
    assert!(
        report.metrics.f1 >= F1_FLOOR,
        "held-out F1 {:.4} under {F1_FLOOR}",
        report.metrics.f1
    );

    finish(
        5,
        started,
        budget,
        &format!(
            "held-out accuracy {:.3}, F1 {:.3} on {} unseen-student instances",
            report.metrics.accuracy,
            report.metrics.f1,
            parts.test.len()
        ),
    );
}

#[test]
fn criterion_6_example_selection_quality_orders_strategies() {
    let started = Instant::now();
    let budget = Duration::from_secs(60);

    let spec = CohortSpec::table1_default(19);
    let cohort = generate_cohort(&spec).unwrap();
    let instances = build_dataset(&cohort.log).unwrap();
    let parts = split(&instances, 0.5, 41).unwrap();

    let client = build_mock_client(&MockScript::DiversitySensitive { seed: 7 }, &instances);
    let report = compare_prompt_strategies(
        &parts.train,
        &parts.test,
        client.as_ref(),
        &PromptTemplate::default_dropout(),
        &BenchConfig {
            k: 4,
            seeds: vec![5, 6, 7],
            retry_budget: 2,
            params: DecodingParams::default(),
        },
    )
    .unwrap();

    let accuracy = |label: &str| {
        report
            .strategies
            .iter()
            .find(|s| s.label == label)
            .unwrap_or_else(|| panic!("strategy {label} missing from the bench"))
            .mean_accuracy
    };
    let plus_casual = accuracy("special_plus_casual");
    let pair = accuracy("special_pair");
    let only_false = accuracy("only_false");
    let random = accuracy("random");
    assert!(
        plus_casual >= pair && pair >= only_false && only_false >= random,
        "ordering violated: special_plus_casual {plus_casual:.3}, special_pair {pair:.3}, \
         only_false {only_false:.3}, random {random:.3}"
    );

    finish(
        6,
        started,
        budget,
        &format!(
            "mean accuracies {plus_casual:.3} >= {pair:.3} >= {only_false:.3} >= {random:.3}"
        ),
    );
}

fn ts(day: u32, offset: i64) -> i64 {
    (day as i64 - 1) * DAY_MS + offset
}

fn word_block(n: usize) -> String {
    vec!["word"; n].join(" ")
}

/// Seventeen returning students around day 65 plus background logins, with
/// per-student activity chosen so the two group profiles land on the pinned
/// reference means.
fn measurement_fixture() -> CourseLog {
    let mut lines = vec![
        r#"{"kind":"course.meta","course_id":"scripted","chapter_count":6,"chapter_titles":["General Artificial Intelligence Overview","Machine Learning Basics","Neural Networks and Deep Learning","Large Language Models","Agents and Tool Use","Alignment and Safety"]}"#
            .to_string(),
    ];
    let mut student = |id: &str| {
        lines.push(format!(
            r#"{{"kind":"student","student_id":"{id}","college":"Eng","major":"CS","gender":"x","grade":"2"}}"#
        ));
    };
    let self_initiated: Vec<String> = (1..=9).map(|i| format!("si{i}")).collect();
    let recalled: Vec<String> = (1..=8).map(|i| format!("rc{i}")).collect();
    let background: Vec<String> = (1..=5).map(|i| format!("bg{i}")).collect();
    for id in self_initiated.iter().chain(&recalled).chain(&background) {
        student(id);
    }

    let mut login = |id: &str, day: u32| {
        lines.push(format!(
            r#"{{"kind":"login","student_id":"{id}","day_index":{day},"timestamp_ms":{}}}"#,
            ts(day, 500)
        ));
    };

    // Self-initiated offline day targets: 65 minus these last logins -> 69 total.
    let si_last_login = [60, 59, 58, 58, 57, 57, 56, 56, 55];
    for (id, &day) in self_initiated.iter().zip(&si_last_login) {
        login(id, day);
    }
    // Recalled: five last logins summing to 263 offline days; three never logged in.
    let rc_last_login = [15, 14, 13, 11, 9];
    for (id, &day) in recalled.iter().zip(&rc_last_login) {
        login(id, day);
    }
    // Everyone returns in the post window; 8 extra logins bring the post count to 25.
    for id in &self_initiated {
        login(id, 66);
    }
    for id in &recalled {
        login(id, 67);
    }
    for (id, day) in
        [("si1", 67), ("si1", 68), ("si2", 68), ("si3", 68), ("rc1", 68), ("rc2", 68), ("rc3", 66), ("rc4", 66)]
    {
        login(id, day);
    }
    // Background students supply the 14 pre-window logins and never return.
    for id in &background {
        login(id, 63);
        login(id, 64);
    }
    for id in background.iter().take(4) {
        login(id, 65);
    }

    let mut message = |id: &str, idx: usize, words: usize| {
        lines.push(format!(
            r#"{{"kind":"message","student_id":"{id}","chapter":1,"timestamp_ms":{},"author_role":"student","text":"{}"}}"#,
            ts(30, 1000 + idx as i64),
            word_block(words)
        ));
    };
    // Message counts [9x7, 8x2] and word totals chosen so the per-student
    // words-per-message ratios sum to 959.0417 (mean 106.56 within 0.01).
    let si_messages: [(usize, usize); 9] = [
        (9, 959),
        (9, 959),
        (9, 959),
        (9, 959),
        (9, 959),
        (9, 958),
        (9, 958),
        (8, 854),
        (8, 853),
    ];
    for (id, &(count, total)) in self_initiated.iter().zip(&si_messages) {
        for m in 0..count - 1 {
            message(id, m, 100);
        }
        message(id, count - 1, total - 100 * (count - 1));
    }
    // Two recalled students wrote one three-word message; the rest were silent.
    message("rc1", 0, 3);
    message("rc2", 0, 3);

    let mut mark = |id: &str, chapter: u32| {
        lines.push(format!(
            r#"{{"kind":"chapter_complete","student_id":"{id}","chapter":{chapter},"timestamp_ms":{}}}"#,
            ts(20 + chapter, 700)
        ));
    };
    // Chapter totals: 23 across the nine self-initiated, 6 across the recalled.
    let si_chapters = [3, 3, 3, 3, 3, 2, 2, 2, 2];
    for (id, &done) in self_initiated.iter().zip(&si_chapters) {
        for c in 1..=done {
            mark(id, c);
        }
    }
    for id in recalled.iter().take(6) {
        mark(id, 1);
    }

    parse_course_log(&(lines.join("\n") + "\n")).unwrap()
}

fn oracle_group_means(log: &CourseLog, members: &[&str], analysis_day: u32) -> GroupRow {
    let cutoff = analysis_day as i64 * DAY_MS;
    let mut offline = Vec::new();
    let mut chapters = Vec::new();
    let mut counts = Vec::new();
    let mut lens = Vec::new();
    for id in members {
        let last = log
            .events
            .iter()
            .filter(|e| &e.student_id == id && e.day_index <= analysis_day)
            .map(|e| e.day_index)
            .max();
        if let Some(day) = last {
            offline.push((analysis_day - day) as f64);
        }
        chapters.push(
            log.completion_marks
                .iter()
                .filter(|m| &m.student_id == id && m.timestamp_ms < cutoff)
                .count() as f64,
        );
        let texts: Vec<&str> = log
            .records
            .iter()
            .filter(|r| {
                &r.student_id == id
                    && r.author_role == AuthorRole::Student
                    && r.timestamp_ms < cutoff
            })
            .map(|r| r.text.as_str())
            .collect();
        counts.push(texts.len() as f64);
        let words: usize = texts.iter().map(|t| t.split_whitespace().count()).sum();
        lens.push(if texts.is_empty() { 0.0 } else { words as f64 / texts.len() as f64 });
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    GroupRow {
        label: String::new(),
        headcount: members.len(),
        offline_days_mean: mean(&offline),
        offline_days_count: offline.len(),
        chapter_mean: mean(&chapters),
        message_count_mean: mean(&counts),
        message_length_mean: mean(&lens),
    }
}

#[test]
fn criterion_7_measurement_reproduces_the_reference_group_profile() {
    let started = Instant::now();
    let budget = Duration::from_secs(5);

    const GROUP_MEAN_TOLERANCE: f64 = 0.01;

    let log = measurement_fixture();
    let day = 65;
    let window = 3;

    let delta = login_delta(&log.events, day, window);
    assert_eq!(delta, LoginDelta { pre_count: 14, post_count: 25 });

    let returned = post_window_students(&log.events, day, window);
    assert_eq!(returned.len(), 17, "all scripted students return, no background ones");
    let intervened: BTreeSet<String> = (1..=8).map(|i| format!("rc{i}")).collect();
    let comparison = group_comparison(&log, &returned, &intervened, day).unwrap();

    let close = |value: Option<f64>, target: f64, what: &str| {
        let v = value.unwrap_or_else(|| panic!("{what} undefined"));
        assert!(
            (v - target).abs() <= GROUP_MEAN_TOLERANCE,
            "{what}: got {v:.4}, want {target} within {GROUP_MEAN_TOLERANCE}"
        );
    };
    let si = &comparison.self_initiated;
    assert_eq!(si.headcount, 9);
    assert_eq!(si.offline_days_count, 9);
    close(si.offline_days_mean, 7.66, "self-initiated offline days");
    close(si.chapter_mean, 2.56, "self-initiated chapters");
    close(si.message_count_mean, 8.78, "self-initiated messages");
    close(si.message_length_mean, 106.56, "self-initiated words per message");

    let rc = &comparison.recalled;
    assert_eq!(rc.headcount, 8);
    assert_eq!(rc.offline_days_count, 5, "students who never logged in stay out of the mean");
    close(rc.offline_days_mean, 52.6, "recalled offline days");
    close(rc.chapter_mean, 0.75, "recalled chapters");
    close(rc.message_count_mean, 0.25, "recalled messages");
    close(rc.message_length_mean, 0.75, "recalled words per message");

    // Independent second pass straight off the parsed log.
    let si_names: Vec<String> = (1..=9).map(|i| format!("si{i}")).collect();
    let si_ids: Vec<&str> = si_names.iter().map(String::as_str).collect();
    let rc_ids: Vec<&str> = intervened.iter().map(String::as_str).collect();
    for (row, members) in [(si, si_ids.as_slice()), (rc, rc_ids.as_slice())] {
        let oracle = oracle_group_means(&log, members, day);
        assert_eq!(row.offline_days_mean, oracle.offline_days_mean);
        assert_eq!(row.offline_days_count, oracle.offline_days_count);
        assert_eq!(row.chapter_mean, oracle.chapter_mean);
        assert_eq!(row.message_count_mean, oracle.message_count_mean);
        assert_eq!(row.message_length_mean, oracle.message_length_mean);
    }

    finish(7, started, budget, "login delta (14, 25) and both group profiles on target");
}

#[test]
fn criterion_8_campaign_drafts_are_personal_and_fully_receipted() {
    let started = Instant::now();
    let budget = Duration::from_secs(10);

    let mut lines = vec![
        r#"{"kind":"course.meta","course_id":"mini-course","chapter_count":6,"chapter_titles":["General Artificial Intelligence Overview","Machine Learning Basics","Neural Networks and Deep Learning","Large Language Models","Agents and Tool Use","Alignment and Safety"]}"#
            .to_string(),
    ];
    for id in ["fred", "gina", "hal", "ned", "zoe"] {
        lines.push(format!(
            r#"{{"kind":"student","student_id":"{id}","college":"Eng","major":"CS","gender":"x","grade":"2"}}"#
        ));
    }
    let mut message = |id: &str, chapter: u32, idx: i64, text: &str| {
        lines.push(format!(
            r#"{{"kind":"message","student_id":"{id}","chapter":{chapter},"timestamp_ms":{},"author_role":"student","text":"{text}"}}"#,
            ts(10 + chapter, idx)
        ));
    };
    message("fred", 1, 1, "Starting the overview chapter now");
    message(
        "fred",
        2,
        2,
        "I am stuck on what Hallucination means here, could someone walk me through a short question about it",
    );
    message("gina", 1, 1, "This is my first note");
    message("hal", 3, 1, "Networks confuse me a bit");
    let filler = word_block(600);
    for i in 0..4 {
        message("ned", 1, 10 + i, &filler);
    }
    message("ned", 4, 1, "Still going strong");
    let mut mark = |id: &str, chapter: u32| {
        lines.push(format!(
            r#"{{"kind":"chapter_complete","student_id":"{id}","chapter":{chapter},"timestamp_ms":{}}}"#,
            ts(10 + chapter, 900)
        ));
    };
    mark("fred", 1);
    mark("hal", 1);
    mark("hal", 2);
    for c in 1..=3 {
        mark("ned", c);
    }
    for c in 1..=6 {
        mark("zoe", c);
    }
    let log = parse_course_log(&(lines.join("\n") + "\n")).unwrap();

    let pool: Vec<PredictionInstance> = Vec::new();
    let verdict_client =
        build_mock_client(&MockScript::LengthHeuristic { dropout_below_chars: 2000 }, &pool);
    let verdict_cache = ResponseCache::in_memory();
    let cached_verdicts = CachedClient::new(verdict_client.as_ref(), &verdict_cache);
    let template = PromptTemplate::default_dropout();
    let predictor = Predictor {
        pool: &pool,
        model: None,
        client: &cached_verdicts,
        embed: None,
        template: &template,
        strategy: FewShotStrategy::new(StrategyKind::SpecialPlusCasual, 4, 1),
        policy: StagePolicy { few_shot_min: 20, fine_tune_min: 200, fallback_enabled: true },
        params: DecodingParams::default(),
        retry_budget: 2,
    };

    let email_client = build_mock_client(&MockScript::EmailEcho, &pool);
    let email_cache = ResponseCache::in_memory();
    let cached_email = CachedClient::new(email_client.as_ref(), &email_cache);

    let outbox = tempfile::tempdir().unwrap();
    let mut sink = FileSink::new(outbox.path()).unwrap();
    let config = CampaignConfig { campaign_id: "recall-1".into(), day: 40, ..Default::default() };
    let outcome = run_campaign(
        &log,
        &predictor,
        &cached_email,
        &EmailTemplate::default_email(),
        &mut sink,
        &[],
        &config,
    );

    assert!(outcome.manifest.failures.is_empty(), "{:?}", outcome.manifest.failures);
    let flagged: BTreeSet<&str> =
        outcome.at_risk.iter().map(|e| e.student_id.as_str()).collect();
    assert_eq!(flagged, ["fred", "gina", "hal"].into_iter().collect::<BTreeSet<&str>>());

    let drafted: Vec<&str> = outcome.drafts.iter().map(|d| d.student_id.as_str()).collect();
    let drafted_set: BTreeSet<&str> = drafted.iter().copied().collect();
    assert_eq!(drafted.len(), drafted_set.len(), "a student was drafted twice");
    assert_eq!(drafted_set, flagged, "every at-risk student gets exactly one draft");
    assert_eq!(outcome.manifest.delivered_count, 3);
    assert!(outcome.manifest.skipped_cooldown.is_empty());

    let fred = outcome.drafts.iter().find(|d| d.student_id == "fred").unwrap();
    let fred_text = format!("{}\n{}", fred.subject, fred.body);
    assert!(fred_text.contains("Hallucination"), "draft ignores Fred's own question");
    assert!(
        fred_text.contains("General Artificial Intelligence Overview"),
        "draft ignores the chapter Fred already finished"
    );

    assert_eq!(outcome.records.len(), outcome.drafts.len());
    let mut receipt_ids = BTreeSet::new();
    for record in &outcome.records {
        assert_eq!(record.campaign_id, "recall-1");
        let draft = outcome
            .drafts
            .iter()
            .find(|d| d.student_id == record.student_id)
            .expect("record without a draft");
        assert_eq!(
            record.receipt_id,
            receipt_id(&draft.student_id, &draft.subject, &draft.body),
            "receipt does not match the draft content"
        );
        assert!(receipt_ids.insert(record.receipt_id.clone()), "duplicate receipt");
        assert!(
            outbox.path().join(format!("{}.txt", record.receipt_id)).exists(),
            "delivered message file missing"
        );
    }
    let files = std::fs::read_dir(outbox.path()).unwrap().count();
    assert_eq!(files, outcome.records.len(), "outbox holds exactly one file per receipt");

    finish(8, started, budget, "3 at-risk students, personal Fred draft, receipts bijective");
}

fn run_retain(config: &Path, args: &[&str]) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_retain"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "retain {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn hash_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, sha256_hex(&std::fs::read(&path).unwrap()));
            }
        }
    }
    out
}

fn run_full_pipeline(root: &Path) -> PathBuf {
    let workspace = root.join("workspace");
    let config = root.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "[seeds]\nmaster = 11\n\n\
             [clients]\ntext = \"mock\"\n\n\
             [clients.verdict_script]\nkind = \"length_heuristic\"\ndropout_below_chars = 1200\n\n\
             [paths]\nworkspace = {workspace:?}\n"
        ),
    )
    .unwrap();

    let log = workspace.join("logs").join("cohort.course.jsonl");
    let log = log.to_str().unwrap().to_string();
    let dataset = workspace.join("datasets").join("cohort.instances.jsonl");
    let dataset = dataset.to_str().unwrap().to_string();
    let model = workspace.join("models").join("cohort.model.json");
    let model = model.to_str().unwrap().to_string();

    run_retain(&config, &["simulate", "--out", "cohort"]);
    run_retain(&config, &["ingest", "--log", &log, "--name", "normalized"]);
    run_retain(&config, &["analyze", "--log", &log, "--out", "cohort"]);
    run_retain(&config, &["build-dataset", "--log", &log, "--out", "cohort", "--stats"]);
    run_retain(
        &config,
        &["train", "--dataset", &dataset, "--out", "cohort", "--chapters", "6", "--epochs", "150"],
    );
    run_retain(
        &config,
        &[
            "evaluate", "--dataset", &dataset, "--model", &model, "--chapters", "6", "--out",
            "cohort", "--heatmap",
        ],
    );
    run_retain(
        &config,
        &[
            "intervene", "--log", &log, "--campaign", "c1", "--day", "60", "--dataset", &dataset,
            "--model", &model,
        ],
    );
    run_retain(&config, &["measure", "--log", &log, "--day", "60", "--campaign", "c1", "--out", "c1"]);
    workspace
}

#[test]
fn criterion_9_identical_seeds_reproduce_every_artifact() {
    let started = Instant::now();
    let budget = Duration::from_secs(300);

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let tree_a = hash_tree(&run_full_pipeline(dir_a.path()));
    let tree_b = hash_tree(&run_full_pipeline(dir_b.path()));

    assert!(tree_a.len() >= 15, "workspace unexpectedly sparse: {} files", tree_a.len());
    let paths_a: Vec<&String> = tree_a.keys().collect();
    let paths_b: Vec<&String> = tree_b.keys().collect();
    assert_eq!(paths_a, paths_b, "the two runs produced different file sets");
    for (path, hash) in &tree_a {
        assert_eq!(hash, &tree_b[path], "artifact {path} differs between identical runs");
    }

    finish(
        9,
        started,
        budget,
        &format!("two fresh runs agreed on all {} workspace files", tree_a.len()),
    );
}
