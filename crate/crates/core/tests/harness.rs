mod common;

use std::sync::Arc;

use common::{toy_explicit, TOY_EXPLICIT};
use hyperlocal::campaign::{CampaignResult, PeriodRecord};
use hyperlocal::harness::{
    emit_csv, hist_path, overlap_ratio, read_csv, run_experiment, stats, ExperimentConfig, Source, CSV_HEADER,
};
use hyperlocal::model::WorkerId;
use hyperlocal::Error;

const SMALL_GEN: &str = "\
gen.periods = 6
gen.mean = 8
gen.tasks_per_period = 25
gen.area = 0,0,30,30
gen.radius = 4
seeds = 1,2,3
";

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, &[]).unwrap()
}

#[test]
fn toy_rows_from_a_file_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.txt");
    std::fs::write(&path, TOY_EXPLICIT).unwrap();
    let text = format!(
        "source.file = {}\nbudget.strategy = explicit\nbudget.per_period = 1,1\noffline.solver = exhaustive\n",
        path.display()
    );
    let rows = run_experiment(&cfg(&text)).unwrap();
    assert_eq!(rows.len(), 3);
    let by_budget = |b: &str| rows.iter().find(|r| r.budget == b).unwrap();
    assert_eq!(by_budget("offline-fixed").coverage, 5);
    assert_eq!(by_budget("offline-dynamic").coverage, 6);
    assert_eq!(by_budget("fixed-explicit").coverage, 4);
    assert!(by_budget("offline-fixed").config.starts_with("offline-fixed-exhaustive-"));
}

#[test]
fn in_memory_source_matches_file_source() {
    let mut c = cfg("budget.mode = dynamic\nbudget.strategy = naive\nbudget.total = 2\n");
    c.source = Source::Instance(Arc::new(toy_explicit()));
    let rows = run_experiment(&c).unwrap();
    assert_eq!(rows[0].coverage, 6);
    assert_eq!(rows[0].budget, "naive");
}

#[test]
fn empty_seed_list_gives_no_rows() {
    let rows = run_experiment(&cfg("budget.total = 4\nseeds =\n")).unwrap();
    assert!(rows.is_empty());
}

#[test]
fn one_row_per_config_and_seed() {
    let text = format!("{SMALL_GEN}sweep.K = 2,6,12,24\noffline.solver = greedy\noffline.only = true\n");
    let rows = run_experiment(&cfg(&text)).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 3);
    let mut keys: Vec<(String, u64)> = rows.iter().map(|r| (r.config.clone(), r.seed)).collect();
    keys.dedup();
    assert_eq!(keys.len(), rows.len());
    // Greedy dMTC coverage is non-decreasing in K for every seed.
    for seed in [1, 2, 3] {
        let mut dynamic: Vec<(usize, usize)> = rows
            .iter()
            .filter(|r| r.seed == seed && r.budget == "offline-dynamic")
            .map(|r| (r.k, r.coverage))
            .collect();
        dynamic.sort();
        assert!(dynamic.windows(2).all(|w| w[0].1 <= w[1].1), "{dynamic:?}");
    }
}

#[test]
fn csv_and_histograms_round_trip() {
    let text = format!("{SMALL_GEN}budget.mode = dynamic\nbudget.total = 10\nmoo.enabled = true\nmoo.alpha = 0.3\n");
    let rows = run_experiment(&cfg(&text)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    assert!(hist_path(&path).exists());
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.histogram, b.histogram);
        assert_eq!((a.coverage, a.total_utility, a.alpha), (b.coverage, b.total_utility, b.alpha));
        assert_eq!(a.config, b.config);
    }
}

#[test]
fn identical_config_identical_bytes() {
    let text = format!("{SMALL_GEN}budget.mode = dynamic\nbudget.total = 12\nheuristic = spatial\n");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let c = ExperimentConfig::parse(&text, &[("harness.jobs".into(), jobs.into())]).unwrap();
        let path = dir.path().join(format!("run{jobs}.csv"));
        emit_csv(&run_experiment(&c).unwrap(), &path).unwrap();
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn job_errors_carry_context() {
    let text = "source.file = /nonexistent/instance.txt\nbudget.total = 2\n";
    match run_experiment(&cfg(text)) {
        Err(Error::Job { context, .. }) => assert!(context.contains("seed=0"), "{context}"),
        other => panic!("expected a job error, got {other:?}"),
    }
}

#[test]
fn stats_summarize_per_config() {
    let text = format!("{SMALL_GEN}budget.total = 6\nsweep.K = 3,6\n");
    let rows = run_experiment(&cfg(&text)).unwrap();
    let s = stats(&rows, "coverage").unwrap();
    assert_eq!(s.len(), 2);
    for row in &s {
        assert_eq!(row.n, 3);
        assert!(row.min <= row.q1 && row.q1 <= row.median && row.median <= row.q3 && row.q3 <= row.max);
    }
    assert!(stats(&rows, "nope").is_err());
}

fn result(selections: &[&[u32]]) -> CampaignResult {
    let mut r = CampaignResult::default();
    for (i, s) in selections.iter().enumerate() {
        r.periods.push(PeriodRecord {
            period: i as u32 + 1,
            workers: 0,
            active_tasks: 0,
            idle_tasks: 0,
            deferred: 0,
            selected: s.iter().map(|&w| WorkerId(w)).collect(),
            covered: vec![],
            runtime_ms: 0.0,
        });
    }
    r
}

#[test]
fn overlap_examples() {
    let a = result(&[&[1, 2], &[]]);
    let b = result(&[&[2, 3], &[]]);
    assert!((overlap_ratio(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    // Same worker in a different period is a different selection.
    assert_eq!(overlap_ratio(&result(&[&[1], &[]]), &result(&[&[], &[1]])).unwrap(), 0.0);
    assert_eq!(overlap_ratio(&a, &a).unwrap(), 1.0);
    assert_eq!(overlap_ratio(&result(&[&[]]), &result(&[&[]])).unwrap(), 1.0);
    assert!(overlap_ratio(&a, &result(&[&[1]])).is_err());
}

#[test]
fn binary_reference_reports_full_overlap_for_binary_runs() {
    let text = format!("{SMALL_GEN}budget.total = 6\nmetrics.reference = binary\n");
    let rows = run_experiment(&cfg(&text)).unwrap();
    assert!(rows.iter().all(|r| r.overlap == Some(1.0)));
}
