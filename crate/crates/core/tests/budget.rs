mod common;

use common::{cosine_suite_config, random_instance, toy_explicit};
use hyperlocal::budget::{
    allocate_equal, allocate_random, apportion, derive_workload_baseline, run_adapt, run_fixed, run_naive, AdaptConfig,
    EpsilonTable, GainModel, LocalHeuristic, MeanGainRule,
};
use hyperlocal::campaign::RunOptions;
use hyperlocal::heuristics::Heuristic;
use hyperlocal::offline::{greedy_dmtc, CampaignBipartiteGraph};
use hyperlocal::workload::generate_campaign;
use proptest::prelude::*;

fn opts() -> RunOptions<'static> {
    RunOptions {
        timing: false,
        ..Default::default()
    }
}

fn eps(e: [f64; 4]) -> AdaptConfig {
    AdaptConfig {
        eps: EpsilonTable::new(e).unwrap(),
        ..AdaptConfig::default()
    }
}

proptest! {
    #[test]
    fn apportion_conserves_total(weights in prop::collection::vec(0.0f64..10.0, 1..30), total in 0usize..2000) {
        let out = apportion(&weights, total);
        prop_assert_eq!(out.len(), weights.len());
        prop_assert_eq!(out.iter().sum::<usize>(), total);
    }

    #[test]
    fn random_plans_conserve_total(k in 0usize..1000, q in 1u32..40, seed in any::<u64>()) {
        prop_assert_eq!(allocate_random(k, q, seed).total(), k);
        prop_assert_eq!(allocate_equal(k, q).total(), k);
    }
}

#[test]
fn naive_spends_everything_in_period_one_on_toy() {
    let r = run_naive(&toy_explicit(), 2, LocalHeuristic::default(), &opts()).unwrap();
    assert_eq!(r.coverage(), 6);
    assert_eq!(r.per_period_counts(), vec![2, 0]);
}

#[test]
fn baseline_identity_and_doubling() {
    use hyperlocal::campaign::{CampaignResult, PeriodRecord};
    let mut history = CampaignResult::default();
    for (i, n) in [3usize, 1, 0, 4].into_iter().enumerate() {
        history.periods.push(PeriodRecord {
            period: i as u32 + 1,
            workers: 5,
            active_tasks: 0,
            idle_tasks: 0,
            deferred: 0,
            selected: (0..n as u32).map(hyperlocal::model::WorkerId).collect(),
            covered: vec![],
            runtime_ms: 0.0,
        });
    }
    assert_eq!(derive_workload_baseline(&history, 4, 8).unwrap().per_period(), &[3, 1, 0, 4]);
    assert_eq!(derive_workload_baseline(&history, 4, 16).unwrap().per_period(), &[6, 2, 0, 8]);
    assert!(derive_workload_baseline(&history, 5, 8).is_err());
}

#[test]
fn adapt_degenerate_tables() {
    for seed in 0..20 {
        let inst = random_instance(seed, 3, 6, 25, 10);
        let k = 6;
        let base = allocate_equal(k, 3);
        let local = LocalHeuristic::default();
        let none = run_adapt(&inst, k, local, &eps([1.0; 4]), &base, seed, &opts()).unwrap();
        assert_eq!(none.coverage(), 0);
        assert_eq!(none.budget_used(), 0);
        let all = run_adapt(&inst, k, local, &eps([0.0; 4]), &base, seed, &opts()).unwrap();
        let naive = run_naive(&inst, k, local, &opts()).unwrap();
        assert_eq!(all.selections(), naive.selections());
        assert_eq!(all.periods.iter().map(|p| &p.selected).collect::<Vec<_>>(),
                   naive.periods.iter().map(|p| &p.selected).collect::<Vec<_>>());
    }
}

#[test]
fn budget_is_never_exceeded() {
    for seed in 0..30 {
        let inst = random_instance(seed, 4, 8, 40, 12);
        for k in [0, 1, 3, 7, 20] {
            let local = LocalHeuristic::new(Heuristic::Temporal, Default::default());
            let base = allocate_random(k, 4, seed);
            for rule in [MeanGainRule::Smoothed, MeanGainRule::Running] {
                let cfg = AdaptConfig {
                    mean_rule: rule,
                    ..AdaptConfig::default()
                };
                let r = run_adapt(&inst, k, local, &cfg, &base, seed, &opts()).unwrap();
                assert!(r.budget_used() <= k);
                assert_eq!(r.ledger.total() as usize, r.budget_used());
            }
            let moo = AdaptConfig {
                gain: GainModel::Overload { alpha: 0.3 },
                ..AdaptConfig::default()
            };
            assert!(run_adapt(&inst, k, local, &moo, &base, seed, &opts()).unwrap().budget_used() <= k);
            assert!(run_naive(&inst, k, local, &opts()).unwrap().budget_used() <= k);
            let fixed = run_fixed(&inst, &base, local, &opts()).unwrap();
            for (used, plan) in fixed.per_period_counts().iter().zip(base.per_period()) {
                assert!(used <= plan);
            }
        }
    }
}

#[test]
fn adapt_following_the_baseline_reproduces_equal_when_fully_spent() {
    let mut checked = 0;
    for seed in 0..40 {
        let inst = random_instance(seed, 3, 8, 60, 10);
        let k = 3;
        let base = allocate_equal(k, 3);
        let local = LocalHeuristic::default();
        let fixed = run_fixed(&inst, &base, local, &opts()).unwrap();
        if fixed.per_period_counts() != base.per_period() {
            // The identity needs every period to spend its full share.
            continue;
        }
        let cfg = AdaptConfig {
            eps: EpsilonTable::follow_baseline(),
            ..AdaptConfig::default()
        };
        let adapt = run_adapt(&inst, k, local, &cfg, &base, seed, &opts()).unwrap();
        assert_eq!(adapt.selections(), fixed.selections(), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} instances spent their full plan");
}

#[test]
fn final_period_spends_remaining_budget() {
    // A zero baseline stops every period but the last, where the remaining
    // budget counts as under-utilized and is spent.
    for seed in 0..10 {
        let inst = random_instance(seed, 3, 8, 60, 10);
        let base = hyperlocal::budget::BudgetPlan::new(vec![0, 0, 4]);
        let cfg = AdaptConfig {
            eps: EpsilonTable::follow_baseline(),
            ..AdaptConfig::default()
        };
        let r = run_adapt(&inst, 4, LocalHeuristic::default(), &cfg, &base, seed, &opts()).unwrap();
        let fixed = run_fixed(&inst, &base, LocalHeuristic::default(), &opts()).unwrap();
        assert_eq!(r.per_period_counts()[..2], [0, 0]);
        assert_eq!(r.coverage(), fixed.coverage());
    }
}

#[test]
fn naive_exhausts_budget_early_on_cosine_workloads() {
    for seed in 0..20 {
        let inst = generate_campaign(&cosine_suite_config(seed)).unwrap();
        let k = 28 * 20 / 4;
        let r = run_naive(&inst, k, LocalHeuristic::default(), &opts()).unwrap();
        let half = r.budget_trace[28 / 2 - 1];
        assert_eq!(half, k, "seed {seed}: {half} of {k} spent by Q/2");
    }
}

#[test]
fn workload_baseline_follows_arrival_peaks() {
    let mut corr_sum = 0.0;
    for seed in 0..20 {
        let inst = generate_campaign(&cosine_suite_config(seed)).unwrap();
        let graph = CampaignBipartiteGraph::build(&inst);
        let k = 140;
        let sol = greedy_dmtc(&graph, k);
        let plan = derive_workload_baseline(&sol.to_result(&graph), 28, k).unwrap();
        let x: Vec<f64> = plan.per_period().iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = inst.worker_counts().iter().map(|&v| v as f64).collect();
        let c = pearson(&x, &y);
        assert!(c > 0.0, "seed {seed}: correlation {c}");
        corr_sum += c;
    }
    assert!(corr_sum / 20.0 > 0.0);
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
