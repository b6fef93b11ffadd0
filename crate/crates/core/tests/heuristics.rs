mod common;

use std::collections::BTreeSet;

use common::{brute_max_coverage, random_instance, toy_explicit};
use hyperlocal::heuristics::{
    greedy_select, task_utility, worker_priority, GreedyState, Heuristic, PriorityModel, UtilityModel,
};
use hyperlocal::model::{advance_period, compute_coverage, CampaignInstance, CoverageInstanceSet, PeriodSnapshot, TaskId};
use proptest::prelude::*;

fn first_period(inst: &CampaignInstance) -> (PeriodSnapshot, CoverageInstanceSet) {
    let table = inst.task_table();
    let snap = advance_period(&[], &inst.released_in(1), inst.arrivals_in(1).to_vec(), 1, &table).unwrap();
    let cov = compute_coverage(&snap, &table).unwrap();
    (snap, cov)
}

fn sets(cov: &CoverageInstanceSet) -> Vec<BTreeSet<TaskId>> {
    cov.coverage.values().map(|m| m.keys().copied().collect()).collect()
}

#[test]
fn toy_period_one_priorities() {
    let inst = toy_explicit();
    let (snap, cov) = first_period(&inst);
    let table = inst.task_table();
    let r: BTreeSet<TaskId> = snap.active_tasks.iter().copied().collect();
    let m = PriorityModel::basic();
    let p1 = worker_priority(&m, hyperlocal::model::WorkerId(1), &cov, &r, 1, &table).unwrap();
    let p2 = worker_priority(&m, hyperlocal::model::WorkerId(2), &cov, &r, 1, &table).unwrap();
    assert_eq!((p1, p2), (3.0, 4.0));
}

#[test]
fn unconstrained_budget_reaches_union() {
    for seed in 0..30 {
        let inst = random_instance(seed, 1, 8, 20, 8);
        let (snap, cov) = first_period(&inst);
        let table = inst.task_table();
        let out = greedy_select(&cov, &snap.active_tasks, 100, &PriorityModel::basic(), 1, &table).unwrap();
        let union: BTreeSet<TaskId> = sets(&cov).into_iter().flatten().collect();
        assert_eq!(out.coverage(), union.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_within_bound_of_optimum(seed in any::<u64>(), workers in 1usize..=8, tasks in 1usize..=20, k in 1usize..=4) {
        let inst = random_instance(seed, 1, workers, tasks, 8);
        let (snap, cov) = first_period(&inst);
        let table = inst.task_table();
        let out = greedy_select(&cov, &snap.active_tasks, k, &PriorityModel::basic(), 1, &table).unwrap();
        let opt = brute_max_coverage(&sets(&cov), k);
        prop_assert!(out.coverage() as f64 >= (1.0 - 1.0 / std::f64::consts::E) * opt as f64);
        prop_assert!(out.coverage() <= opt);
    }

    #[test]
    fn marginal_gains_never_increase(seed in any::<u64>(), heuristic in 0usize..2, utility in 0usize..3) {
        let inst = random_instance(seed, 2, 8, 20, 8);
        let (snap, cov) = first_period(&inst);
        let table = inst.task_table();
        let h = [Heuristic::Basic, Heuristic::Temporal][heuristic];
        let u = [UtilityModel::Binary, UtilityModel::Linear, UtilityModel::zipf(1.0)][utility];
        let model = PriorityModel::new(h, u, None).unwrap();
        let mut state = GreedyState::new(&cov, &snap.active_tasks, &model, 1, &table).unwrap();
        let mut last = f64::INFINITY;
        let mut first = None;
        while let Some(c) = state.best() {
            prop_assert!(c.priority <= last + 1e-12);
            last = c.priority;
            first.get_or_insert(c.priority);
            state.accept(c.slot);
        }
        // The first pick is the best single worker under the selected utility.
        let total: f64 = state.outcome().covered.values().map(|(_, u)| u).sum();
        if let (Heuristic::Basic, Some(f)) = (h, first) {
            prop_assert!(total + 1e-12 >= f);
        }
    }

    #[test]
    fn basic_binary_priority_counts_residual(seed in any::<u64>()) {
        let inst = random_instance(seed, 1, 6, 20, 6);
        let (snap, cov) = first_period(&inst);
        let table = inst.task_table();
        let residual: BTreeSet<TaskId> = snap.active_tasks.iter().copied().filter(|t| t.0 % 2 == 0).collect();
        for (w, tasks) in &cov.coverage {
            let p = worker_priority(&PriorityModel::basic(), *w, &cov, &residual, 1, &table).unwrap();
            let n = tasks.keys().filter(|t| residual.contains(t)).count();
            prop_assert_eq!(p, n as f64);
        }
    }

    #[test]
    fn utilities_are_monotone_in_distance(r in 0.1f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (near, far) = if a <= b { (a * r, b * r) } else { (b * r, a * r) };
        for m in [UtilityModel::Binary, UtilityModel::Linear, UtilityModel::zipf(1.0), UtilityModel::zipf(2.5)] {
            let un = task_utility(&m, near, r).unwrap();
            let uf = task_utility(&m, far, r).unwrap();
            prop_assert!((0.0..=1.0).contains(&un) && (0.0..=1.0).contains(&uf));
            prop_assert!(un >= uf);
            prop_assert_eq!(task_utility(&m, r * 1.0001 + 1e-9, r).unwrap(), 0.0);
        }
    }
}

#[test]
fn utility_endpoints() {
    assert_eq!(task_utility(&UtilityModel::Linear, 0.0, 2.0).unwrap(), 1.0);
    assert_eq!(task_utility(&UtilityModel::Linear, 2.0, 2.0).unwrap(), 0.0);
    assert_eq!(task_utility(&UtilityModel::Binary, 2.0, 2.0).unwrap(), 1.0);
    assert_eq!(task_utility(&UtilityModel::zipf(1.0), 0.0, 2.0).unwrap(), 1.0);
    assert_eq!(task_utility(&UtilityModel::zipf(1.0), 0.5, 2.0).unwrap(), 1.0 / 3.0);
}
