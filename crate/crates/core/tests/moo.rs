mod common;

use std::collections::BTreeSet;

use common::{brute_max_coverage, random_instance};
use hyperlocal::model::{advance_period, compute_coverage, CoverageInstanceSet, TaskId, WorkerId};
use hyperlocal::moo::{nondominated_sort, nsga_front, nsga_select, ActivationLedger, NsgaConfig, Objectives};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn period_one(seed: u64, workers: usize, tasks: usize) -> (CoverageInstanceSet, Vec<TaskId>) {
    let inst = random_instance(seed, 1, workers, tasks, 8);
    let table = inst.task_table();
    let snap = advance_period(&[], &inst.released_in(1), inst.arrivals_in(1).to_vec(), 1, &table).unwrap();
    let cov = compute_coverage(&snap, &table).unwrap();
    (cov, snap.active_tasks)
}

fn sets(cov: &CoverageInstanceSet) -> Vec<BTreeSet<TaskId>> {
    cov.coverage.values().map(|m| m.keys().copied().collect()).collect()
}

fn objectives_of(cov: &CoverageInstanceSet, ledger: &ActivationLedger, selected: &[WorkerId]) -> Objectives {
    let union: BTreeSet<TaskId> = selected.iter().flat_map(|w| cov.tasks_of(*w)).collect();
    Objectives {
        coverage: union.len(),
        max_activation: selected.iter().map(|w| ledger.count(*w) + 1).max().unwrap_or(0),
    }
}

fn o(coverage: usize, max_activation: u32) -> Objectives {
    Objectives {
        coverage,
        max_activation,
    }
}

proptest! {
    #[test]
    fn fronts_match_quadratic_definition(points in prop::collection::vec((0usize..12, 0u32..6), 1..40)) {
        let objs: Vec<Objectives> = points.iter().map(|&(c, a)| o(c, a)).collect();
        let fronts = nondominated_sort(&objs);
        let mut seen: Vec<usize> = fronts.iter().flatten().copied().collect();
        seen.sort();
        prop_assert_eq!(seen, (0..objs.len()).collect::<Vec<_>>());
        // Peel fronts by brute force and compare as sets.
        let mut left: BTreeSet<usize> = (0..objs.len()).collect();
        for front in &fronts {
            let expected: BTreeSet<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| objs[j].dominates(&objs[i])))
                .collect();
            let got: BTreeSet<usize> = front.iter().copied().collect();
            prop_assert_eq!(&got, &expected);
            left.retain(|i| !expected.contains(i));
        }
        prop_assert!(left.is_empty());
    }
}

#[test]
fn final_fronts_pass_brute_force_checks() {
    let cfg = NsgaConfig {
        population_size: 40,
        max_generations: 60,
        alpha: 0.5,
        ..Default::default()
    };
    for seed in 0..40 {
        let (cov, active) = period_one(seed, 7, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledger = ActivationLedger::new();
        for w in cov.workers() {
            ledger.set(w, rng.random_range(0..4));
        }
        let budget = 3;
        let front = nsga_front(&cov, &active, budget, &ledger, &cfg, seed).unwrap();
        for (workers, obj) in &front {
            assert!(workers.len() <= budget);
            assert_eq!(objectives_of(&cov, &ledger, workers), *obj, "seed {seed}");
        }
        for (_, a) in &front {
            assert!(!front.iter().any(|(_, b)| b.dominates(a)), "seed {seed}");
        }
        // Every reported point is attainable by some feasible subset.
        let workers: Vec<WorkerId> = cov.workers().collect();
        let attainable: BTreeSet<Objectives> = (0u32..1 << workers.len())
            .filter(|m| m.count_ones() as usize <= budget)
            .map(|m| {
                let pick: Vec<WorkerId> = (0..workers.len()).filter(|i| m >> i & 1 == 1).map(|i| workers[i]).collect();
                objectives_of(&cov, &ledger, &pick)
            })
            .collect();
        assert!(front.iter().all(|(_, a)| attainable.contains(a)), "seed {seed}");
    }
}

#[test]
fn selections_respect_budget_and_credit_once() {
    let cfg = NsgaConfig {
        population_size: 30,
        max_generations: 30,
        ..Default::default()
    };
    for seed in 0..30 {
        let (cov, active) = period_one(100 + seed, 8, 20);
        for budget in [0, 1, 2, 5] {
            let out = nsga_select(&cov, &active, budget, &ActivationLedger::new(), &cfg, 10, seed).unwrap();
            assert!(out.selected.len() <= budget);
            let union: BTreeSet<TaskId> = out.selected.iter().flat_map(|w| cov.tasks_of(*w)).collect();
            assert_eq!(out.coverage(), union.len());
            assert_eq!(out.coverage() + out.residual_uncovered.len(), active.len());
        }
    }
}

#[test]
fn coverage_weight_near_one_finds_the_optimum() {
    let cfg = NsgaConfig {
        population_size: 100,
        max_generations: 300,
        alpha: 0.999,
        ..Default::default()
    };
    let mut hits = 0;
    let trials = 30;
    for seed in 0..trials {
        let (cov, active) = period_one(300 + seed, 8, 20);
        let k = 2 + seed as usize % 3;
        let out = nsga_select(&cov, &active, k, &ActivationLedger::new(), &cfg, 28, seed).unwrap();
        if out.coverage() == brute_max_coverage(&sets(&cov), k) {
            hits += 1;
        }
    }
    assert!(hits >= trials - 1, "{hits} of {trials}");
}

#[test]
fn same_seed_same_selection() {
    let (cov, active) = period_one(9, 8, 20);
    let cfg = NsgaConfig::default();
    let a = nsga_select(&cov, &active, 3, &ActivationLedger::new(), &cfg, 28, 5).unwrap();
    let b = nsga_select(&cov, &active, 3, &ActivationLedger::new(), &cfg, 28, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ledger_statistics() {
    let mut ledger = ActivationLedger::new();
    ledger.record_all(&[WorkerId(1), WorkerId(2), WorkerId(1)]);
    assert_eq!(ledger.max(), 2);
    assert_eq!(ledger.total(), 3);
    assert_eq!(ledger.mean_active(), 1.5);
    assert_eq!(ledger.histogram().into_iter().collect::<Vec<_>>(), vec![(1, 1), (2, 1)]);
}
