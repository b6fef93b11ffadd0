#![allow(dead_code)]

use std::collections::BTreeSet;

use hyperlocal::instance_file::parse_instance;
use hyperlocal::model::{Area, CampaignInstance, Point, TaskId, TaskSpec, WorkerArrival, WorkerId};
use hyperlocal::workload::{ArrivalModel, GeneratorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two periods, two workers, six tasks given as explicit coverage sets:
/// period 1: w1 → {1,2,3}, w2 → {1,4,5,6}; period 2: w1 → {5,6}.
pub const TOY_EXPLICIT: &str = "\
Q 2 AREA 0 0 20 20
T 1 0 0 1 1 2
T 2 0 0 1 1 2
T 3 0 0 1 1 2
T 4 0 0 1 1 2
T 5 0 0 1 1 2
T 6 0 0 1 1 2
C 1 1 1 2 3
C 1 2 1 4 5 6
C 2 1 5 6
";

/// The same coverage realized by coordinates.
pub const TOY_GEOMETRIC: &str = "\
Q 2 AREA -5 -5 20 5
T 1 5 0 5 1 2
T 2 0 1 1.5 1 2
T 3 0 -1 1.5 1 2
T 4 10 1 1.5 1 2
T 5 11 0 1.5 1 2
T 6 10 -1 1.5 1 2
W 1 1 0 0
W 2 1 10 0
W 1 2 10.5 -0.5
";

pub fn toy_explicit() -> CampaignInstance {
    parse_instance(TOY_EXPLICIT).unwrap()
}

pub fn toy_geometric() -> CampaignInstance {
    parse_instance(TOY_GEOMETRIC).unwrap()
}

pub fn ids(v: &[u32]) -> BTreeSet<TaskId> {
    v.iter().map(|&i| TaskId(i)).collect()
}

/// Small geometric campaign: `workers` arrivals per period drawn from a pool
/// of `pool` identities, `tasks` tasks over all periods.
pub fn random_instance(seed: u64, q: u32, workers: usize, tasks: usize, pool: usize) -> CampaignInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = Area::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let point = |rng: &mut ChaCha8Rng| Point::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
    let mut arrivals = Vec::new();
    for period in 1..=q {
        let mut ids: Vec<usize> = rand::seq::index::sample(&mut rng, pool, workers.min(pool)).into_vec();
        ids.sort_unstable();
        for id in ids {
            arrivals.push(WorkerArrival {
                worker: WorkerId(id as u32 + 1),
                period,
                location: point(&mut rng),
            });
        }
    }
    let specs = (0..tasks)
        .map(|i| TaskSpec {
            id: TaskId(i as u32 + 1),
            location: point(&mut rng),
            radius: rng.random_range(1.0..4.0),
            release: rng.random_range(1..=q),
            duration: rng.random_range(1..=q),
        })
        .collect();
    CampaignInstance::new(q, area, specs, arrivals, None).unwrap()
}

/// The 20-campaign suite: cosine arrivals μ=20, Q=28, 200 tasks per period.
pub fn cosine_suite_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        periods: 28,
        arrivals: ArrivalModel::Cosine {
            mean: 20.0,
            amplitude: 0.5,
            wavelength: None,
        },
        tasks_per_period: 200,
        radius_choices: vec![5.0],
        area: Area::new(0.0, 0.0, 100.0, 100.0).unwrap(),
        ..GeneratorConfig::default()
    }
}

/// Maximum coverage over all subsets of at most `k` of the given sets,
/// by bitmask enumeration.
pub fn brute_max_coverage(sets: &[BTreeSet<TaskId>], k: usize) -> usize {
    let n = sets.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let mut union = BTreeSet::new();
        for (i, s) in sets.iter().enumerate() {
            if mask >> i & 1 == 1 {
                union.extend(s.iter().copied());
            }
        }
        best = best.max(union.len());
    }
    best
}
