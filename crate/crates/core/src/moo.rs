//! Worker-overload accounting and the two-objective selection variants:
//! NSGA-II per period for fixed budgets and the penalized gain used by the
//! adaptive allocator for a campaign budget.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::SelectionOutcome;
use crate::model::{CoverageInstanceSet, TaskId, WorkerId};

/// Cumulative activation count per worker identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationLedger {
    counts: BTreeMap<WorkerId, u32>,
}

impl ActivationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, worker: WorkerId) -> u32 {
        self.counts.get(&worker).copied().unwrap_or(0)
    }

    pub fn record(&mut self, worker: WorkerId) {
        *self.counts.entry(worker).or_insert(0) += 1;
    }

    pub fn record_all<'a>(&mut self, workers: impl IntoIterator<Item = &'a WorkerId>) {
        for &w in workers {
            self.record(w);
        }
    }

    pub fn set(&mut self, worker: WorkerId, count: u32) {
        if count == 0 {
            self.counts.remove(&worker);
        } else {
            self.counts.insert(worker, count);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (WorkerId, u32)> + '_ {
        self.counts.iter().map(|(&w, &c)| (w, c))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn max(&self) -> u32 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Mean count over workers activated at least once.
    pub fn mean_active(&self) -> f64 {
        if self.counts.is_empty() {
            0.0
        } else {
            self.total() as f64 / self.counts.len() as f64
        }
    }

    /// activation count → number of workers with that count.
    pub fn histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for &c in self.counts.values() {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }
}

/// Overload-penalized gain: `α·priority/|T_i| − (1−α)·count(w)/Q`.
pub fn moo_gain(
    priority: f64,
    worker: WorkerId,
    ledger: &ActivationLedger,
    alpha: f64,
    tasks_in_period: usize,
    periods: u32,
) -> f64 {
    debug_assert!(tasks_in_period > 0 && periods > 0);
    alpha * priority / tasks_in_period as f64 - (1.0 - alpha) * ledger.count(worker) as f64 / periods as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsgaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / |W_i|`.
    pub mutation_rate: Option<f64>,
    /// Weight of coverage in the final scalarization.
    pub alpha: f64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        NsgaConfig {
            population_size: 100,
            max_generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            alpha: 0.1,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if self.population_size < 2 {
            return Err(Error::Configuration("nsga population must be at least 2".into()));
        }
        if self.max_generations == 0 {
            return Err(Error::Configuration("nsga needs at least one generation".into()));
        }
        if !rate_ok(self.crossover_rate) || !self.mutation_rate.is_none_or(rate_ok) {
            return Err(Error::Configuration("nsga rates must lie in [0, 1]".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Configuration(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The two objectives: maximize coverage, minimize the highest activation
/// count among selected workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Objectives {
    pub coverage: usize,
    pub max_activation: u32,
}

impl Objectives {
    pub fn dominates(&self, other: &Objectives) -> bool {
        self.coverage >= other.coverage
            && self.max_activation <= other.max_activation
            && (self.coverage > other.coverage || self.max_activation < other.max_activation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: Vec<bool>,
    pub objectives: Objectives,
}

/// Crowding distance of each member of `front` (same order as `front`).
pub fn crowding_distance(objs: &[Objectives], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        return dist;
    }
    let axes: [fn(&Objectives) -> f64; 2] = [|o| o.coverage as f64, |o| o.max_activation as f64];
    for value in axes {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(&objs[front[a]]).total_cmp(&value(&objs[front[b]])).then(a.cmp(&b)));
        let lo = value(&objs[front[order[0]]]);
        let hi = value(&objs[front[order[n - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for k in 1..n - 1 {
                let gap = value(&objs[front[order[k + 1]]]) - value(&objs[front[order[k - 1]]]);
                dist[order[k]] += gap / (hi - lo);
            }
        }
    }
    dist
}

/// Partitions `objs` into nondominated fronts. Each front is ordered by
/// crowding distance, descending, ties by index.
pub fn nondominated_sort(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..objs.len()).collect();
    order.sort_by(|&a, &b| {
        objs[b]
            .coverage
            .cmp(&objs[a].coverage)
            .then(objs[a].max_activation.cmp(&objs[b].max_activation))
            .then(a.cmp(&b))
    });

    // In this order nothing processed later can dominate an earlier point, so
    // each front is summarized by its lowest max_activation and the largest
    // coverage seen at that value.
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut summary: Vec<(u32, usize)> = Vec::new();
    for i in order {
        let p = objs[i];
        let k = summary
            .iter()
            .position(|&(min_act, cov)| !(min_act < p.max_activation || (min_act == p.max_activation && cov > p.coverage)))
            .unwrap_or(fronts.len());
        if k == fronts.len() {
            fronts.push(Vec::new());
            summary.push((p.max_activation, p.coverage));
        } else if p.max_activation < summary[k].0 {
            summary[k] = (p.max_activation, p.coverage);
        }
        fronts[k].push(i);
    }

    for front in &mut fronts {
        let d = crowding_distance(objs, front);
        let mut paired: Vec<(usize, f64)> = front.iter().copied().zip(d).collect();
        paired.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        *front = paired.into_iter().map(|(i, _)| i).collect();
    }
    fronts
}

struct Problem {
    workers: Vec<WorkerId>,
    sets: Vec<Vec<u64>>,
    members: Vec<Vec<u32>>,
    prior: Vec<u32>,
    words: usize,
    num_tasks: usize,
    budget: usize,
}

impl Problem {
    fn evaluate(&self, genome: &[bool], scratch: &mut Vec<u64>) -> Objectives {
        scratch.clear();
        scratch.resize(self.words, 0);
        let mut max_activation = 0;
        for (j, _) in genome.iter().enumerate().filter(|(_, &b)| b) {
            for (acc, w) in scratch.iter_mut().zip(&self.sets[j]) {
                *acc |= w;
            }
            max_activation = max_activation.max(self.prior[j] + 1);
        }
        Objectives {
            coverage: scratch.iter().map(|w| w.count_ones() as usize).sum(),
            max_activation,
        }
    }

    /// Clears lowest-marginal-gain bits until the genome fits the budget.
    fn repair(&self, genome: &mut [bool]) {
        let mut selected = genome.iter().filter(|&&b| b).count();
        if selected <= self.budget {
            return;
        }
        let mut multiplicity = vec![0u32; self.num_tasks];
        for (j, _) in genome.iter().enumerate().filter(|(_, &b)| b) {
            for &t in &self.members[j] {
                multiplicity[t as usize] += 1;
            }
        }
        while selected > self.budget {
            let victim = genome
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(j, _)| {
                    let marginal = self.members[j].iter().filter(|&&t| multiplicity[t as usize] == 1).count();
                    (j, marginal)
                })
                .min_by(|a, b| {
                    a.1.cmp(&b.1)
                        .then(self.prior[b.0].cmp(&self.prior[a.0]))
                        .then(b.0.cmp(&a.0))
                })
                .map(|(j, _)| j)
                .expect("over budget implies a selected bit");
            genome[victim] = false;
            for &t in &self.members[victim] {
                multiplicity[t as usize] -= 1;
            }
            selected -= 1;
        }
    }
}

fn scalarize(o: &Objectives, alpha: f64, num_tasks: usize, periods: u32) -> f64 {
    alpha * o.coverage as f64 / num_tasks as f64 - (1.0 - alpha) * o.max_activation as f64 / periods as f64
}

struct Evolved {
    problem: Problem,
    task_ids: Vec<TaskId>,
    population: Vec<Individual>,
}

fn evolve(
    coverage: &CoverageInstanceSet,
    active: &[TaskId],
    budget: usize,
    ledger: &ActivationLedger,
    cfg: &NsgaConfig,
    seed: u64,
) -> Result<Evolved> {
    cfg.validate()?;
    let mut task_ids = active.to_vec();
    task_ids.sort_unstable();
    task_ids.dedup();
    let slot_of: BTreeMap<TaskId, u32> = task_ids.iter().enumerate().map(|(i, &t)| (t, i as u32)).collect();
    let words = task_ids.len().div_ceil(64);

    let mut problem = Problem {
        workers: Vec::new(),
        sets: Vec::new(),
        members: Vec::new(),
        prior: Vec::new(),
        words,
        num_tasks: task_ids.len(),
        budget: budget.min(coverage.coverage.len()),
    };
    for (&w, tasks) in &coverage.coverage {
        let members: Vec<u32> = tasks.keys().filter_map(|t| slot_of.get(t).copied()).collect();
        let mut bits = vec![0u64; words];
        for &t in &members {
            bits[t as usize / 64] |= 1 << (t % 64);
        }
        problem.workers.push(w);
        problem.sets.push(bits);
        problem.members.push(members);
        problem.prior.push(ledger.count(w));
    }

    let n_workers = problem.workers.len();
    if n_workers == 0 || problem.budget == 0 || task_ids.is_empty() {
        return Ok(Evolved {
            problem,
            task_ids,
            population: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop_size = cfg.population_size;
    let mutation = cfg.mutation_rate.unwrap_or(1.0 / n_workers as f64);
    let mut scratch = Vec::with_capacity(words);

    let mut population: Vec<Individual> = (0..pop_size)
        .map(|_| {
            let size = rng.random_range(1..=problem.budget);
            let mut genome = vec![false; n_workers];
            for j in sample(&mut rng, n_workers, size) {
                genome[j] = true;
            }
            let objectives = problem.evaluate(&genome, &mut scratch);
            Individual { genome, objectives }
        })
        .collect();

    for _ in 0..cfg.max_generations {
        let objs: Vec<Objectives> = population.iter().map(|i| i.objectives).collect();
        let fronts = nondominated_sort(&objs);
        // Rank and crowding position per individual for tournaments.
        let mut rank = vec![(0usize, 0usize); pop_size];
        for (r, front) in fronts.iter().enumerate() {
            for (pos, &i) in front.iter().enumerate() {
                rank[i] = (r, pos);
            }
        }
        let tournament = |rng: &mut ChaCha8Rng| {
            let a = rng.random_range(0..pop_size);
            let b = rng.random_range(0..pop_size);
            if rank[a] <= rank[b] {
                a
            } else {
                b
            }
        };

        let mut offspring = Vec::with_capacity(pop_size);
        while offspring.len() < pop_size {
            let pa = tournament(&mut rng);
            let pb = tournament(&mut rng);
            let (mut ca, mut cb) = (population[pa].genome.clone(), population[pb].genome.clone());
            if rng.random::<f64>() < cfg.crossover_rate {
                for j in 0..n_workers {
                    if rng.random::<bool>() {
                        std::mem::swap(&mut ca[j], &mut cb[j]);
                    }
                }
            }
            for child in [ca, cb] {
                if offspring.len() == pop_size {
                    break;
                }
                let mut child = child;
                for bit in child.iter_mut() {
                    if rng.random::<f64>() < mutation {
                        *bit = !*bit;
                    }
                }
                problem.repair(&mut child);
                let objectives = problem.evaluate(&child, &mut scratch);
                offspring.push(Individual {
                    genome: child,
                    objectives,
                });
            }
        }

        population.extend(offspring);
        let objs: Vec<Objectives> = population.iter().map(|i| i.objectives).collect();
        let mut keep = Vec::with_capacity(pop_size);
        for front in nondominated_sort(&objs) {
            let take = front.len().min(pop_size - keep.len());
            keep.extend_from_slice(&front[..take]);
            if keep.len() == pop_size {
                break;
            }
        }
        keep.sort_unstable();
        let mut merged: Vec<Option<Individual>> = population.into_iter().map(Some).collect();
        population = keep.into_iter().map(|i| merged[i].take().expect("kept once")).collect();
    }
    Ok(Evolved {
        problem,
        task_ids,
        population,
    })
}

/// NSGA-II search over budget-feasible worker subsets of one period, returning
/// the individual with the best weighted score.
pub fn nsga_select(
    coverage: &CoverageInstanceSet,
    active: &[TaskId],
    budget: usize,
    ledger: &ActivationLedger,
    cfg: &NsgaConfig,
    num_periods: u32,
    seed: u64,
) -> Result<SelectionOutcome> {
    let Evolved {
        problem,
        task_ids,
        population,
    } = evolve(coverage, active, budget, ledger, cfg, seed)?;
    let mut outcome = SelectionOutcome::empty(&task_ids);
    let popcount = |g: &[bool]| g.iter().filter(|&&b| b).count();
    let Some(best) = population
        .iter()
        .max_by(|a, b| {
            let sa = scalarize(&a.objectives, cfg.alpha, task_ids.len(), num_periods);
            let sb = scalarize(&b.objectives, cfg.alpha, task_ids.len(), num_periods);
            sa.total_cmp(&sb)
                .then(popcount(&b.genome).cmp(&popcount(&a.genome)))
                .then(b.genome.cmp(&a.genome))
        })
    else {
        return Ok(outcome);
    };
    for (j, _) in best.genome.iter().enumerate().filter(|(_, &b)| b) {
        let worker = problem.workers[j];
        outcome.selected.push(worker);
        for &t in &problem.members[j] {
            let id = task_ids[t as usize];
            if outcome.residual_uncovered.remove(&id) {
                outcome.covered.insert(id, (worker, 1.0));
            }
        }
    }
    Ok(outcome)
}

/// First nondominated front of the final NSGA-II population, as selected
/// workers with their objectives. Duplicate genomes are reported once.
pub fn nsga_front(
    coverage: &CoverageInstanceSet,
    active: &[TaskId],
    budget: usize,
    ledger: &ActivationLedger,
    cfg: &NsgaConfig,
    seed: u64,
) -> Result<Vec<(Vec<WorkerId>, Objectives)>> {
    let ev = evolve(coverage, active, budget, ledger, cfg, seed)?;
    let objs: Vec<Objectives> = ev.population.iter().map(|i| i.objectives).collect();
    let mut front: Vec<(Vec<WorkerId>, Objectives)> = nondominated_sort(&objs)
        .into_iter()
        .next()
        .unwrap_or_default()
        .into_iter()
        .map(|i| {
            let ind = &ev.population[i];
            let workers = ind
                .genome
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(j, _)| ev.problem.workers[j])
                .collect();
            (workers, ind.objectives)
        })
        .collect();
    front.sort();
    front.dedup();
    Ok(front)
}
