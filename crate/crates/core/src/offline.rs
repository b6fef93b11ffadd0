//! Clairvoyant solvers over the whole campaign.
//!
//! Every `(worker, period)` arrival becomes a node whose coverage set holds
//! all tasks it could answer in that period. Selections are scored by the
//! size of the union of their coverage sets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::campaign::{CampaignResult, Credit, PeriodRecord};
use crate::error::{Error, Result};
use crate::model::{CampaignInstance, TaskId, WorkerId};
use crate::moo::ActivationLedger;
use crate::spatial::GridIndex;

/// Default bound on the number of combinations an exhaustive solver visits.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// Fixed-width task bitset.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaskSet {
    words: Vec<u64>,
}

impl TaskSet {
    pub fn new(len: usize) -> Self {
        TaskSet {
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &TaskSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// `|other \ self|`
    pub fn gain(&self, other: &TaskSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (b & !a).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| wi * 64 + b)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkerNode {
    pub period: u32,
    pub worker: WorkerId,
    pub covers: TaskSet,
}

/// Bipartite graph of all `(worker, period)` nodes against all tasks.
#[derive(Clone, Debug)]
pub struct CampaignBipartiteGraph {
    num_periods: u32,
    tasks: Vec<TaskId>,
    nodes: Vec<WorkerNode>,
}

impl CampaignBipartiteGraph {
    pub fn build(instance: &CampaignInstance) -> Self {
        let table = instance.task_table();
        let specs = instance.tasks();
        let tasks: Vec<TaskId> = specs.iter().map(|t| t.id).collect();
        let index = GridIndex::build(
            table.max_radius().max(1e-9),
            specs.iter().enumerate().map(|(i, t)| (i, t.location)),
        );
        let mut nodes = Vec::with_capacity(instance.arrivals().len());
        let mut candidates = Vec::new();
        for arrival in instance.arrivals() {
            let mut covers = TaskSet::new(tasks.len());
            candidates.clear();
            if table.is_explicit() {
                candidates.extend(0..specs.len());
            } else {
                index.query_disk_into(&arrival.location, table.max_radius(), &mut candidates);
            }
            for &i in &candidates {
                if table.eligibility(arrival, &specs[i]).is_some() {
                    covers.insert(i);
                }
            }
            nodes.push(WorkerNode {
                period: arrival.period,
                worker: arrival.worker,
                covers,
            });
        }
        nodes.sort_by_key(|n| (n.period, n.worker));
        CampaignBipartiteGraph {
            num_periods: instance.num_periods(),
            tasks,
            nodes,
        }
    }

    pub fn num_periods(&self) -> u32 {
        self.num_periods
    }

    pub fn nodes(&self) -> &[WorkerNode] {
        &self.nodes
    }

    pub fn tasks(&self) -> &[TaskId] {
        &self.tasks
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.covers.len()).sum()
    }

    /// Node index of `(period, worker)`.
    pub fn node(&self, period: u32, worker: WorkerId) -> Option<usize> {
        self.nodes.binary_search_by_key(&(period, worker), |n| (n.period, n.worker)).ok()
    }

    /// Size of the union of the given nodes' coverage sets.
    pub fn coverage_of(&self, selection: &[usize]) -> usize {
        let mut acc = TaskSet::new(self.tasks.len());
        for &i in selection {
            acc.union_with(&self.nodes[i].covers);
        }
        acc.len()
    }

    fn nodes_by_period(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_periods as usize];
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.covers.is_empty() {
                out[n.period as usize - 1].push(i);
            }
        }
        out
    }
}

/// Selection returned by an offline solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    /// Node indices in selection order.
    pub selected: Vec<usize>,
    pub coverage: usize,
    /// Marginal gain of each pick (greedy solvers only).
    pub gains: Vec<usize>,
}

impl OfflineSolution {
    pub fn per_period_counts(&self, graph: &CampaignBipartiteGraph) -> Vec<usize> {
        let mut counts = vec![0; graph.num_periods as usize];
        for &i in &self.selected {
            counts[graph.nodes[i].period as usize - 1] += 1;
        }
        counts
    }

    pub fn pairs(&self, graph: &CampaignBipartiteGraph) -> Vec<(WorkerId, u32)> {
        let mut v: Vec<_> = self.selected.iter().map(|&i| (graph.nodes[i].worker, graph.nodes[i].period)).collect();
        v.sort_by_key(|&(w, p)| (p, w));
        v
    }

    /// Converts to a campaign result, crediting each task to the earliest
    /// selected node that covers it with unit utility.
    pub fn to_result(&self, graph: &CampaignBipartiteGraph) -> CampaignResult {
        let mut by_period: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in &self.selected {
            by_period.entry(graph.nodes[i].period).or_default().push(i);
        }
        let mut result = CampaignResult::default();
        let mut ledger = ActivationLedger::new();
        let mut used = 0;
        for period in 1..=graph.num_periods {
            let mut chosen = by_period.remove(&period).unwrap_or_default();
            chosen.sort_by_key(|&i| graph.nodes[i].worker);
            let mut covered = Vec::new();
            for &i in &chosen {
                let node = &graph.nodes[i];
                for t in node.covers.iter() {
                    let id = graph.tasks[t];
                    if let std::collections::btree_map::Entry::Vacant(e) = result.credits.entry(id) {
                        e.insert(Credit {
                            worker: node.worker,
                            period,
                            utility: 1.0,
                        });
                        covered.push(id);
                    }
                }
            }
            covered.sort_unstable();
            let selected: Vec<WorkerId> = chosen.iter().map(|&i| graph.nodes[i].worker).collect();
            ledger.record_all(&selected);
            used += selected.len();
            result.budget_trace.push(used);
            result.periods.push(PeriodRecord {
                period,
                workers: graph.nodes.iter().filter(|n| n.period == period).count(),
                active_tasks: 0,
                idle_tasks: 0,
                deferred: 0,
                selected,
                covered,
                runtime_ms: 0.0,
            });
        }
        result.ledger = ledger;
        result
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_cap(combinations: f64, cap: u64) -> Result<()> {
    if combinations > cap as f64 {
        Err(Error::InstanceTooLarge { combinations, cap })
    } else {
        Ok(())
    }
}

fn check_budgets(graph: &CampaignBipartiteGraph, budgets: &[usize]) -> Result<()> {
    if budgets.len() != graph.num_periods as usize {
        return Err(Error::Configuration(format!(
            "{} per-period budgets for {} periods",
            budgets.len(),
            graph.num_periods
        )));
    }
    Ok(())
}

struct Search<'a> {
    graph: &'a CampaignBipartiteGraph,
    /// One group per level: candidates and how many to pick from them.
    groups: Vec<(Vec<usize>, usize)>,
    found: bool,
    best: usize,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    /// Coverage so far, one accumulator per pick depth.
    stack: Vec<TaskSet>,
}

impl Search<'_> {
    fn run(&mut self, group: usize, start: usize, left: usize) {
        if self.found && self.best == self.graph.tasks.len() {
            return;
        }
        if left == 0 {
            if group + 1 < self.groups.len() {
                let next = self.groups[group + 1].1;
                self.run(group + 1, 0, next);
                return;
            }
            let covered = self.stack.last().map_or(0, TaskSet::len);
            if !self.found || covered > self.best {
                self.found = true;
                self.best = covered;
                self.best_pick = self.pick.clone();
            }
            return;
        }
        let n = self.groups[group].0.len();
        for j in start..=n - left {
            let node = self.groups[group].0[j];
            let mut acc = self.stack.last().cloned().unwrap_or_else(|| TaskSet::new(self.graph.tasks.len()));
            acc.union_with(&self.graph.nodes[node].covers);
            self.stack.push(acc);
            self.pick.push(node);
            self.run(group, j + 1, left - 1);
            self.pick.pop();
            self.stack.pop();
        }
    }
}

fn search(graph: &CampaignBipartiteGraph, groups: Vec<(Vec<usize>, usize)>) -> OfflineSolution {
    let mut s = Search {
        graph,
        found: false,
        best: 0,
        best_pick: Vec::new(),
        pick: Vec::new(),
        stack: Vec::new(),
        groups,
    };
    if s.groups.is_empty() {
        return OfflineSolution {
            selected: Vec::new(),
            coverage: 0,
            gains: Vec::new(),
        };
    }
    let first = s.groups[0].1;
    s.run(0, 0, first);
    OfflineSolution {
        coverage: s.best,
        selected: s.best_pick,
        gains: Vec::new(),
    }
}

/// Optimal selection with at most `budgets[i]` workers in period `i + 1`.
pub fn exhaustive_fmtc(graph: &CampaignBipartiteGraph, budgets: &[usize], cap: u64) -> Result<OfflineSolution> {
    check_budgets(graph, budgets)?;
    let groups: Vec<(Vec<usize>, usize)> = graph
        .nodes_by_period()
        .into_iter()
        .zip(budgets)
        .map(|(nodes, &k)| {
            let k = k.min(nodes.len());
            (nodes, k)
        })
        .collect();
    let combinations: f64 = groups.iter().map(|(n, k)| binomial(n.len(), *k)).product();
    check_cap(combinations, cap)?;
    Ok(search(graph, groups))
}

/// Optimal selection of at most `total` workers anywhere in the campaign.
pub fn exhaustive_dmtc(graph: &CampaignBipartiteGraph, total: usize, cap: u64) -> Result<OfflineSolution> {
    let nodes: Vec<usize> = graph.nodes_by_period().into_iter().flatten().collect();
    let k = total.min(nodes.len());
    check_cap(binomial(nodes.len(), k), cap)?;
    Ok(search(graph, vec![(nodes, k)]))
}

/// Picks nodes by maximum marginal gain while `allowed` has room; ties go to
/// the lower `(period, worker)`. Stops at zero gain.
fn greedy_loop(
    graph: &CampaignBipartiteGraph,
    candidates: &[usize],
    mut allowed: impl FnMut(usize) -> bool,
    acc: &mut TaskSet,
    taken: &mut [bool],
    out: &mut OfflineSolution,
) {
    loop {
        let mut best: Option<(usize, usize)> = None;
        for &i in candidates {
            let node = &graph.nodes[i];
            if taken[i] || !allowed(out.selected.len()) {
                continue;
            }
            let g = acc.gain(&node.covers);
            if g > 0 && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let Some((i, g)) = best else { break };
        taken[i] = true;
        acc.union_with(&graph.nodes[i].covers);
        out.selected.push(i);
        out.gains.push(g);
        out.coverage += g;
    }
}

/// Global marginal-gain greedy under per-period budgets.
pub fn greedy_fmtc(graph: &CampaignBipartiteGraph, budgets: &[usize]) -> Result<OfflineSolution> {
    check_budgets(graph, budgets)?;
    let mut left = budgets.to_vec();
    let mut acc = TaskSet::new(graph.tasks.len());
    let mut taken = vec![false; graph.nodes.len()];
    let mut out = OfflineSolution {
        selected: Vec::new(),
        coverage: 0,
        gains: Vec::new(),
    };
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, node) in graph.nodes.iter().enumerate() {
            if taken[i] || left[node.period as usize - 1] == 0 {
                continue;
            }
            let g = acc.gain(&node.covers);
            if g > 0 && best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let Some((i, g)) = best else { break };
        taken[i] = true;
        left[graph.nodes[i].period as usize - 1] -= 1;
        acc.union_with(&graph.nodes[i].covers);
        out.selected.push(i);
        out.gains.push(g);
        out.coverage += g;
    }
    Ok(out)
}

/// Greedy that fills one period at a time in the given order.
pub fn greedy_fmtc_sequenced(graph: &CampaignBipartiteGraph, budgets: &[usize], order: &[u32]) -> Result<OfflineSolution> {
    check_budgets(graph, budgets)?;
    let by_period = graph.nodes_by_period();
    let mut acc = TaskSet::new(graph.tasks.len());
    let mut taken = vec![false; graph.nodes.len()];
    let mut out = OfflineSolution {
        selected: Vec::new(),
        coverage: 0,
        gains: Vec::new(),
    };
    for &p in order {
        if p == 0 || p > graph.num_periods {
            return Err(Error::Configuration(format!("period {p} outside 1..={}", graph.num_periods)));
        }
        let start = out.selected.len();
        let k = budgets[p as usize - 1];
        greedy_loop(graph, &by_period[p as usize - 1], |n| n - start < k, &mut acc, &mut taken, &mut out);
    }
    Ok(out)
}

/// Max-coverage greedy with `total` picks across the campaign.
pub fn greedy_dmtc(graph: &CampaignBipartiteGraph, total: usize) -> OfflineSolution {
    let all: Vec<usize> = (0..graph.nodes.len()).collect();
    let mut acc = TaskSet::new(graph.tasks.len());
    let mut taken = vec![false; graph.nodes.len()];
    let mut out = OfflineSolution {
        selected: Vec::new(),
        coverage: 0,
        gains: Vec::new(),
    };
    greedy_loop(graph, &all, |n| n < total, &mut acc, &mut taken, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taskset_basics() {
        let mut a = TaskSet::new(130);
        a.insert(0);
        a.insert(129);
        let mut b = TaskSet::new(130);
        b.insert(129);
        b.insert(64);
        assert_eq!(a.gain(&b), 1);
        a.union_with(&b);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![0, 64, 129]);
        assert!(a.contains(64));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(4, 4), 1.0);
    }
}
