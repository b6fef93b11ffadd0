use std::collections::{BTreeMap, BTreeSet};

use super::PriorityModel;
use crate::error::Result;
use crate::model::{CoverageInstanceSet, TaskId, TaskTable, WorkerId};

/// Result of a single period's worker selection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionOutcome {
    /// Selected workers in selection order.
    pub selected: Vec<WorkerId>,
    /// Covered task → (crediting worker, utility). Each task is credited to
    /// the first selected worker that covers it.
    pub covered: BTreeMap<TaskId, (WorkerId, f64)>,
    /// Active tasks left uncovered.
    pub residual_uncovered: BTreeSet<TaskId>,
}

impl SelectionOutcome {
    pub fn empty(active: &[TaskId]) -> Self {
        SelectionOutcome {
            selected: Vec::new(),
            covered: BTreeMap::new(),
            residual_uncovered: active.iter().copied().collect(),
        }
    }

    pub fn coverage(&self) -> usize {
        self.covered.len()
    }

    pub fn total_utility(&self) -> f64 {
        self.covered.values().map(|(_, u)| u).sum()
    }
}

/// The best remaining worker at one greedy step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub slot: usize,
    pub worker: WorkerId,
    /// Current priority against the residual set.
    pub priority: f64,
    /// Value the candidate was ranked by (equals `priority` unless a custom
    /// score is supplied).
    pub score: f64,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    task: u32,
    value: f64,
    utility: f64,
}

/// Incremental greedy state over one period's coverage instance set.
///
/// Edge values `f(dist) * weight(t)` are precomputed once, so each step only
/// sums over residual tasks.
#[derive(Clone, Debug)]
pub struct GreedyState {
    workers: Vec<WorkerId>,
    edges: Vec<Vec<Edge>>,
    task_ids: Vec<TaskId>,
    residual: Vec<bool>,
    residual_count: usize,
    taken: Vec<bool>,
    outcome: SelectionOutcome,
}

impl GreedyState {
    pub fn new(
        coverage: &CoverageInstanceSet,
        active: &[TaskId],
        model: &PriorityModel<'_>,
        period: u32,
        tasks: &TaskTable<'_>,
    ) -> Result<Self> {
        let mut task_ids: Vec<TaskId> = active.to_vec();
        task_ids.sort_unstable();
        task_ids.dedup();
        let slot_of: BTreeMap<TaskId, u32> = task_ids.iter().enumerate().map(|(i, &t)| (t, i as u32)).collect();
        let mut weights = vec![None; task_ids.len()];

        let mut workers = Vec::with_capacity(coverage.coverage.len());
        let mut edges = Vec::with_capacity(coverage.coverage.len());
        for (&worker, covered) in &coverage.coverage {
            let mut list = Vec::with_capacity(covered.len());
            for (&id, &distance) in covered {
                let Some(&slot) = slot_of.get(&id) else { continue };
                let task = tasks.resolve(id)?;
                let weight = match weights[slot as usize] {
                    Some(w) => w,
                    None => {
                        let w = model.task_weight(task, period)?;
                        weights[slot as usize] = Some(w);
                        w
                    }
                };
                let utility = super::task_utility(&model.utility(), distance, task.radius)?;
                list.push(Edge {
                    task: slot,
                    value: utility * weight,
                    utility,
                });
            }
            workers.push(worker);
            edges.push(list);
        }

        let n = task_ids.len();
        Ok(GreedyState {
            taken: vec![false; workers.len()],
            workers,
            edges,
            outcome: SelectionOutcome {
                residual_uncovered: task_ids.iter().copied().collect(),
                ..Default::default()
            },
            task_ids,
            residual: vec![true; n],
            residual_count: n,
        })
    }

    pub fn residual_count(&self) -> usize {
        self.residual_count
    }

    pub fn selected_count(&self) -> usize {
        self.outcome.selected.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn priority(&self, slot: usize) -> f64 {
        self.edges[slot]
            .iter()
            .filter(|e| self.residual[e.task as usize])
            .map(|e| e.value)
            .sum()
    }

    /// Highest-priority unselected worker with positive priority; ties go to
    /// the smallest worker id.
    pub fn best(&self) -> Option<Candidate> {
        self.best_by(|_, p| p)
    }

    /// Like [`best`](Self::best) but ranks by `score(worker, priority)`.
    /// Workers with zero priority are never candidates.
    pub fn best_by(&self, mut score: impl FnMut(WorkerId, f64) -> f64) -> Option<Candidate> {
        if self.residual_count == 0 {
            return None;
        }
        let mut best: Option<Candidate> = None;
        for (slot, &worker) in self.workers.iter().enumerate() {
            if self.taken[slot] {
                continue;
            }
            let priority = self.priority(slot);
            if !(priority > 0.0) {
                continue;
            }
            let s = score(worker, priority);
            if best.is_none_or(|b| s > b.score) {
                best = Some(Candidate {
                    slot,
                    worker,
                    priority,
                    score: s,
                });
            }
        }
        best
    }

    /// Selects the worker in `slot`, crediting its residual tasks to it.
    pub fn accept(&mut self, slot: usize) {
        debug_assert!(!self.taken[slot]);
        self.taken[slot] = true;
        let worker = self.workers[slot];
        for e in &self.edges[slot] {
            let t = e.task as usize;
            if self.residual[t] {
                self.residual[t] = false;
                self.residual_count -= 1;
                let id = self.task_ids[t];
                self.outcome.residual_uncovered.remove(&id);
                self.outcome.covered.insert(id, (worker, e.utility));
            }
        }
        self.outcome.selected.push(worker);
    }

    pub fn outcome(&self) -> &SelectionOutcome {
        &self.outcome
    }

    pub fn into_outcome(self) -> SelectionOutcome {
        self.outcome
    }
}

/// Greedy selection of at most `budget` workers (Algorithm 1 for one period).
///
/// Stops when the budget is spent, every active task is covered, or no
/// remaining worker has positive priority.
pub fn greedy_select(
    coverage: &CoverageInstanceSet,
    active: &[TaskId],
    budget: usize,
    model: &PriorityModel<'_>,
    period: u32,
    tasks: &TaskTable<'_>,
) -> Result<SelectionOutcome> {
    let mut state = GreedyState::new(coverage, active, model, period, tasks)?;
    while state.selected_count() < budget {
        let Some(c) = state.best() else { break };
        state.accept(c.slot);
    }
    Ok(state.into_outcome())
}
