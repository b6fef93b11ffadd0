//! Streaming replay of a campaign period by period, driving a selection policy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::SelectionOutcome;
use crate::model::{
    advance_period, compute_coverage, CampaignInstance, CoverageInstanceSet, PeriodSnapshot, TaskId, TaskTable,
    WorkerId,
};
use crate::moo::ActivationLedger;
use crate::spatial::EntropyGrid;

/// Who answered a task, when, and with what utility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Credit {
    pub worker: WorkerId,
    pub period: u32,
    pub utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u32,
    pub workers: usize,
    pub active_tasks: usize,
    pub idle_tasks: usize,
    pub deferred: usize,
    pub selected: Vec<WorkerId>,
    pub covered: Vec<TaskId>,
    pub runtime_ms: f64,
}

/// Everything a run produced; the unit all metrics are computed from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub periods: Vec<PeriodRecord>,
    pub credits: BTreeMap<TaskId, Credit>,
    pub ledger: ActivationLedger,
    /// Cumulative workers selected after each period.
    pub budget_trace: Vec<usize>,
}

impl CampaignResult {
    pub fn coverage(&self) -> usize {
        self.credits.len()
    }

    pub fn total_utility(&self) -> f64 {
        self.credits.values().map(|c| c.utility).sum()
    }

    pub fn budget_used(&self) -> usize {
        self.budget_trace.last().copied().unwrap_or(0)
    }

    /// Workers selected in each period.
    pub fn per_period_counts(&self) -> Vec<usize> {
        self.periods.iter().map(|p| p.selected.len()).collect()
    }

    /// All `(worker, period)` selections.
    pub fn selections(&self) -> BTreeSet<(WorkerId, u32)> {
        self.periods
            .iter()
            .flat_map(|p| p.selected.iter().map(move |&w| (w, p.period)))
            .collect()
    }

    pub fn mean_runtime_ms(&self) -> f64 {
        if self.periods.is_empty() {
            0.0
        } else {
            self.periods.iter().map(|p| p.runtime_ms).sum::<f64>() / self.periods.len() as f64
        }
    }

    /// Cumulative coverage after each period.
    pub fn coverage_trace(&self) -> Vec<usize> {
        let mut acc = 0;
        self.periods
            .iter()
            .map(|p| {
                acc += p.covered.len();
                acc
            })
            .collect()
    }
}

/// Everything a policy may look at when selecting workers for one period.
pub struct PeriodContext<'a> {
    pub period: u32,
    pub num_periods: u32,
    pub snapshot: &'a PeriodSnapshot,
    pub coverage: &'a CoverageInstanceSet,
    pub tasks: &'a TaskTable<'a>,
    pub ledger: &'a ActivationLedger,
    pub entropy: Option<&'a EntropyGrid>,
    pub budget_used: usize,
}

/// A per-period selection rule. Campaign-level state (budget, statistics)
/// lives in the implementor.
pub trait PeriodPolicy {
    fn select(&mut self, ctx: &PeriodContext<'_>) -> Result<SelectionOutcome>;
}

/// Where the Spatial heuristic's visit history comes from.
#[derive(Clone, Copy, Debug, Default)]
pub enum EntropySource<'a> {
    #[default]
    None,
    /// Arrivals of the campaign's own earlier periods, on a grid of this cell size.
    OwnHistory { cell_size: f64 },
    /// A grid built from a separate training campaign.
    Training(&'a EntropyGrid),
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions<'a> {
    pub entropy: EntropySource<'a>,
    /// Record wall-clock runtime per period; disabled runs report zero.
    pub timing: bool,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            entropy: EntropySource::None,
            timing: true,
        }
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Timer(Option<std::time::Instant>);

#[cfg(not(target_arch = "wasm32"))]
impl Timer {
    fn start(enabled: bool) -> Self {
        Timer(enabled.then(std::time::Instant::now))
    }

    fn elapsed_ms(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64() * 1e3)
    }
}

#[cfg(target_arch = "wasm32")]
struct Timer;

#[cfg(target_arch = "wasm32")]
impl Timer {
    fn start(_: bool) -> Self {
        Timer
    }

    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

fn check_outcome(outcome: &SelectionOutcome, snapshot: &PeriodSnapshot, coverage: &CoverageInstanceSet) -> Result<()> {
    let present: BTreeSet<WorkerId> = snapshot.workers.iter().map(|w| w.worker).collect();
    let mut seen = BTreeSet::new();
    for w in &outcome.selected {
        if !present.contains(w) || !seen.insert(*w) {
            return Err(Error::InternalInvariant(format!(
                "period {}: {w} selected twice or not present",
                snapshot.period
            )));
        }
    }
    for (t, (w, _)) in &outcome.covered {
        let ok = coverage.coverage.get(w).is_some_and(|c| c.contains_key(t));
        if !ok || !seen.contains(w) {
            return Err(Error::InternalInvariant(format!(
                "period {}: {t} credited to {w} which does not cover it",
                snapshot.period
            )));
        }
    }
    Ok(())
}

/// Replays `instance` period by period, asking `policy` for each selection.
pub fn run_online(
    instance: &CampaignInstance,
    policy: &mut dyn PeriodPolicy,
    opts: &RunOptions<'_>,
) -> Result<CampaignResult> {
    let table = instance.task_table();
    let q = instance.num_periods();
    let mut own_grid = match opts.entropy {
        EntropySource::OwnHistory { cell_size } => Some(EntropyGrid::new(instance.area().min, cell_size)),
        _ => None,
    };

    let mut pending: Vec<TaskId> = Vec::new();
    let mut result = CampaignResult::default();
    let mut used = 0usize;

    for period in 1..=q {
        let timer = Timer::start(opts.timing);
        let arrivals = instance.arrivals_in(period);
        let snapshot = advance_period(&pending, &instance.released_in(period), arrivals.to_vec(), period, &table)?;
        let coverage = compute_coverage(&snapshot, &table)?;
        let entropy = match (&own_grid, opts.entropy) {
            (Some(g), _) => Some(g),
            (None, EntropySource::Training(g)) => Some(g),
            _ => None,
        };
        let ctx = PeriodContext {
            period,
            num_periods: q,
            snapshot: &snapshot,
            coverage: &coverage,
            tasks: &table,
            ledger: &result.ledger,
            entropy,
            budget_used: used,
        };
        let outcome = policy.select(&ctx)?;
        let runtime_ms = timer.elapsed_ms();
        check_outcome(&outcome, &snapshot, &coverage)?;

        result.ledger.record_all(&outcome.selected);
        used += outcome.selected.len();
        for (&t, &(worker, utility)) in &outcome.covered {
            result.credits.insert(t, Credit { worker, period, utility });
        }
        pending = snapshot
            .active_tasks
            .iter()
            .chain(&snapshot.idle_tasks)
            .copied()
            .filter(|t| !outcome.covered.contains_key(t))
            .collect();
        pending.sort_unstable();

        if let Some(grid) = own_grid.as_mut() {
            grid.add_visits(arrivals.iter().map(|a| (a.worker, a.location)));
        }

        result.budget_trace.push(used);
        result.periods.push(PeriodRecord {
            period,
            workers: snapshot.workers.len(),
            active_tasks: snapshot.active_tasks.len(),
            idle_tasks: snapshot.idle_tasks.len(),
            deferred: snapshot.deferred_count,
            selected: outcome.selected,
            covered: outcome.covered.keys().copied().collect(),
            runtime_ms,
        });
    }
    Ok(result)
}
