//! Campaign data model and per-period coverage construction.
//!
//! A campaign is a sequence of periods `1..=Q`. Tasks are circular regions
//! answerable during `release..release + duration`; workers arrive at one
//! location per period. For each period the engine derives the set of active
//! tasks (new plus deferred, minus tasks no present worker can reach) and the
//! bipartite worker → task coverage map that every selection algorithm
//! consumes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::GridIndex;

/// Identifier of a task, unique within a campaign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub u32);

/// Persistent worker identity; the same id may arrive in many periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorkerId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// Planar point in kilometers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance. Uses `sqrt(dx² + dy²)` so results are identical on
    /// every IEEE-754 platform.
    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned campaign area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min: Point,
    pub max: Point,
}

impl Area {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::MalformedInstance(format!(
                "degenerate area [{xmin}, {ymin}] x [{xmax}, {ymax}]"
            )));
        }
        Ok(Area {
            min: Point::new(xmin, ymin),
            max: Point::new(xmax, ymax),
        })
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// A spatial task: answerable by any worker inside the disk `(location, radius)`
/// during periods `release ..= release + duration - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub location: Point,
    pub radius: f64,
    pub release: u32,
    pub duration: u32,
}

impl TaskSpec {
    /// First period in which the task is no longer answerable.
    pub fn deadline(&self) -> u32 {
        self.release + self.duration
    }

    /// Temporal constraint: `release <= period < release + duration`.
    pub fn answerable_at(&self, period: u32) -> bool {
        self.release <= period && period < self.deadline()
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::MalformedInstance(format!(
                "task {} has non-positive radius {}",
                self.id, self.radius
            )));
        }
        if self.duration < 1 {
            return Err(Error::MalformedInstance(format!("task {} has zero duration", self.id)));
        }
        if self.release < 1 {
            return Err(Error::MalformedInstance(format!(
                "task {} released before period 1",
                self.id
            )));
        }
        Ok(())
    }
}

/// Availability of one worker in one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerArrival {
    pub worker: WorkerId,
    pub period: u32,
    pub location: Point,
}

/// Explicit coverage sets keyed by `(period, worker)`, used by fixtures that
/// describe an instance without geometry.
pub type ExplicitCoverage = BTreeMap<(u32, WorkerId), BTreeSet<TaskId>>;

/// A complete campaign. Construction validates and sorts the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignInstance {
    num_periods: u32,
    area: Area,
    tasks: Vec<TaskSpec>,
    arrivals: Vec<WorkerArrival>,
    explicit: Option<ExplicitCoverage>,
}

impl CampaignInstance {
    pub fn new(
        num_periods: u32,
        area: Area,
        mut tasks: Vec<TaskSpec>,
        mut arrivals: Vec<WorkerArrival>,
        explicit: Option<ExplicitCoverage>,
    ) -> Result<Self> {
        if num_periods < 1 {
            return Err(Error::MalformedInstance("campaign needs at least one period".into()));
        }
        let mut ids = BTreeSet::new();
        for t in &tasks {
            t.validate()?;
            if t.release > num_periods {
                return Err(Error::MalformedInstance(format!(
                    "task {} released at {} beyond Q = {num_periods}",
                    t.id, t.release
                )));
            }
            if !ids.insert(t.id) {
                return Err(Error::MalformedInstance(format!("duplicate task id {}", t.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for a in &arrivals {
            if a.period < 1 || a.period > num_periods {
                return Err(Error::MalformedInstance(format!(
                    "worker {} arrives in period {} outside [1, {num_periods}]",
                    a.worker, a.period
                )));
            }
            if !seen.insert((a.period, a.worker)) {
                return Err(Error::MalformedInstance(format!(
                    "worker {} appears twice in period {}",
                    a.worker, a.period
                )));
            }
            if explicit.is_none() && !area.contains(&a.location) {
                return Err(Error::MalformedInstance(format!(
                    "worker {} in period {} lies outside the campaign area",
                    a.worker, a.period
                )));
            }
        }
        if let Some(explicit) = &explicit {
            for ((period, worker), set) in explicit {
                if !seen.contains(&(*period, *worker)) {
                    return Err(Error::MalformedInstance(format!(
                        "explicit coverage for {worker} in period {period} has no arrival"
                    )));
                }
                if let Some(t) = set.iter().find(|t| !ids.contains(t)) {
                    return Err(Error::MalformedInstance(format!(
                        "explicit coverage references unknown task {t}"
                    )));
                }
            }
        }
        tasks.sort_by_key(|t| (t.release, t.id));
        arrivals.sort_by_key(|a| (a.period, a.worker));
        Ok(CampaignInstance {
            num_periods,
            area,
            tasks,
            arrivals,
            explicit,
        })
    }

    pub fn num_periods(&self) -> u32 {
        self.num_periods
    }

    pub fn area(&self) -> &Area {
        &self.area
    }

    /// Tasks sorted by `(release, id)`.
    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    /// Arrivals sorted by `(period, worker)`.
    pub fn arrivals(&self) -> &[WorkerArrival] {
        &self.arrivals
    }

    pub fn explicit_coverage(&self) -> Option<&ExplicitCoverage> {
        self.explicit.as_ref()
    }

    pub fn task_table(&self) -> TaskTable<'_> {
        TaskTable::new(&self.tasks, self.explicit.as_ref())
    }

    /// Arrivals of one period.
    pub fn arrivals_in(&self, period: u32) -> &[WorkerArrival] {
        let lo = self.arrivals.partition_point(|a| a.period < period);
        let hi = self.arrivals.partition_point(|a| a.period <= period);
        &self.arrivals[lo..hi]
    }

    /// Ids of the tasks released in `period`.
    pub fn released_in(&self, period: u32) -> Vec<TaskId> {
        let lo = self.tasks.partition_point(|t| t.release < period);
        let hi = self.tasks.partition_point(|t| t.release <= period);
        self.tasks[lo..hi].iter().map(|t| t.id).collect()
    }

    /// Worker count per period, index 0 is period 1.
    pub fn worker_counts(&self) -> Vec<usize> {
        (1..=self.num_periods).map(|i| self.arrivals_in(i).len()).collect()
    }

    /// Copy of the instance with every task radius replaced.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let tasks = self
            .tasks
            .iter()
            .map(|t| TaskSpec { radius, ..t.clone() })
            .collect();
        CampaignInstance::new(
            self.num_periods,
            self.area,
            tasks,
            self.arrivals.clone(),
            self.explicit.clone(),
        )
    }
}

/// Resolves task ids and decides worker eligibility (Eqs. 1–2 or explicit sets).
#[derive(Clone, Debug)]
pub struct TaskTable<'a> {
    tasks: &'a [TaskSpec],
    index: HashMap<TaskId, usize>,
    explicit: Option<&'a ExplicitCoverage>,
    max_radius: f64,
}

impl<'a> TaskTable<'a> {
    pub fn new(tasks: &'a [TaskSpec], explicit: Option<&'a ExplicitCoverage>) -> Self {
        let index = tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
        let max_radius = tasks.iter().map(|t| t.radius).fold(0.0, f64::max);
        TaskTable {
            tasks,
            index,
            explicit,
            max_radius,
        }
    }

    pub fn get(&self, id: TaskId) -> Option<&'a TaskSpec> {
        self.index.get(&id).map(|&i| &self.tasks[i])
    }

    pub fn resolve(&self, id: TaskId) -> Result<&'a TaskSpec> {
        self.get(id)
            .ok_or_else(|| Error::MalformedInstance(format!("unresolvable task id {id}")))
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit.is_some()
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Returns the worker-task distance when `arrival` covers `task`, `None`
    /// otherwise. Explicit fixtures report a distance of zero.
    pub fn eligibility(&self, arrival: &WorkerArrival, task: &TaskSpec) -> Option<f64> {
        if !task.answerable_at(arrival.period) {
            return None;
        }
        match self.explicit {
            Some(explicit) => explicit
                .get(&(arrival.period, arrival.worker))
                .filter(|set| set.contains(&task.id))
                .map(|_| 0.0),
            None => {
                let d = arrival.location.distance(&task.location);
                (d <= task.radius).then_some(d)
            }
        }
    }
}

/// State of one period before selection.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodSnapshot {
    pub period: u32,
    pub workers: Vec<WorkerArrival>,
    /// Unexpired, uncovered tasks enclosing at least one present worker; sorted.
    pub active_tasks: Vec<TaskId>,
    /// Unexpired, uncovered tasks no present worker can reach; they stay
    /// pending for later periods but are unassignable now.
    pub idle_tasks: Vec<TaskId>,
    /// Number of active tasks carried over from earlier periods.
    pub deferred_count: usize,
}

/// Per-period bipartite map from worker to covered tasks, with the
/// worker-task distance for each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageInstanceSet {
    pub period: u32,
    pub coverage: BTreeMap<WorkerId, BTreeMap<TaskId, f64>>,
}

impl CoverageInstanceSet {
    pub fn from_sets(period: u32, sets: impl IntoIterator<Item = (WorkerId, Vec<TaskId>)>) -> Self {
        let coverage = sets
            .into_iter()
            .map(|(w, ts)| (w, ts.into_iter().map(|t| (t, 0.0)).collect()))
            .collect();
        CoverageInstanceSet { period, coverage }
    }

    pub fn workers(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.coverage.keys().copied()
    }

    pub fn tasks_of(&self, worker: WorkerId) -> impl Iterator<Item = TaskId> + '_ {
        self.coverage
            .get(&worker)
            .into_iter()
            .flat_map(|m| m.keys().copied())
    }

    pub fn edge_count(&self) -> usize {
        self.coverage.values().map(|m| m.len()).sum()
    }
}

/// Builds the bucket grid used to find candidate pairs quickly.
fn grid_cell_size(table: &TaskTable<'_>) -> f64 {
    if table.max_radius() > 0.0 {
        table.max_radius()
    } else {
        1.0
    }
}

/// Derives the snapshot for `period` from the previous period's uncovered
/// tasks and this period's releases.
///
/// Tasks that fail the temporal constraint are dropped. Tasks no present
/// worker covers are reported as idle rather than active.
pub fn advance_period(
    previous_uncovered: &[TaskId],
    new_tasks: &[TaskId],
    workers: Vec<WorkerArrival>,
    period: u32,
    table: &TaskTable<'_>,
) -> Result<PeriodSnapshot> {
    let mut candidates: BTreeMap<TaskId, bool> = BTreeMap::new();
    for &id in previous_uncovered {
        if table.resolve(id)?.answerable_at(period) {
            candidates.insert(id, true);
        }
    }
    for &id in new_tasks {
        if table.resolve(id)?.answerable_at(period) {
            candidates.entry(id).or_insert(false);
        }
    }

    let index = (!table.is_explicit() && !workers.is_empty()).then(|| {
        GridIndex::build(
            grid_cell_size(table),
            workers.iter().enumerate().map(|(i, w)| (i, w.location)),
        )
    });

    let mut active = Vec::new();
    let mut idle = Vec::new();
    let mut deferred_count = 0;
    for (id, deferred) in candidates {
        let task = table.resolve(id)?;
        let reachable = match &index {
            Some(index) => index.any_within(&task.location, task.radius),
            None => workers.iter().any(|w| table.eligibility(w, task).is_some()),
        };
        if reachable {
            deferred_count += usize::from(deferred);
            active.push(id);
        } else {
            idle.push(id);
        }
    }

    Ok(PeriodSnapshot {
        period,
        workers,
        active_tasks: active,
        idle_tasks: idle,
        deferred_count,
    })
}

/// Computes `C(w)` for every worker of the snapshot over its active tasks.
/// Workers covering nothing appear with empty sets.
pub fn compute_coverage(snapshot: &PeriodSnapshot, table: &TaskTable<'_>) -> Result<CoverageInstanceSet> {
    let mut coverage: BTreeMap<WorkerId, BTreeMap<TaskId, f64>> = snapshot
        .workers
        .iter()
        .map(|w| (w.worker, BTreeMap::new()))
        .collect();
    let tasks = snapshot
        .active_tasks
        .iter()
        .map(|&id| table.resolve(id))
        .collect::<Result<Vec<_>>>()?;

    if table.is_explicit() {
        for w in &snapshot.workers {
            let entry = coverage.get_mut(&w.worker).expect("worker inserted above");
            for task in &tasks {
                if let Some(d) = table.eligibility(w, task) {
                    entry.insert(task.id, d);
                }
            }
        }
    } else if !tasks.is_empty() {
        let index = GridIndex::build(
            grid_cell_size(table),
            tasks.iter().enumerate().map(|(i, t)| (i, t.location)),
        );
        let reach = tasks.iter().map(|t| t.radius).fold(0.0, f64::max);
        let mut hits = Vec::new();
        for w in &snapshot.workers {
            let entry = coverage.get_mut(&w.worker).expect("worker inserted above");
            hits.clear();
            index.query_disk_into(&w.location, reach, &mut hits);
            for &i in &hits {
                if let Some(d) = table.eligibility(w, tasks[i]) {
                    entry.insert(tasks[i].id, d);
                }
            }
        }
    }

    Ok(CoverageInstanceSet {
        period: snapshot.period,
        coverage,
    })
}
