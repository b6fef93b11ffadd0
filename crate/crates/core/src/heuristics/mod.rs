//! Worker priority models and the per-period greedy selector.

mod greedy;
mod utility;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use greedy::{greedy_select, Candidate, GreedyState, SelectionOutcome};
pub use utility::{task_utility, UtilityModel};

use crate::error::{Error, Result};
use crate::model::{CoverageInstanceSet, TaskId, TaskSpec, TaskTable, WorkerId};
use crate::spatial::EntropyGrid;

/// Local heuristic used to rank workers within a period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Heuristic {
    /// Utility of the uncovered tasks a worker covers.
    #[default]
    Basic,
    /// Each task weighted by the inverse of its remaining periods.
    Temporal,
    /// Each task weighted by `1 / (1 + RE(t))`.
    Spatial,
}

impl Heuristic {
    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Basic => "basic",
            Heuristic::Temporal => "temporal",
            Heuristic::Spatial => "spatial",
        }
    }
}

/// A heuristic bound to a utility model and, for Spatial, an entropy grid.
#[derive(Clone, Copy, Debug)]
pub struct PriorityModel<'g> {
    heuristic: Heuristic,
    utility: UtilityModel,
    entropy: Option<&'g EntropyGrid>,
}

impl<'g> PriorityModel<'g> {
    pub fn new(heuristic: Heuristic, utility: UtilityModel, entropy: Option<&'g EntropyGrid>) -> Result<Self> {
        utility.validate()?;
        if heuristic == Heuristic::Spatial && entropy.is_none() {
            return Err(Error::InvalidModel("the spatial heuristic requires an entropy grid".into()));
        }
        Ok(PriorityModel {
            heuristic,
            utility,
            entropy,
        })
    }

    pub fn basic() -> PriorityModel<'static> {
        PriorityModel {
            heuristic: Heuristic::Basic,
            utility: UtilityModel::Binary,
            entropy: None,
        }
    }

    pub fn temporal() -> PriorityModel<'static> {
        PriorityModel {
            heuristic: Heuristic::Temporal,
            utility: UtilityModel::Binary,
            entropy: None,
        }
    }

    pub fn heuristic(&self) -> Heuristic {
        self.heuristic
    }

    pub fn utility(&self) -> UtilityModel {
        self.utility
    }

    /// Heuristic weight of a task independent of the covering worker.
    pub fn task_weight(&self, task: &TaskSpec, period: u32) -> Result<f64> {
        match self.heuristic {
            Heuristic::Basic => Ok(1.0),
            Heuristic::Temporal => {
                let remaining = task.deadline() as i64 - period as i64;
                if remaining <= 0 {
                    return Err(Error::InternalInvariant(format!(
                        "task {} expired at {} but is still uncovered in period {period}",
                        task.id,
                        task.deadline()
                    )));
                }
                Ok(1.0 / remaining as f64)
            }
            Heuristic::Spatial => {
                let grid = self.entropy.expect("checked at construction");
                Ok(1.0 / (1.0 + grid.region_entropy(&task.location, task.radius)))
            }
        }
    }

    /// Contribution of one covered task: `f(dist) * weight`.
    pub fn edge_value(&self, task: &TaskSpec, distance: f64, period: u32) -> Result<(f64, f64)> {
        let utility = task_utility(&self.utility, distance, task.radius)?;
        Ok((utility * self.task_weight(task, period)?, utility))
    }
}

/// Priority of `worker` against the uncovered set `uncovered`.
pub fn worker_priority(
    model: &PriorityModel<'_>,
    worker: WorkerId,
    coverage: &CoverageInstanceSet,
    uncovered: &BTreeSet<TaskId>,
    period: u32,
    tasks: &TaskTable<'_>,
) -> Result<f64> {
    let edges = coverage
        .coverage
        .get(&worker)
        .ok_or_else(|| Error::MalformedInstance(format!("{worker} is not in the coverage set")))?;
    let mut total = 0.0;
    for (&id, &distance) in edges {
        if uncovered.contains(&id) {
            total += model.edge_value(tasks.resolve(id)?, distance, period)?.0;
        }
    }
    Ok(total)
}
