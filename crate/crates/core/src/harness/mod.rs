//! Experiment orchestration: configuration, sweeps, metrics and CSV output.

mod config;
mod metrics;

pub use config::{
    BaselineKind, BudgetMode, BudgetSpec, DynamicStrategy, ExperimentConfig, FixedStrategy, MooSpec, OfflineSolver,
    OfflineSpec, Reference, Source, Sweep, VisitHistory,
};
pub use metrics::{
    emit_csv, fingerprint, hist_path, overlap_ratio, quantile, read_csv, read_csv_from, read_histograms, stats,
    write_csv, write_histograms, MetricsRow, StatsRow, CSV_HEADER,
};

use crate::budget::{
    allocate_equal, allocate_random, derive_workload_baseline, run_adapt, run_fixed, run_fixed_nsga,
    run_naive, AdaptConfig, BudgetPlan, GainModel, LocalHeuristic,
};
use crate::campaign::{CampaignResult, EntropySource, RunOptions};
use crate::error::{Error, Result};
use crate::heuristics::{Heuristic, UtilityModel};
use crate::instance_file::read_instance;
use crate::model::CampaignInstance;
use crate::spatial::EntropyGrid;
use crate::moo::NsgaConfig;
use crate::offline::{exhaustive_dmtc, exhaustive_fmtc, greedy_dmtc, greedy_fmtc, CampaignBipartiteGraph};
use crate::workload::generate_campaign;

/// Seed offset separating the historical campaign used for workload
/// baselines from the evaluated one.
const HISTORY_SEED: u64 = 0x6869_7374_6f72_7921;

/// One point of the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub k: usize,
    pub r: Option<f64>,
    pub q: Option<u32>,
    pub alpha: Option<f64>,
}

impl SweepPoint {
    fn describe(&self) -> String {
        let mut s = format!("K={}", self.k);
        if let Some(r) = self.r {
            s += &format!(" r={r}");
        }
        if let Some(q) = self.q {
            s += &format!(" Q={q}");
        }
        if let Some(a) = self.alpha {
            s += &format!(" alpha={a}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Online,
    OfflineFixed,
    OfflineDynamic,
}

struct Job {
    point: SweepPoint,
    variant: Variant,
    seed: u64,
}

impl ExperimentConfig {
    /// Every combination of the sweep axes, in axis order K, r, Q, alpha.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let ks = self.sweep.k.clone().unwrap_or_else(|| vec![self.budget.total]);
        let rs: Vec<Option<f64>> = self.sweep.r.as_ref().map_or(vec![None], |v| v.iter().copied().map(Some).collect());
        let qs: Vec<Option<u32>> = self.sweep.q.as_ref().map_or(vec![None], |v| v.iter().copied().map(Some).collect());
        let alphas: Vec<Option<f64>> = self
            .sweep
            .alpha
            .as_ref()
            .map_or(vec![self.moo.enabled.then_some(self.moo.alpha)], |v| v.iter().copied().map(Some).collect());
        let mut out = Vec::new();
        for &k in &ks {
            for &r in &rs {
                for &q in &qs {
                    for &alpha in &alphas {
                        out.push(SweepPoint { k, r, q, alpha });
                    }
                }
            }
        }
        out
    }

    fn variants(&self) -> Vec<Variant> {
        let mut v = Vec::new();
        if !self.offline.only {
            v.push(Variant::Online);
        }
        if self.offline.solver.is_some() {
            v.push(Variant::OfflineFixed);
            v.push(Variant::OfflineDynamic);
        }
        v
    }

    fn budget_label(&self, variant: Variant) -> String {
        match variant {
            Variant::OfflineFixed => "offline-fixed".into(),
            Variant::OfflineDynamic => "offline-dynamic".into(),
            Variant::Online => {
                let base = match self.budget.mode {
                    BudgetMode::Fixed(s) => format!("fixed-{}", s.name()),
                    BudgetMode::Dynamic(s) => s.name().to_string(),
                };
                if self.moo.enabled {
                    format!("{base}-moo")
                } else {
                    base
                }
            }
        }
    }

    fn row_label(&self, variant: Variant) -> String {
        let solver = self.offline.solver.map_or("", |s| s.name());
        match variant {
            Variant::OfflineFixed => format!("offline-fixed-{solver}"),
            Variant::OfflineDynamic => format!("offline-dynamic-{solver}"),
            Variant::Online => self
                .label
                .clone()
                .unwrap_or_else(|| format!("{}-{}-{}", self.heuristic.name(), self.budget_label(variant), self.utility.name())),
        }
    }

    fn instance(&self, point: &SweepPoint, seed: u64) -> Result<CampaignInstance> {
        let instance = match &self.source {
            Source::Generator(g) => {
                let mut g = g.clone();
                g.seed = seed;
                if let Some(q) = point.q {
                    g.periods = q;
                }
                if let Some(r) = point.r {
                    g.radius_choices = vec![r];
                }
                return generate_campaign(&g);
            }
            Source::File(path) => read_instance(path)?,
            Source::Instance(inst) => (**inst).clone(),
        };
        match point.r {
            Some(r) => instance.with_radius(r),
            None => Ok(instance),
        }
    }

    /// Historical campaign for workload baselines: a generator source draws a
    /// fresh campaign from a derived seed; fixed instances serve as their own
    /// history.
    fn history(&self, point: &SweepPoint, seed: u64) -> Result<CampaignInstance> {
        match &self.source {
            Source::Generator(_) => self.instance(point, seed ^ HISTORY_SEED),
            _ => self.instance(point, seed),
        }
    }

    fn workload_baseline(&self, point: &SweepPoint, seed: u64, periods: u32) -> Result<BudgetPlan> {
        let history = self.history(point, seed)?;
        let graph = CampaignBipartiteGraph::build(&history);
        let sol = greedy_dmtc(&graph, point.k);
        derive_workload_baseline(&sol.to_result(&graph), periods, point.k)
    }

    fn fixed_plan(&self, strategy: FixedStrategy, point: &SweepPoint, seed: u64, q: u32) -> Result<BudgetPlan> {
        Ok(match strategy {
            FixedStrategy::Equal => allocate_equal(point.k, q),
            FixedStrategy::Random => allocate_random(point.k, q, seed),
            FixedStrategy::Workload => self.workload_baseline(point, seed, q)?,
            FixedStrategy::Explicit => {
                let per = self
                    .budget
                    .per_period
                    .clone()
                    .ok_or_else(|| Error::Configuration("budget.per_period is required for the explicit strategy".into()))?;
                if per.len() != q as usize {
                    return Err(Error::Configuration(format!(
                        "budget.per_period lists {} periods, campaign has {q}",
                        per.len()
                    )));
                }
                BudgetPlan::new(per)
            }
        })
    }

    fn nsga(&self, alpha: f64) -> NsgaConfig {
        NsgaConfig {
            population_size: self.moo.population,
            max_generations: self.moo.generations,
            alpha,
            ..NsgaConfig::default()
        }
    }

    fn run_online(&self, instance: &CampaignInstance, point: &SweepPoint, seed: u64) -> Result<CampaignResult> {
        self.run_online_with(instance, point, seed, self.utility)
    }

    fn run_online_with(
        &self,
        instance: &CampaignInstance,
        point: &SweepPoint,
        seed: u64,
        utility: UtilityModel,
    ) -> Result<CampaignResult> {
        let q = instance.num_periods();
        let local = LocalHeuristic::new(self.heuristic, utility);
        let training = match (self.heuristic, self.spatial_history) {
            (Heuristic::Spatial, VisitHistory::Training) => {
                let history = self.history(point, seed)?;
                Some(EntropyGrid::from_visits(
                    history.area().min,
                    self.spatial_cell_size,
                    history.arrivals().iter().map(|a| (a.worker, a.location)),
                ))
            }
            _ => None,
        };
        let entropy = match (&training, self.heuristic) {
            (Some(grid), _) => EntropySource::Training(grid),
            (None, Heuristic::Spatial) => EntropySource::OwnHistory {
                cell_size: self.spatial_cell_size,
            },
            _ => EntropySource::None,
        };
        let opts = RunOptions {
            entropy,
            timing: self.timing,
        };
        let alpha = point.alpha.unwrap_or(self.moo.alpha);
        match self.budget.mode {
            BudgetMode::Fixed(strategy) => {
                let plan = self.fixed_plan(strategy, point, seed, q)?;
                if self.moo.enabled {
                    run_fixed_nsga(instance, &plan, &self.nsga(alpha), seed, &opts)
                } else {
                    run_fixed(instance, &plan, local, &opts)
                }
            }
            BudgetMode::Dynamic(DynamicStrategy::Naive) => run_naive(instance, point.k, local, &opts),
            BudgetMode::Dynamic(DynamicStrategy::Adapt) => {
                let baseline = match self.budget.baseline {
                    BaselineKind::Equal => allocate_equal(point.k, q),
                    BaselineKind::Workload => self.workload_baseline(point, seed, q)?,
                };
                let cfg = AdaptConfig {
                    eps: self.budget.eps,
                    mean_rule: self.budget.mean_rule,
                    gain: if self.moo.enabled {
                        GainModel::Overload { alpha }
                    } else {
                        GainModel::Priority
                    },
                };
                run_adapt(instance, point.k, local, &cfg, &baseline, seed, &opts)
            }
        }
    }

    fn run_offline(&self, instance: &CampaignInstance, point: &SweepPoint, variant: Variant) -> Result<CampaignResult> {
        let OfflineSpec { solver, cap, .. } = self.offline;
        let solver = solver.expect("offline variant requires a solver");
        let graph = CampaignBipartiteGraph::build(instance);
        let q = instance.num_periods();
        let sol = match (variant, solver) {
            (Variant::OfflineFixed, s) => {
                let plan = match self.budget.mode {
                    BudgetMode::Fixed(FixedStrategy::Explicit) => {
                        self.fixed_plan(FixedStrategy::Explicit, point, 0, q)?
                    }
                    _ => allocate_equal(point.k, q),
                };
                match s {
                    OfflineSolver::Exhaustive => exhaustive_fmtc(&graph, plan.per_period(), cap)?,
                    OfflineSolver::Greedy => greedy_fmtc(&graph, plan.per_period())?,
                }
            }
            (_, OfflineSolver::Exhaustive) => exhaustive_dmtc(&graph, point.k, cap)?,
            (_, OfflineSolver::Greedy) => greedy_dmtc(&graph, point.k),
        };
        Ok(sol.to_result(&graph))
    }

    fn run_job(&self, job: &Job) -> Result<MetricsRow> {
        let instance = self.instance(&job.point, job.seed)?;
        let result = match job.variant {
            Variant::Online => self.run_online(&instance, &job.point, job.seed)?,
            v => self.run_offline(&instance, &job.point, v)?,
        };
        let overlap = match (self.reference, job.variant) {
            (Reference::Binary, Variant::Online) => {
                let reference = self.run_online_with(&instance, &job.point, job.seed, UtilityModel::Binary)?;
                Some(overlap_ratio(&result, &reference)?)
            }
            _ => None,
        };
        let is_offline = job.variant != Variant::Online;
        let label = self.row_label(job.variant);
        Ok(MetricsRow {
            config: fingerprint(&label, &self.canonical(&job.point, job.variant)),
            seed: job.seed,
            k: job.point.k,
            q: instance.num_periods(),
            r: job.point.r.or_else(|| common_radius(&instance)),
            heuristic: if is_offline { "offline".into() } else { self.heuristic.name().into() },
            budget: self.budget_label(job.variant),
            utility: if is_offline { "binary".into() } else { self.utility.name().into() },
            alpha: if is_offline { None } else { job.point.alpha },
            coverage: result.coverage(),
            total_utility: result.total_utility(),
            max_activations: result.ledger.max(),
            mean_activations: result.ledger.mean_active(),
            runtime_ms: result.mean_runtime_ms(),
            histogram: result.ledger.histogram(),
            overlap,
        })
    }

    fn canonical(&self, point: &SweepPoint, variant: Variant) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.sweep = Sweep::default();
        c.jobs = None;
        if let Source::Instance(inst) = &c.source {
            c.source = Source::File(crate::instance_file::write_instance(inst).into());
        }
        format!("{c:?}|{point:?}|{variant:?}")
    }
}

/// The radius shared by every task, if there is one.
fn common_radius(instance: &CampaignInstance) -> Option<f64> {
    let mut radii = instance.tasks().iter().map(|t| t.radius);
    let first = radii.next()?;
    radii.all(|r| r == first).then_some(first)
}

/// Runs every (sweep point, variant, seed) job and returns the rows sorted by
/// `(config, seed)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for point in cfg.sweep_points() {
        for variant in cfg.variants() {
            for &seed in &cfg.seeds {
                jobs.push(Job { point, variant, seed });
            }
        }
    }
    let run = |job: &Job| {
        cfg.run_job(job).map_err(|e| Error::Job {
            context: format!("{} seed={} ({})", job.point.describe(), job.seed, cfg.row_label(job.variant)),
            source: Box::new(e),
        })
    };
    let mut rows = execute(&jobs, cfg.jobs, run)?;
    rows.sort_by(|a, b| a.config.cmp(&b.config).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

#[cfg(feature = "parallel")]
fn execute<F>(jobs: &[Job], threads: Option<usize>, f: F) -> Result<Vec<MetricsRow>>
where
    F: Fn(&Job) -> Result<MetricsRow> + Sync + Send,
{
    use rayon::prelude::*;
    if threads == Some(1) || jobs.len() < 2 {
        return jobs.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Configuration(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn execute<F>(jobs: &[Job], _threads: Option<usize>, f: F) -> Result<Vec<MetricsRow>>
where
    F: Fn(&Job) -> Result<MetricsRow>,
{
    jobs.iter().map(f).collect()
}
