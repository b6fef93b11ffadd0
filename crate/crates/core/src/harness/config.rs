//! Dotted `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::budget::{EpsilonTable, MeanGainRule};
use crate::error::{Error, Result};
use crate::heuristics::{Heuristic, UtilityModel};
use crate::model::{Area, CampaignInstance, Point};
use crate::offline::DEFAULT_CAP;
use crate::workload::{ArrivalModel, GaussianComponent, GeneratorConfig, SpatialDistribution};

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Generator(GeneratorConfig),
    File(PathBuf),
    Instance(Arc<CampaignInstance>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedStrategy {
    Equal,
    Random,
    Workload,
    Explicit,
}

impl FixedStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            FixedStrategy::Equal => "equal",
            FixedStrategy::Random => "random",
            FixedStrategy::Workload => "workload",
            FixedStrategy::Explicit => "explicit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicStrategy {
    Naive,
    Adapt,
}

impl DynamicStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            DynamicStrategy::Naive => "naive",
            DynamicStrategy::Adapt => "adapt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetMode {
    Fixed(FixedStrategy),
    Dynamic(DynamicStrategy),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    Equal,
    Workload,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetSpec {
    pub mode: BudgetMode,
    pub total: usize,
    pub per_period: Option<Vec<usize>>,
    pub eps: EpsilonTable,
    pub baseline: BaselineKind,
    pub mean_rule: MeanGainRule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MooSpec {
    pub enabled: bool,
    pub alpha: f64,
    pub population: usize,
    pub generations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfflineSolver {
    Exhaustive,
    Greedy,
}

impl OfflineSolver {
    pub fn name(&self) -> &'static str {
        match self {
            OfflineSolver::Exhaustive => "exhaustive",
            OfflineSolver::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfflineSpec {
    pub solver: Option<OfflineSolver>,
    pub cap: u64,
    /// Skip the online pipeline.
    pub only: bool,
}

/// Where the spatial heuristic's visit histograms come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisitHistory {
    /// Arrivals of the evaluated campaign's earlier periods.
    Own,
    /// All arrivals of the historical campaign.
    Training,
}

/// Run compared against for the overlap metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    None,
    /// The same pipeline under binary utility.
    Binary,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sweep {
    pub k: Option<Vec<usize>>,
    pub r: Option<Vec<f64>>,
    pub q: Option<Vec<u32>>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub label: Option<String>,
    pub source: Source,
    pub heuristic: Heuristic,
    pub utility: UtilityModel,
    pub spatial_cell_size: f64,
    pub spatial_history: VisitHistory,
    pub budget: BudgetSpec,
    pub moo: MooSpec,
    pub offline: OfflineSpec,
    pub seeds: Vec<u64>,
    pub sweep: Sweep,
    pub reference: Reference,
    /// Record per-period wall-clock time. Off by default so that output bytes
    /// depend only on config and seed.
    pub timing: bool,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            label: None,
            source: Source::Generator(GeneratorConfig::default()),
            heuristic: Heuristic::Basic,
            utility: UtilityModel::Binary,
            spatial_cell_size: 1.0,
            spatial_history: VisitHistory::Own,
            budget: BudgetSpec {
                mode: BudgetMode::Fixed(FixedStrategy::Equal),
                total: 0,
                per_period: None,
                eps: EpsilonTable::default(),
                baseline: BaselineKind::Equal,
                mean_rule: MeanGainRule::Smoothed,
            },
            moo: MooSpec {
                enabled: false,
                alpha: 0.5,
                population: 100,
                generations: 200,
            },
            offline: OfflineSpec {
                solver: None,
                cap: DEFAULT_CAP,
                only: false,
            },
            seeds: vec![0],
            sweep: Sweep::default(),
            reference: Reference::None,
            timing: false,
            jobs: None,
        }
    }
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Configuration(format!("{key}: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

fn choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    let v = v.trim();
    options.iter().find(|(n, _)| *n == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::Configuration(format!("{key}: expected one of {}, got `{v}`", names.join("|")))
    })
}

fn mixture(key: &str, v: &str) -> Result<Vec<GaussianComponent>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|part| {
            let f: Vec<f64> = part.split(':').map(|x| scalar(key, x)).collect::<Result<_>>()?;
            match f.as_slice() {
                &[x, y, sigma, weight] => Ok(GaussianComponent {
                    center: Point::new(x, y),
                    sigma,
                    weight,
                }),
                _ => Err(Error::Configuration(format!("{key}: components are `x:y:sigma:weight`, got `{part}`"))),
            }
        })
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub(crate) fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(n + 1, format!("expected `key = value`, got `{line}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Builds a config from file text plus `key=value` overrides applied last.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in parse_pairs(text)?.into_iter().chain(overrides.iter().cloned()) {
            pairs.insert(k, v);
        }
        Self::from_pairs(&pairs)
    }

    /// Generator settings from `gen.*` lines and overrides; any other key is
    /// an error.
    pub fn parse_generator(text: &str, overrides: &[(String, String)]) -> Result<GeneratorConfig> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in parse_pairs(text)?.into_iter().chain(overrides.iter().cloned()) {
            if !k.starts_with("gen.") {
                return Err(Error::Configuration(format!("`{k}` is not a generator key")));
            }
            pairs.insert(k, v);
        }
        pairs.insert("budget.total".into(), "0".into());
        match Self::from_pairs(&pairs)?.source {
            Source::Generator(g) => {
                g.validate()?;
                Ok(g)
            }
            _ => unreachable!("gen.* keys select the generator source"),
        }
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut generator = GeneratorConfig::default();
        let mut uses_generator = false;
        let mut file: Option<PathBuf> = None;
        let mut mode = "fixed";
        let mut strategy: Option<&str> = None;
        let mut skew = 1.0;
        let mut bins = 10;
        let mut arrivals = "cosine";
        let mut amplitude = 0.5;
        let mut wavelength = None;
        let mut mean = 20.0;
        let mut total_given = false;

        for (key, v) in pairs {
            let k = key.as_str();
            if k.starts_with("gen.") {
                uses_generator = true;
            }
            match k {
                "label" => cfg.label = Some(v.clone()),
                "source.file" => file = Some(PathBuf::from(v)),
                "gen.periods" => generator.periods = scalar(k, v)?,
                "gen.arrivals" => arrivals = choice(k, v, &[("cosine", "cosine"), ("poisson", "poisson")])?,
                "gen.mean" => mean = scalar(k, v)?,
                "gen.amplitude" => amplitude = scalar(k, v)?,
                "gen.wavelength" => wavelength = Some(scalar(k, v)?),
                "gen.tasks_per_period" => generator.tasks_per_period = scalar(k, v)?,
                "gen.radius" => generator.radius_choices = list(k, v)?,
                "gen.pool" => generator.pool_size = Some(scalar(k, v)?),
                "gen.area" => {
                    let a: Vec<f64> = list(k, v)?;
                    let &[x0, y0, x1, y1] = a.as_slice() else {
                        return Err(Error::Configuration(format!("{k}: expected xmin,ymin,xmax,ymax")));
                    };
                    generator.area = Area::new(x0, y0, x1, y1)?;
                }
                "gen.spatial" => {
                    if choice(k, v, &[("uniform", true), ("mixture", false)])? {
                        generator.spatial = SpatialDistribution::Uniform;
                    } else if generator.spatial == SpatialDistribution::Uniform {
                        generator.spatial = SpatialDistribution::GaussianMixture(Vec::new());
                    }
                }
                "gen.mixture" => generator.spatial = SpatialDistribution::GaussianMixture(mixture(k, v)?),
                "heuristic" => {
                    cfg.heuristic = choice(
                        k,
                        v,
                        &[
                            ("basic", Heuristic::Basic),
                            ("temporal", Heuristic::Temporal),
                            ("spatial", Heuristic::Spatial),
                        ],
                    )?
                }
                "utility" => {
                    cfg.utility = choice(
                        k,
                        v,
                        &[
                            ("binary", UtilityModel::Binary),
                            ("linear", UtilityModel::Linear),
                            ("zipf", UtilityModel::zipf(1.0)),
                        ],
                    )?
                }
                "utility.skew" => skew = scalar(k, v)?,
                "utility.bins" => bins = scalar(k, v)?,
                "spatial.cell_size" => cfg.spatial_cell_size = scalar(k, v)?,
                "spatial.history" => {
                    cfg.spatial_history =
                        choice(k, v, &[("own", VisitHistory::Own), ("training", VisitHistory::Training)])?
                }
                "budget.mode" => mode = choice(k, v, &[("fixed", "fixed"), ("dynamic", "dynamic")])?,
                "budget.strategy" => strategy = Some(v.as_str()),
                "budget.total" => {
                    cfg.budget.total = scalar(k, v)?;
                    total_given = true;
                }
                "budget.per_period" => cfg.budget.per_period = Some(list(k, v)?),
                "budget.eps" => {
                    let e: Vec<f64> = list(k, v)?;
                    let arr: [f64; 4] = e
                        .try_into()
                        .map_err(|_| Error::Configuration(format!("{k}: expected four values")))?;
                    cfg.budget.eps = EpsilonTable::new(arr)?;
                }
                "budget.baseline" => {
                    cfg.budget.baseline =
                        choice(k, v, &[("equal", BaselineKind::Equal), ("workload", BaselineKind::Workload)])?
                }
                "budget.mean_rule" => {
                    cfg.budget.mean_rule = choice(
                        k,
                        v,
                        &[("smoothed", MeanGainRule::Smoothed), ("running", MeanGainRule::Running)],
                    )?
                }
                "moo.enabled" => cfg.moo.enabled = scalar(k, v)?,
                "moo.alpha" => cfg.moo.alpha = scalar(k, v)?,
                "moo.population" => cfg.moo.population = scalar(k, v)?,
                "moo.generations" => cfg.moo.generations = scalar(k, v)?,
                "offline.solver" => {
                    cfg.offline.solver = choice(
                        k,
                        v,
                        &[
                            ("none", None),
                            ("exhaustive", Some(OfflineSolver::Exhaustive)),
                            ("greedy", Some(OfflineSolver::Greedy)),
                        ],
                    )?
                }
                "offline.cap" => cfg.offline.cap = scalar(k, v)?,
                "offline.only" => cfg.offline.only = scalar(k, v)?,
                "seeds" => cfg.seeds = list(k, v)?,
                "sweep.K" => cfg.sweep.k = Some(list(k, v)?),
                "sweep.r" => cfg.sweep.r = Some(list(k, v)?),
                "sweep.Q" => cfg.sweep.q = Some(list(k, v)?),
                "sweep.alpha" => cfg.sweep.alpha = Some(list(k, v)?),
                "metrics.reference" => {
                    cfg.reference = choice(k, v, &[("none", Reference::None), ("binary", Reference::Binary)])?
                }
                "metrics.timing" => cfg.timing = scalar(k, v)?,
                "harness.jobs" => cfg.jobs = Some(scalar(k, v)?),
                _ => return Err(Error::Configuration(format!("unknown key `{k}`"))),
            }
        }

        if let UtilityModel::Zipf { .. } = cfg.utility {
            cfg.utility = UtilityModel::Zipf { skew, bins };
        }
        generator.arrivals = match arrivals {
            "poisson" => ArrivalModel::Poisson { mean },
            _ => ArrivalModel::Cosine {
                mean,
                amplitude,
                wavelength,
            },
        };
        cfg.source = match (file, uses_generator) {
            (Some(_), true) => {
                return Err(Error::Configuration(
                    "source.file and gen.* keys are mutually exclusive".into(),
                ))
            }
            (Some(path), false) => Source::File(path),
            (None, _) => Source::Generator(generator),
        };
        cfg.budget.mode = match (mode, strategy) {
            ("dynamic", s) => BudgetMode::Dynamic(choice(
                "budget.strategy",
                s.unwrap_or("adapt"),
                &[("naive", DynamicStrategy::Naive), ("adapt", DynamicStrategy::Adapt)],
            )?),
            (_, s) => BudgetMode::Fixed(choice(
                "budget.strategy",
                s.unwrap_or("equal"),
                &[
                    ("equal", FixedStrategy::Equal),
                    ("random", FixedStrategy::Random),
                    ("workload", FixedStrategy::Workload),
                    ("explicit", FixedStrategy::Explicit),
                ],
            )?),
        };
        if let Some(per) = &cfg.budget.per_period {
            let sum: usize = per.iter().sum();
            if total_given && cfg.budget.total != sum {
                return Err(Error::Configuration(format!(
                    "budget.total = {} disagrees with budget.per_period summing to {sum}",
                    cfg.budget.total
                )));
            }
            cfg.budget.total = sum;
            total_given = true;
        }
        if !total_given && cfg.sweep.k.is_none() {
            return Err(Error::Configuration("budget.total (or sweep.K) is required".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Configuration(m.into()));
        let s = &self.sweep;
        if s.k.as_ref().is_some_and(Vec::is_empty)
            || s.r.as_ref().is_some_and(Vec::is_empty)
            || s.q.as_ref().is_some_and(Vec::is_empty)
            || s.alpha.as_ref().is_some_and(Vec::is_empty)
        {
            return bad("sweep axes must not be empty");
        }
        if s.alpha.is_some() && !self.moo.enabled {
            return bad("sweep.alpha requires moo.enabled = true");
        }
        if s.q.is_some() && !matches!(self.source, Source::Generator(_)) {
            return bad("sweep.Q requires a generated source");
        }
        if s.r.as_ref().is_some_and(|r| r.iter().any(|r| !(*r > 0.0))) {
            return bad("sweep.r values must be positive");
        }
        if self.budget.mode == BudgetMode::Fixed(FixedStrategy::Explicit) && s.k.is_some() {
            return bad("sweep.K cannot be combined with explicit per-period budgets");
        }
        if !(self.spatial_cell_size > 0.0) {
            return bad("spatial.cell_size must be positive");
        }
        if self.offline.only && self.offline.solver.is_none() {
            return bad("offline.only requires offline.solver");
        }
        self.utility.validate()?;
        if self.moo.enabled {
            let alphas = s.alpha.clone().unwrap_or_else(|| vec![self.moo.alpha]);
            let fixed = matches!(self.budget.mode, BudgetMode::Fixed(_));
            for a in alphas {
                let ok = if fixed { a > 0.0 && a < 1.0 } else { a > 0.0 && a <= 1.0 };
                if !ok {
                    return Err(Error::Configuration(format!("moo alpha {a} out of range")));
                }
            }
            if self.moo.population < 2 || self.moo.generations == 0 {
                return bad("moo.population must be at least 2 and moo.generations positive");
            }
        }
        if let Source::Generator(g) = &self.source {
            g.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, &[])
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse(
            "budget.total = 10\nheuristic = temporal # trailing comment\n",
            &[("heuristic".into(), "spatial".into())],
        )
        .unwrap();
        assert_eq!(cfg.heuristic, Heuristic::Spatial);
        assert_eq!(cfg.budget.total, 10);
        assert_eq!(cfg.seeds, vec![0]);
    }

    #[test]
    fn one_source_only() {
        assert!(parse("budget.total = 1\nsource.file = x.txt\ngen.periods = 3\n").is_err());
        assert!(matches!(parse("budget.total = 1\nsource.file = x.txt\n").unwrap().source, Source::File(_)));
    }

    #[test]
    fn sweep_axes_non_empty() {
        assert!(parse("sweep.K =\n").is_err());
        assert!(parse("budget.total = 1\nsweep.alpha = 0.5\n").is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse("budget.totl = 1\n").unwrap_err();
        assert!(e.to_string().contains("budget.totl"));
    }

    #[test]
    fn zipf_parameters() {
        let cfg = parse("budget.total = 1\nutility = zipf\nutility.skew = 2\n").unwrap();
        assert_eq!(cfg.utility, UtilityModel::Zipf { skew: 2.0, bins: 10 });
    }

    #[test]
    fn empty_seed_list() {
        assert!(parse("budget.total = 1\nseeds =\n").unwrap().seeds.is_empty());
    }

    #[test]
    fn generator_keys_only() {
        let g = ExperimentConfig::parse_generator("gen.periods = 5\ngen.arrivals = poisson\n", &[]).unwrap();
        assert_eq!(g.periods, 5);
        assert!(ExperimentConfig::parse_generator("heuristic = basic\n", &[]).is_err());
    }

    #[test]
    fn malformed_line() {
        assert!(matches!(parse("budget.total 1\n"), Err(Error::Parse { line: 1, .. })));
    }
}
