//! Synthetic campaigns and check-in ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Area, CampaignInstance, Point, TaskId, TaskSpec, WorkerArrival, WorkerId};

/// Per-period worker count model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArrivalModel {
    /// `round(mean * (1 + amplitude * cos(2π i / wavelength)))`; the
    /// wavelength defaults to `Q / 4`.
    Cosine {
        mean: f64,
        amplitude: f64,
        wavelength: Option<f64>,
    },
    Poisson {
        mean: f64,
    },
}

impl ArrivalModel {
    pub fn cosine(mean: f64) -> Self {
        ArrivalModel::Cosine {
            mean,
            amplitude: 0.5,
            wavelength: None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ArrivalModel::Cosine { mean, .. } | ArrivalModel::Poisson { mean } => mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Point,
    pub sigma: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub enum SpatialDistribution {
    #[default]
    Uniform,
    /// Samples falling outside the area are redrawn.
    GaussianMixture(Vec<GaussianComponent>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub periods: u32,
    pub arrivals: ArrivalModel,
    pub tasks_per_period: usize,
    pub radius_choices: Vec<f64>,
    pub spatial: SpatialDistribution,
    pub area: Area,
    /// Number of distinct worker ids; defaults to `ceil(3 * mean)`.
    pub pool_size: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            periods: 28,
            arrivals: ArrivalModel::cosine(20.0),
            tasks_per_period: 200,
            radius_choices: vec![5.0],
            spatial: SpatialDistribution::Uniform,
            area: Area::new(0.0, 0.0, 100.0, 100.0).expect("valid area"),
            pool_size: None,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if self.periods < 1 {
            return bad("periods must be at least 1".into());
        }
        let mean = self.arrivals.mean();
        if !(mean > 0.0 && mean.is_finite()) {
            return bad(format!("arrival mean must be positive, got {mean}"));
        }
        if let ArrivalModel::Cosine {
            amplitude, wavelength, ..
        } = self.arrivals
        {
            if !(0.0..=1.0).contains(&amplitude) {
                return bad(format!("cosine amplitude must lie in [0, 1], got {amplitude}"));
            }
            if let Some(p) = wavelength {
                if !(p > 0.0) {
                    return bad(format!("cosine wavelength must be positive, got {p}"));
                }
            }
        }
        if self.radius_choices.is_empty() || self.radius_choices.iter().any(|r| !(*r > 0.0)) {
            return bad(format!("radius choices must be positive, got {:?}", self.radius_choices));
        }
        if self.pool_size == Some(0) {
            return bad("worker pool must not be empty".into());
        }
        if let SpatialDistribution::GaussianMixture(parts) = &self.spatial {
            if parts.is_empty() {
                return bad("gaussian mixture needs at least one component".into());
            }
            for c in parts {
                if !(c.sigma > 0.0) || !(c.weight > 0.0) {
                    return bad("mixture components need positive sigma and weight".into());
                }
            }
        }
        Ok(())
    }

    pub fn pool(&self) -> usize {
        self.pool_size.unwrap_or_else(|| (3.0 * self.arrivals.mean()).ceil() as usize)
    }

    /// Cosine worker count for period `i`, before capping at the pool size.
    pub fn cosine_count(mean: f64, amplitude: f64, wavelength: f64, i: u32) -> usize {
        let v = mean * (1.0 + amplitude * (2.0 * std::f64::consts::PI * i as f64 / wavelength).cos());
        v.round().max(0.0) as usize
    }
}

struct Sampler<'a> {
    area: &'a Area,
    mixture: Option<(WeightedIndex<f64>, Vec<(Point, Normal<f64>)>)>,
}

impl<'a> Sampler<'a> {
    fn new(area: &'a Area, spatial: &SpatialDistribution) -> Result<Self> {
        let mixture = match spatial {
            SpatialDistribution::Uniform => None,
            SpatialDistribution::GaussianMixture(parts) => {
                let index = WeightedIndex::new(parts.iter().map(|c| c.weight))
                    .map_err(|e| Error::Configuration(format!("mixture weights: {e}")))?;
                let normals = parts
                    .iter()
                    .map(|c| {
                        Normal::new(0.0, c.sigma)
                            .map(|n| (c.center, n))
                            .map_err(|e| Error::Configuration(format!("mixture sigma: {e}")))
                    })
                    .collect::<Result<_>>()?;
                Some((index, normals))
            }
        };
        Ok(Sampler { area, mixture })
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::new(
            self.area.min.x + rng.random::<f64>() * self.area.width(),
            self.area.min.y + rng.random::<f64>() * self.area.height(),
        )
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        let Some((index, normals)) = &self.mixture else {
            return self.uniform(rng);
        };
        for _ in 0..1000 {
            let (c, n) = &normals[index.sample(rng)];
            let p = Point::new(c.x + n.sample(rng), c.y + n.sample(rng));
            if self.area.contains(&p) {
                return p;
            }
        }
        // Components centered far outside the area; degrade to uniform.
        self.uniform(rng)
    }
}

/// Generates a campaign; identical configs give identical instances.
pub fn generate_campaign(cfg: &GeneratorConfig) -> Result<CampaignInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = Sampler::new(&cfg.area, &cfg.spatial)?;
    let q = cfg.periods;
    let pool = cfg.pool();

    let mut tasks = Vec::with_capacity(cfg.tasks_per_period * q as usize);
    let mut arrivals = Vec::new();
    for i in 1..=q {
        let count = match cfg.arrivals {
            ArrivalModel::Cosine {
                mean,
                amplitude,
                wavelength,
            } => GeneratorConfig::cosine_count(mean, amplitude, wavelength.unwrap_or(q as f64 / 4.0), i),
            ArrivalModel::Poisson { mean } => {
                let d = Poisson::new(mean).map_err(|e| Error::Configuration(format!("poisson mean: {e}")))?;
                d.sample(&mut rng) as usize
            }
        };
        let mut ids = sample(&mut rng, pool, count.min(pool)).into_vec();
        ids.sort_unstable();
        for id in ids {
            arrivals.push(WorkerArrival {
                worker: WorkerId(id as u32 + 1),
                period: i,
                location: sampler.sample(&mut rng),
            });
        }
        for _ in 0..cfg.tasks_per_period {
            let radius = cfg.radius_choices[rng.random_range(0..cfg.radius_choices.len())];
            let duration = rng.random_range(1..=q);
            tasks.push(TaskSpec {
                id: TaskId(tasks.len() as u32 + 1),
                location: sampler.sample(&mut rng),
                radius,
                release: i,
                duration,
            });
        }
    }
    CampaignInstance::new(q, cfg.area, tasks, arrivals, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckinOptions {
    /// Length of one period in timestamp units.
    pub period_length: f64,
    pub area: Area,
    /// Start of period 1; defaults to the earliest timestamp.
    pub start: Option<f64>,
    /// Campaign length; defaults to the last occupied period.
    pub num_periods: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestReport {
    pub instance: CampaignInstance,
    pub rows: usize,
    pub dropped_out_of_area: usize,
    /// Rows before `start` or after the last period.
    pub dropped_out_of_range: usize,
    pub duplicates: usize,
}

#[derive(Debug, Deserialize, Serialize)]
struct CheckinRow {
    user_id: u32,
    timestamp: f64,
    x_km: f64,
    y_km: f64,
}

/// Buckets a check-in CSV into periods `[start + (i-1)·len, start + i·len)`.
/// Each user yields at most one arrival per period, at its earliest check-in.
pub fn ingest_checkins(path: impl AsRef<Path>, tasks: Vec<TaskSpec>, opts: &CheckinOptions) -> Result<IngestReport> {
    let file = std::fs::File::open(path)?;
    ingest_checkins_from(file, tasks, opts)
}

pub fn ingest_checkins_from(reader: impl std::io::Read, tasks: Vec<TaskSpec>, opts: &CheckinOptions) -> Result<IngestReport> {
    if !(opts.period_length > 0.0) {
        return Err(Error::Configuration(format!(
            "period length must be positive, got {}",
            opts.period_length
        )));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (n, rec) in rdr.deserialize::<CheckinRow>().enumerate() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(n + 2, |p| p.line() as usize);
            Error::parse(line, format!("malformed check-in: {e}"))
        })?;
        if !row.timestamp.is_finite() {
            return Err(Error::parse(n + 2, "timestamp must be finite"));
        }
        rows.push((n, row));
    }
    let total = rows.len();
    let start = opts
        .start
        .unwrap_or_else(|| rows.iter().map(|(_, r)| r.timestamp).fold(f64::INFINITY, f64::min));
    // Stable: equal timestamps keep file order.
    rows.sort_by(|a, b| a.1.timestamp.total_cmp(&b.1.timestamp));

    let mut dropped_area = 0;
    let mut dropped_range = 0;
    let mut duplicates = 0;
    let mut arrivals: BTreeMap<(u32, u32), Point> = BTreeMap::new();
    for (_, r) in &rows {
        let p = Point::new(r.x_km, r.y_km);
        if !opts.area.contains(&p) {
            dropped_area += 1;
            continue;
        }
        let offset = (r.timestamp - start) / opts.period_length;
        let period = offset.floor() + 1.0;
        if offset < 0.0 || period > opts.num_periods.unwrap_or(u32::MAX) as f64 {
            dropped_range += 1;
            continue;
        }
        match arrivals.entry((period as u32, r.user_id)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(p);
            }
            std::collections::btree_map::Entry::Occupied(_) => duplicates += 1,
        }
    }
    let q = opts.num_periods.unwrap_or_else(|| {
        let last_arrival = arrivals.keys().map(|k| k.0).max().unwrap_or(1);
        let last_task = tasks.iter().map(|t| t.release).max().unwrap_or(1);
        last_arrival.max(last_task)
    });
    let arrivals = arrivals
        .into_iter()
        .map(|((period, user), location)| WorkerArrival {
            worker: WorkerId(user),
            period,
            location,
        })
        .collect();
    let instance = CampaignInstance::new(q, opts.area, tasks, arrivals, None)?;
    Ok(IngestReport {
        instance,
        rows: total,
        dropped_out_of_area: dropped_area,
        dropped_out_of_range: dropped_range,
        duplicates,
    })
}

/// Writes one check-in per arrival at the start of its period.
pub fn export_checkins(
    instance: &CampaignInstance,
    writer: impl std::io::Write,
    start: f64,
    period_length: f64,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for a in instance.arrivals() {
        w.serialize(CheckinRow {
            user_id: a.worker.0,
            timestamp: start + (a.period - 1) as f64 * period_length,
            x_km: a.location.x,
            y_km: a.location.y,
        })?;
    }
    w.flush()?;
    Ok(())
}
