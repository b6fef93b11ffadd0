//! Browser demo: JSON in, JSON out, so the page needs no generated bindings
//! beyond three functions.

use hyperlocal::budget::{allocate_equal, run_adapt, run_fixed, run_naive, AdaptConfig, LocalHeuristic};
use hyperlocal::campaign::RunOptions;
use hyperlocal::heuristics::{task_utility, Heuristic, UtilityModel};
use hyperlocal::model::Area;
use hyperlocal::workload::{generate_campaign, ArrivalModel, GeneratorConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct CampaignParams {
    pub seed: u64,
    pub periods: u32,
    pub mean: f64,
    pub amplitude: f64,
    pub tasks_per_period: usize,
    pub radius: f64,
    pub budget: usize,
    pub heuristic: String,
}

impl Default for CampaignParams {
    fn default() -> Self {
        CampaignParams {
            seed: 0,
            periods: 28,
            mean: 20.0,
            amplitude: 0.5,
            tasks_per_period: 200,
            radius: 5.0,
            budget: 140,
            heuristic: "basic".into(),
        }
    }
}

impl CampaignParams {
    fn generator(&self) -> Result<GeneratorConfig, String> {
        Ok(GeneratorConfig {
            seed: self.seed,
            periods: self.periods,
            arrivals: ArrivalModel::Cosine {
                mean: self.mean,
                amplitude: self.amplitude,
                wavelength: None,
            },
            tasks_per_period: self.tasks_per_period,
            radius_choices: vec![self.radius],
            area: Area::new(0.0, 0.0, 100.0, 100.0).map_err(|e| e.to_string())?,
            ..GeneratorConfig::default()
        })
    }

    fn heuristic(&self) -> Result<Heuristic, String> {
        match self.heuristic.as_str() {
            "basic" => Ok(Heuristic::Basic),
            "temporal" => Ok(Heuristic::Temporal),
            other => Err(format!("unknown heuristic `{other}`")),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub workers: Vec<usize>,
    pub tasks: Vec<usize>,
    pub distinct_workers: usize,
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub name: &'static str,
    pub cumulative: Vec<usize>,
    pub spent: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub workers: Vec<usize>,
    pub strategies: Vec<Trace>,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
pub struct CurveParams {
    pub skew: f64,
    pub bins: u32,
    pub samples: usize,
}

impl Default for CurveParams {
    fn default() -> Self {
        CurveParams {
            skew: 1.0,
            bins: 10,
            samples: 101,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Curves {
    /// Distance as a fraction of the radius.
    pub x: Vec<f64>,
    pub binary: Vec<f64>,
    pub linear: Vec<f64>,
    pub zipf: Vec<f64>,
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, String> {
    if json.trim().is_empty() {
        serde_json::from_str("{}").map_err(|e| e.to_string())
    } else {
        serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
    }
}

pub fn summary(p: &CampaignParams) -> Result<Summary, String> {
    let inst = generate_campaign(&p.generator()?).map_err(|e| e.to_string())?;
    let mut tasks = vec![0; inst.num_periods() as usize];
    for t in inst.tasks() {
        tasks[t.release as usize - 1] += 1;
    }
    let mut ids: Vec<_> = inst.arrivals().iter().map(|a| a.worker).collect();
    ids.sort();
    ids.dedup();
    Ok(Summary {
        workers: inst.worker_counts(),
        tasks,
        distinct_workers: ids.len(),
    })
}

pub fn compare(p: &CampaignParams) -> Result<Comparison, String> {
    let inst = generate_campaign(&p.generator()?).map_err(|e| e.to_string())?;
    let local = LocalHeuristic::new(p.heuristic()?, UtilityModel::Binary);
    let opts = RunOptions {
        timing: false,
        ..RunOptions::default()
    };
    let equal = allocate_equal(p.budget, inst.num_periods());
    let err = |e: hyperlocal::Error| e.to_string();
    let runs = [
        ("Equal", run_fixed(&inst, &equal, local, &opts).map_err(err)?),
        ("Naive", run_naive(&inst, p.budget, local, &opts).map_err(err)?),
        (
            "Adapt",
            run_adapt(&inst, p.budget, local, &AdaptConfig::default(), &equal, p.seed, &opts).map_err(err)?,
        ),
    ];
    Ok(Comparison {
        workers: inst.worker_counts(),
        strategies: runs
            .into_iter()
            .map(|(name, r)| Trace {
                name,
                cumulative: r.coverage_trace(),
                spent: r.per_period_counts(),
            })
            .collect(),
    })
}

pub fn curves(p: &CurveParams) -> Result<Curves, String> {
    let zipf = UtilityModel::Zipf {
        skew: p.skew,
        bins: p.bins,
    };
    zipf.validate().map_err(|e| e.to_string())?;
    let n = p.samples.clamp(2, 2001);
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let eval = |m: &UtilityModel| -> Result<Vec<f64>, String> {
        x.iter().map(|&d| task_utility(m, d, 1.0).map_err(|e| e.to_string())).collect()
    };
    Ok(Curves {
        binary: eval(&UtilityModel::Binary)?,
        linear: eval(&UtilityModel::Linear)?,
        zipf: eval(&zipf)?,
        x,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, String> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

pub fn summary_json(params: &str) -> Result<String, String> {
    to_json(parse(params).and_then(|p| summary(&p)))
}

pub fn compare_json(params: &str) -> Result<String, String> {
    to_json(parse(params).and_then(|p| compare(&p)))
}

pub fn curves_json(params: &str) -> Result<String, String> {
    to_json(parse(params).and_then(|p| curves(&p)))
}

#[wasm_bindgen(js_name = campaignSummary)]
pub fn campaign_summary(params: &str) -> Result<String, JsError> {
    summary_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compareStrategies)]
pub fn compare_strategies(params: &str) -> Result<String, JsError> {
    compare_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = utilityCurves)]
pub fn utility_curves(params: &str) -> Result<String, JsError> {
    curves_json(params).map_err(|e| JsError::new(&e))
}
