use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::campaign::CampaignResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "config,seed,K,Q,r,heuristic,budget,utility,alpha,coverage,total_utility,max_activations,mean_activations,runtime_ms";

/// One output row per (config, seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: u32,
    pub r: Option<f64>,
    pub heuristic: String,
    pub budget: String,
    pub utility: String,
    pub alpha: Option<f64>,
    pub coverage: usize,
    pub total_utility: f64,
    pub max_activations: u32,
    pub mean_activations: f64,
    /// Mean per-period selection time.
    pub runtime_ms: f64,
    /// Activation count → number of workers; written to the `.hist.csv` file.
    #[serde(skip)]
    pub histogram: BTreeMap<u32, usize>,
    /// Overlap with the reference run, when one is configured.
    #[serde(skip)]
    pub overlap: Option<f64>,
}

/// `label-xxxxxxxxxxxxxxxx`: the label plus the first 8 bytes of the SHA-256
/// of the canonical config text.
pub fn fingerprint(label: &str, canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("{label}-{hex}")
}

/// Jaccard index of the `(worker, period)` selections; 1 when both are empty.
pub fn overlap_ratio(a: &CampaignResult, b: &CampaignResult) -> Result<f64> {
    if a.periods.len() != b.periods.len() {
        return Err(Error::Configuration(format!(
            "overlap between runs of {} and {} periods",
            a.periods.len(),
            b.periods.len()
        )));
    }
    let sa = a.selections();
    let sb = b.selections();
    let union = sa.union(&sb).count();
    if union == 0 {
        return Ok(1.0);
    }
    Ok(sa.intersection(&sb).count() as f64 / union as f64)
}

pub fn write_csv(rows: &[MetricsRow], writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct HistRow {
    config: String,
    seed: u64,
    activations: u32,
    worker_count: usize,
}

pub fn write_histograms(rows: &[MetricsRow], writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["config", "seed", "activations", "worker_count"])?;
    for row in rows {
        for (&activations, &worker_count) in &row.histogram {
            w.serialize(HistRow {
                config: row.config.clone(),
                seed: row.seed,
                activations,
                worker_count,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn hist_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hist.csv");
    PathBuf::from(s)
}

/// Writes `path` and its `<path>.hist.csv` sibling.
pub fn emit_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_csv(rows, std::fs::File::create(path)?)?;
    write_histograms(rows, std::fs::File::create(hist_path(path))?)?;
    Ok(())
}

pub fn read_csv_from(reader: impl Read) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::parse(1, format!("unexpected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<MetricsRow>() {
        rows.push(rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?);
    }
    Ok(rows)
}

/// Reads rows back, filling histograms from the sibling file when present.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut rows = read_csv_from(std::fs::File::open(path)?)?;
    let hist = hist_path(path);
    if hist.exists() {
        let mut by_key = read_histograms(&hist)?;
        for row in &mut rows {
            if let Some(h) = by_key.remove(&(row.config.clone(), row.seed)) {
                row.histogram = h;
            }
        }
    }
    Ok(rows)
}

pub fn read_histograms(path: impl AsRef<Path>) -> Result<BTreeMap<(String, u64), BTreeMap<u32, usize>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out: BTreeMap<(String, u64), BTreeMap<u32, usize>> = BTreeMap::new();
    for rec in rdr.deserialize::<HistRow>() {
        let r = rec?;
        out.entry((r.config, r.seed)).or_default().insert(r.activations, r.worker_count);
    }
    Ok(out)
}

/// Linear-interpolation quantile of sorted data at `p ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub config: String,
    pub metric: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn metric_value(row: &MetricsRow, metric: &str) -> Option<f64> {
    Some(match metric {
        "coverage" => row.coverage as f64,
        "total_utility" => row.total_utility,
        "max_activations" => row.max_activations as f64,
        "mean_activations" => row.mean_activations,
        "runtime_ms" => row.runtime_ms,
        _ => return None,
    })
}

/// Five-number summary of `metric` per config, in config order.
pub fn stats(rows: &[MetricsRow], metric: &str) -> Result<Vec<StatsRow>> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let v = metric_value(row, metric)
            .ok_or_else(|| Error::Configuration(format!("no numeric column `{metric}`")))?;
        groups.entry(&row.config).or_default().push(v);
    }
    Ok(groups
        .into_iter()
        .map(|(config, mut v)| {
            v.sort_by(f64::total_cmp);
            StatsRow {
                config: config.to_string(),
                metric: metric.to_string(),
                n: v.len(),
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_shape() {
        let f = fingerprint("adapt", "x");
        assert!(f.starts_with("adapt-"));
        assert_eq!(f.len(), "adapt-".len() + 16);
        assert_ne!(f, fingerprint("adapt", "y"));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn empty_rows_write_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }
}
