//! Line-oriented campaign file.
//!
//! ```text
//! Q 2 AREA 0 0 20 20
//! T 1 5 0 5 1 2
//! W 1 1 0 0
//! C 1 1 1
//! ```
//!
//! `T id x y r s delta` declares a task, `W id period x y` an arrival and
//! `C period worker task...` an explicit coverage set. A file with any `C`
//! record is an explicit fixture: eligibility comes from the listed sets and
//! `C` records without a matching `W` place the worker at the area center.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Area, CampaignInstance, ExplicitCoverage, Point, TaskId, TaskSpec, WorkerArrival, WorkerId};

fn field<T: FromStr>(line: usize, what: &str, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_instance(text: &str) -> Result<CampaignInstance> {
    let mut header: Option<(u32, Area)> = None;
    let mut tasks = Vec::new();
    let mut arrivals: Vec<WorkerArrival> = Vec::new();
    let mut explicit: ExplicitCoverage = BTreeMap::new();
    let mut any_c = false;

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut toks = body.split_whitespace();
        let tag = toks.next().unwrap_or_default();
        if header.is_none() && tag != "Q" {
            return Err(Error::parse(line, "expected header `Q <int> AREA xmin ymin xmax ymax`"));
        }
        match tag {
            "Q" => {
                if header.is_some() {
                    return Err(Error::parse(line, "duplicate header"));
                }
                let q: u32 = field(line, "period count", toks.next())?;
                if toks.next() != Some("AREA") {
                    return Err(Error::parse(line, "expected AREA after the period count"));
                }
                let xmin = field(line, "xmin", toks.next())?;
                let ymin = field(line, "ymin", toks.next())?;
                let xmax = field(line, "xmax", toks.next())?;
                let ymax = field(line, "ymax", toks.next())?;
                let area = Area::new(xmin, ymin, xmax, ymax).map_err(|e| Error::parse(line, e.to_string()))?;
                header = Some((q, area));
            }
            "T" => {
                let id = TaskId(field(line, "task id", toks.next())?);
                let x = field(line, "x", toks.next())?;
                let y = field(line, "y", toks.next())?;
                tasks.push(TaskSpec {
                    id,
                    location: Point::new(x, y),
                    radius: field(line, "radius", toks.next())?,
                    release: field(line, "release period", toks.next())?,
                    duration: field(line, "duration", toks.next())?,
                });
            }
            "W" => {
                let worker = WorkerId(field(line, "worker id", toks.next())?);
                let period = field(line, "period", toks.next())?;
                let x = field(line, "x", toks.next())?;
                let y = field(line, "y", toks.next())?;
                arrivals.push(WorkerArrival {
                    worker,
                    period,
                    location: Point::new(x, y),
                });
            }
            "C" => {
                any_c = true;
                let period: u32 = field(line, "period", toks.next())?;
                let worker = WorkerId(field(line, "worker id", toks.next())?);
                let set = explicit.entry((period, worker)).or_default();
                for tok in toks.by_ref() {
                    set.insert(TaskId(field(line, "task id", Some(tok))?));
                }
            }
            other => return Err(Error::parse(line, format!("unknown record type `{other}`"))),
        }
        if let Some(extra) = toks.next() {
            return Err(Error::parse(line, format!("unexpected trailing field `{extra}`")));
        }
    }

    let (q, area) = header.ok_or_else(|| Error::parse(1, "empty instance file"))?;
    if any_c {
        let present: BTreeSet<(u32, WorkerId)> = arrivals.iter().map(|a| (a.period, a.worker)).collect();
        for &(period, worker) in explicit.keys() {
            if !present.contains(&(period, worker)) {
                arrivals.push(WorkerArrival {
                    worker,
                    period,
                    location: area.center(),
                });
            }
        }
    }
    CampaignInstance::new(q, area, tasks, arrivals, any_c.then_some(explicit))
}

pub fn write_instance(instance: &CampaignInstance) -> String {
    let a = instance.area();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Q {} AREA {} {} {} {}",
        instance.num_periods(),
        a.min.x,
        a.min.y,
        a.max.x,
        a.max.y
    );
    for t in instance.tasks() {
        let _ = writeln!(
            out,
            "T {} {} {} {} {} {}",
            t.id.0, t.location.x, t.location.y, t.radius, t.release, t.duration
        );
    }
    for w in instance.arrivals() {
        let _ = writeln!(out, "W {} {} {} {}", w.worker.0, w.period, w.location.x, w.location.y);
    }
    if let Some(explicit) = instance.explicit_coverage() {
        for ((period, worker), set) in explicit {
            let _ = write!(out, "C {period} {}", worker.0);
            for t in set {
                let _ = write!(out, " {}", t.0);
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<CampaignInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn save_instance(instance: &CampaignInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_instance(instance))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_geometric() {
        let text = "Q 2 AREA 0 0 10 10\nT 1 1.5 2 0.25 1 2\nW 3 2 4 4.125\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(write_instance(&inst), text);
    }

    #[test]
    fn coverage_records_synthesize_arrivals() {
        let text = "Q 1 AREA 0 0 1 1\nT 1 0 0 1 1 1\nC 1 7 1\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.arrivals().len(), 1);
        assert_eq!(inst.arrivals()[0].location, Point::new(0.5, 0.5));
        assert_eq!(parse_instance(&write_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_instance("Q 1 AREA 0 0 1 1\n\nT 1 0 zero 1 1 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(matches!(parse_instance("T 1 0 0 1 1 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("Q 1 AREA 0 0 1 1\nX\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn invariants_still_apply() {
        assert!(matches!(
            parse_instance("Q 1 AREA 0 0 1 1\nT 1 0 0 -1 1 1\n"),
            Err(Error::MalformedInstance(_))
        ));
    }
}
