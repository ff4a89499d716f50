//! Line-delimited observation files.
//!
//! The first line is a header object:
//!
//! ```text
//! {"format":"clot-observations","version":1,"dim_y":2,"dim_x":1,"condition_mode":"discrete"}
//! ```
//!
//! It may carry an explicit `"time_map":{"offset":..,"scale":..}`. Every
//! following non-blank line is one record with `y` (number list), `x`
//! (integer id or number list), exactly one of `t` or `lambda`, and an
//! optional integer `key`. Raw `lambda` values are mapped onto `t ∈ [0, 1]`
//! through the header's time map when present, otherwise through the affine
//! map sending the observed `lambda` range onto `[0, 1]`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::condition::{Condition, ConditionMode};
use super::observation::{ObservationSet, Record, TimeMap};
use crate::error::{Error, Result};

pub const FORMAT: &str = "clot-observations";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub dim_y: usize,
    pub dim_x: usize,
    pub condition_mode: ConditionMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_map: Option<TimeMap>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    y: Vec<f64>,
    x: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    key: Option<u64>,
}

/// Reads and validates an observation file. Discrete sets are always
/// matched; continuous sets are matched when `matched` is set.
pub fn ingest(path: &Path, matched: bool) -> Result<ObservationSet> {
    let text = fs::read_to_string(path)?;
    parse(&text, path, matched)
}

fn parse(text: &str, path: &Path, matched: bool) -> Result<ObservationSet> {
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or_else(|| bad(1, "missing header line".into()))?;
    let header: Header = serde_json::from_str(htext).map_err(|e| bad(hline + 1, e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(
            hline + 1,
            format!("expected format {FORMAT} version {VERSION}, found {} version {}", header.format, header.version),
        ));
    }

    let mut raw = Vec::new();
    for (i, l) in lines {
        let r: RawRecord = serde_json::from_str(l).map_err(|e| bad(i + 1, e.to_string()))?;
        if r.y.len() != header.dim_y {
            return Err(bad(i + 1, format!("y has dimension {} but the header declares {}", r.y.len(), header.dim_y)));
        }
        let x_ok = match (&r.x, header.condition_mode) {
            (Condition::Discrete(_), ConditionMode::Discrete) => header.dim_x == 1,
            (Condition::Continuous(v), ConditionMode::Continuous) => v.len() == header.dim_x,
            _ => false,
        };
        if !x_ok {
            return Err(bad(i + 1, format!("condition {} does not match the header", r.x)));
        }
        if r.t.is_some() == r.lambda.is_some() {
            return Err(bad(i + 1, "exactly one of `t` and `lambda` is required".into()));
        }
        raw.push((i + 1, r));
    }
    let uses_lambda = raw.first().is_some_and(|(_, r)| r.lambda.is_some());
    if let Some((line, _)) = raw.iter().find(|(_, r)| r.lambda.is_some() != uses_lambda) {
        return Err(bad(*line, "records mix `t` and `lambda`".into()));
    }

    let time_map = match header.time_map {
        Some(m) => m,
        None if uses_lambda => {
            let lambdas = raw.iter().filter_map(|(_, r)| r.lambda);
            let lo = lambdas.clone().fold(f64::INFINITY, f64::min);
            let hi = lambdas.fold(f64::NEG_INFINITY, f64::max);
            TimeMap::from_range(lo, hi)?
        }
        None => TimeMap::IDENTITY,
    };
    let records = raw
        .into_iter()
        .map(|(_, r)| Record {
            t: match r.lambda {
                Some(l) => time_map.to_time(l),
                None => r.t.unwrap_or_default(),
            },
            y: r.y,
            x: r.x,
            key: r.key,
        })
        .collect();
    let matched = matched || header.condition_mode == ConditionMode::Discrete;
    ObservationSet::new(records, time_map, matched)
}

/// Writes `set` in normalized form (`t` values plus the header time map).
pub fn export(set: &ObservationSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        dim_y: set.dim_y(),
        dim_x: set.dim_x(),
        condition_mode: set.mode(),
        time_map: (!set.time_map().is_identity()).then_some(set.time_map()),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for r in set.records() {
        let raw = RawRecord {
            y: r.y.clone(),
            x: r.x.clone(),
            t: Some(r.t),
            lambda: None,
            key: r.key,
        };
        serde_json::to_writer(&mut w, &raw)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes each item as one JSON line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
