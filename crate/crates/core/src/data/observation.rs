//! Observation sets: `(y, x, t)` records over an ordered anchor-time grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::condition::{Condition, ConditionEncoder, ConditionMode};
use crate::error::{Error, Result};

/// Affine link between a raw hyperparameter `λ` and normalized time `t ∈ [0, 1]`:
/// `λ = offset + scale · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMap {
    pub offset: f64,
    pub scale: f64,
}

impl Default for TimeMap {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TimeMap {
    pub const IDENTITY: TimeMap = TimeMap {
        offset: 0.0,
        scale: 1.0,
    };

    /// Map sending `[lo, hi]` onto `[0, 1]`.
    pub fn from_range(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Validation(format!(
                "hyperparameter range [{lo}, {hi}] must be increasing and finite"
            )));
        }
        Ok(Self {
            offset: lo,
            scale: hi - lo,
        })
    }

    pub fn to_time(&self, lambda: f64) -> f64 {
        (lambda - self.offset) / self.scale
    }

    pub fn to_lambda(&self, t: f64) -> f64 {
        self.offset + self.scale * t
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// One observed sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub y: Vec<f64>,
    pub x: Condition,
    pub t: f64,
    /// Pairing key tying records of the same condition across anchors
    /// (continuous conditions only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<u64>,
}

/// Identity of a condition group used for matched pairing across anchors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupKey {
    Id(i64),
    Key(u64),
    /// Bit patterns of a continuous condition vector.
    Exact(Vec<u64>),
}

impl GroupKey {
    fn of(r: &Record) -> Self {
        match (&r.x, r.key) {
            (Condition::Discrete(id), _) => GroupKey::Id(*id),
            (Condition::Continuous(_), Some(k)) => GroupKey::Key(k),
            (Condition::Continuous(v), None) => GroupKey::Exact(v.iter().map(|f| f.to_bits()).collect()),
        }
    }
}

/// Records sharing a condition, indexed by anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionGroup {
    pub key: GroupKey,
    pub condition: Condition,
    /// `per_anchor[k]` lists record indices at anchor `k`.
    pub per_anchor: Vec<Vec<usize>>,
}

/// Validated collection of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    records: Vec<Record>,
    anchor_times: Vec<f64>,
    dim_y: usize,
    dim_x: usize,
    mode: ConditionMode,
    time_map: TimeMap,
    groups: Vec<ConditionGroup>,
}

impl ObservationSet {
    /// Validates dimensions, builds the anchor grid and, when `matched`,
    /// checks that every condition group is observed at every anchor.
    pub fn new(records: Vec<Record>, time_map: TimeMap, matched: bool) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Validation("observation set is empty".into()))?;
        let dim_y = first.y.len();
        let (mode, dim_x) = match &first.x {
            Condition::Discrete(_) => (ConditionMode::Discrete, 1),
            Condition::Continuous(v) => (ConditionMode::Continuous, v.len()),
        };
        if dim_y == 0 {
            return Err(Error::Validation("observations must have positive dimension".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.y.len() != dim_y {
                return Err(Error::Validation(format!(
                    "record {i}: y has dimension {} but the set has dimension {dim_y}",
                    r.y.len()
                )));
            }
            match (&r.x, mode) {
                (Condition::Discrete(_), ConditionMode::Discrete) => {}
                (Condition::Continuous(v), ConditionMode::Continuous) if v.len() == dim_x => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "record {i}: condition {} inconsistent with the set",
                        r.x
                    )))
                }
            }
            if !r.t.is_finite() || r.y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("record {i}: non-finite value")));
            }
        }
        if matched && mode == ConditionMode::Continuous && records.iter().any(|r| r.key.is_none()) {
            return Err(Error::Validation(
                "matched continuous conditions need a pairing key on every record".into(),
            ));
        }
        let mut anchor_times: Vec<f64> = records.iter().map(|r| r.t).collect();
        anchor_times.sort_by(f64::total_cmp);
        anchor_times.dedup();
        if anchor_times.len() < 2 {
            return Err(Error::Validation("need at least two anchor times".into()));
        }

        let mut by_key: BTreeMap<GroupKey, ConditionGroup> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let k = anchor_times.partition_point(|&t| t < r.t);
            let group = by_key.entry(GroupKey::of(r)).or_insert_with(|| ConditionGroup {
                key: GroupKey::of(r),
                condition: r.x.clone(),
                per_anchor: vec![Vec::new(); anchor_times.len()],
            });
            group.per_anchor[k].push(i);
        }
        let groups: Vec<ConditionGroup> = by_key.into_values().collect();
        if matched {
            let mut missing = Vec::new();
            for g in &groups {
                for (k, idx) in g.per_anchor.iter().enumerate() {
                    if idx.is_empty() {
                        missing.push(format!("condition {} at t={}", g.condition, anchor_times[k]));
                    }
                }
            }
            if !missing.is_empty() {
                return Err(Error::Validation(format!(
                    "conditions missing at anchors: {}",
                    missing.join(", ")
                )));
            }
        }
        Ok(Self {
            records,
            anchor_times,
            dim_y,
            dim_x,
            mode,
            time_map,
            groups,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn anchor_times(&self) -> &[f64] {
        &self.anchor_times
    }

    pub fn num_intervals(&self) -> usize {
        self.anchor_times.len() - 1
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn mode(&self) -> ConditionMode {
        self.mode
    }

    pub fn time_map(&self) -> TimeMap {
        self.time_map
    }

    pub fn groups(&self) -> &[ConditionGroup] {
        &self.groups
    }

    /// Encoder turning conditions into network inputs.
    pub fn encoder(&self) -> ConditionEncoder {
        match self.mode {
            ConditionMode::Discrete => ConditionEncoder::Discrete {
                ids: self
                    .groups
                    .iter()
                    .filter_map(|g| match g.condition {
                        Condition::Discrete(id) => Some(id),
                        _ => None,
                    })
                    .collect(),
            },
            ConditionMode::Continuous => ConditionEncoder::Continuous { dim: self.dim_x },
        }
    }

    /// Samples observed under `x` at anchor `k`.
    pub fn samples(&self, k: usize, x: &Condition) -> Vec<&[f64]> {
        self.groups
            .iter()
            .filter(|g| &g.condition == x)
            .flat_map(|g| g.per_anchor[k].iter().map(|&i| self.records[i].y.as_slice()))
            .collect()
    }

    /// Index of the anchor equal to `t`, if any.
    pub fn anchor_index(&self, t: f64) -> Option<usize> {
        self.anchor_times.iter().position(|&a| a == t)
    }
}
