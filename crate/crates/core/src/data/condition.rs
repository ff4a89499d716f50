use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conditioning value attached to an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Condition {
    Discrete(i64),
    Continuous(Vec<f64>),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Discrete(id) => write!(f, "{id}"),
            Condition::Continuous(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionMode {
    Discrete,
    Continuous,
}

/// Maps conditions to the real vectors fed to FiLM embedders.
///
/// Discrete ids become one-hot vectors over the sorted id list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ConditionEncoder {
    Discrete { ids: Vec<i64> },
    Continuous { dim: usize },
}

impl ConditionEncoder {
    pub fn dim(&self) -> usize {
        match self {
            ConditionEncoder::Discrete { ids } => ids.len(),
            ConditionEncoder::Continuous { dim } => *dim,
        }
    }

    pub fn encode(&self, c: &Condition) -> Result<Vec<f64>> {
        match (self, c) {
            (ConditionEncoder::Discrete { ids }, Condition::Discrete(id)) => {
                let pos = ids
                    .iter()
                    .position(|i| i == id)
                    .ok_or_else(|| Error::UnknownCondition(id.to_string()))?;
                let mut v = vec![0.0; ids.len()];
                v[pos] = 1.0;
                Ok(v)
            }
            (ConditionEncoder::Continuous { dim }, Condition::Continuous(x)) => {
                if x.len() != *dim {
                    return Err(Error::dim("condition", *dim, x.len()));
                }
                Ok(x.clone())
            }
            _ => Err(Error::Validation(format!(
                "condition {c} does not match the encoder mode"
            ))),
        }
    }
}
