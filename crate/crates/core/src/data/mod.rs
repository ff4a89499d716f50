//! Observation sets: semicircle generation and file ingestion.

pub mod condition;
pub mod io;
pub mod observation;
pub mod semicircle;

pub use condition::{Condition, ConditionEncoder, ConditionMode};
pub use io::{export, ingest, write_jsonl};
pub use observation::{ConditionGroup, GroupKey, ObservationSet, Record, TimeMap};
pub use semicircle::{gen_dataset, gen_semicircle, sample_von_mises, SemicircleConfig};
