//! Conditional trajectory inference with learned Lagrangian optimal transport.
//!
//! Given samples of a conditional distribution at a few anchor times, `clot`
//! learns per-interval transport maps and action-minimizing spline paths
//! under a learned metric plus a density potential. The trained model
//! samples the distribution at any time between the anchors. The guide
//! under `book/` walks through each module.

pub mod cli;
pub mod data;
pub mod density;
pub mod diff;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod sampling;
pub mod training;
pub mod transport;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/geometry.md")]
    struct Geometry;
    #[doc = include_str!("../../../book/src/transport.md")]
    struct Transport;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/sampling.md")]
    struct Sampling;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
