//! Differentiable substrate: parameter storage, FiLM MLPs with hand-derived
//! backpropagation, a scalar tape, and the Adam / gradient-descent / L-BFGS optimizers.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod lbfgs;
pub mod mlp;
pub mod param;
pub mod tape;

pub use adam::{adam_step, sgd_step, AdamState};
pub use checkpoint::{read_container, write_container};
pub use gradcheck::{check_gradient, GradCheckReport};
pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsResult};
pub use mlp::{Activation, FilmMlp, MlpSpec, Trace};
pub use param::{Layout, ParamVector, Segment};
pub use tape::{grad, Tape, Var};
