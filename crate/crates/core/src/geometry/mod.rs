//! Conditional metric, spline paths and the action functional.

pub mod lagrangian;
pub mod metric;
pub mod spline;

pub use lagrangian::{action, action_grad_nodes, action_metric_grad, action_nodes, lagrangian_cost, Geodesic, Lagrangian, LagrangianAt, Quadrature};
pub use metric::{budget_softmax, givens_pairs, givens_rotation, identity_kinetic, EigenMode, KineticGrad, MetricField};
pub use spline::{knot_param, NaturalCubicSpline, SplineBasis, SplinePath};
