//! Lagrangian `L(q, q̇|x) = ½ q̇ᵀ G(q|x) q̇ − Û(q|x)` and the action of
//! spline paths.
//!
//! The action is approximated with the midpoint rule on `M` uniform
//! subintervals of `s ∈ [0, 1]`. Because spline positions and velocities at
//! the quadrature points are fixed linear combinations of the path nodes, the
//! gradient with respect to the nodes is an exact pullback through
//! [`SplineBasis`].

use serde::{Deserialize, Serialize};

use super::metric::{identity_kinetic, MetricField};
use super::spline::{SplineBasis, SplinePath};
use crate::data::Condition;
use crate::density::{ConditionalPotential, Potential};
use crate::diff::{lbfgs_minimize, LbfgsOptions};
use crate::error::Result;

/// Kinetic metric plus optional potential.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lagrangian {
    /// `None` is the identity metric.
    pub metric: Option<MetricField>,
    /// `None` is the zero potential.
    pub potential: Option<Potential>,
}

impl Lagrangian {
    pub fn flat() -> Self {
        Self::default()
    }

    /// Binds a condition: `x` for the potential, `cond` its encoded vector for
    /// the metric network.
    pub fn at<'a>(&'a self, x: &Condition, cond: &'a [f64]) -> Result<LagrangianAt<'a>> {
        let potential = match &self.potential {
            Some(p) if p.alpha() > 0.0 => Some(p.at(x)?),
            _ => None,
        };
        Ok(LagrangianAt {
            metric: self.metric.as_ref(),
            cond,
            potential,
        })
    }

    pub fn kinetic(&self, q: &[f64], v: &[f64], cond: &[f64]) -> f64 {
        match &self.metric {
            Some(m) => m.kinetic(q, v, cond),
            None => identity_kinetic(v),
        }
    }
}

/// A Lagrangian with its condition fixed.
#[derive(Debug, Clone)]
pub struct LagrangianAt<'a> {
    metric: Option<&'a MetricField>,
    cond: &'a [f64],
    potential: Option<ConditionalPotential<'a>>,
}

impl LagrangianAt<'_> {
    pub fn value(&self, q: &[f64], v: &[f64]) -> f64 {
        let k = match self.metric {
            Some(m) => m.kinetic(q, v, self.cond),
            None => identity_kinetic(v),
        };
        k - self.potential.as_ref().map_or(0.0, |p| p.value(q))
    }

    /// Value with gradients written into `gq` and `gv`.
    pub fn value_grad(&self, q: &[f64], v: &[f64], gq: &mut [f64], gv: &mut [f64]) -> f64 {
        let k = match self.metric {
            Some(m) => {
                let kg = m.kinetic_grad(q, v, self.cond);
                gq.copy_from_slice(&kg.dq);
                gv.copy_from_slice(&kg.dv);
                kg.value
            }
            None => {
                gq.fill(0.0);
                gv.copy_from_slice(v);
                identity_kinetic(v)
            }
        };
        match &self.potential {
            Some(p) => {
                let mut pg = vec![0.0; q.len()];
                let u = p.value_grad(q, &mut pg);
                for (g, d) in gq.iter_mut().zip(pg) {
                    *g -= d;
                }
                k - u
            }
            None => k,
        }
    }

    pub fn has_learned_metric(&self) -> bool {
        self.metric.is_some()
    }
}

/// Midpoint quadrature for paths with a fixed number of interior knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    basis: SplineBasis,
    num_knots: usize,
}

impl Quadrature {
    /// `m ≥ 2` subintervals for paths with `num_knots` interior knots.
    pub fn new(num_knots: usize, m: usize) -> Self {
        assert!(m >= 2, "action quadrature needs at least two points");
        let params: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        Self {
            basis: SplineBasis::new(num_knots + 2, &params),
            num_knots,
        }
    }

    pub fn points(&self) -> usize {
        self.basis.params().len()
    }

    pub fn num_knots(&self) -> usize {
        self.num_knots
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }
}

/// Action `∫₀¹ L(q, q̇) ds` of a path.
pub fn action(lag: &LagrangianAt<'_>, path: &SplinePath, quad: &Quadrature) -> f64 {
    assert_eq!(path.num_knots(), quad.num_knots(), "path and quadrature knot counts");
    action_nodes(lag, &path.nodes(), path.dim(), quad)
}

/// Action from row-major path nodes (`start, knots…, end`).
pub fn action_nodes(lag: &LagrangianAt<'_>, nodes: &[f64], dim: usize, quad: &Quadrature) -> f64 {
    let m = quad.points();
    let mut q = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut total = 0.0;
    for i in 0..m {
        quad.basis.eval_into(i, nodes, dim, &mut q, &mut v);
        total += lag.value(&q, &v);
    }
    total / m as f64
}

/// Action and its gradient with respect to every node.
pub fn action_grad_nodes(lag: &LagrangianAt<'_>, nodes: &[f64], dim: usize, quad: &Quadrature) -> (f64, Vec<f64>) {
    let m = quad.points();
    let w = 1.0 / m as f64;
    let mut q = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut gq = vec![0.0; dim];
    let mut gv = vec![0.0; dim];
    let mut grad = vec![0.0; nodes.len()];
    let mut total = 0.0;
    for i in 0..m {
        quad.basis.eval_into(i, nodes, dim, &mut q, &mut v);
        total += lag.value_grad(&q, &v, &mut gq, &mut gv);
        gq.iter_mut().chain(gv.iter_mut()).for_each(|g| *g *= w);
        quad.basis.pullback(i, &gq, &gv, dim, &mut grad);
    }
    (total * w, grad)
}

/// Adds `scale · ∂S/∂θ_G` into `grad`. Returns the action. No-op on the
/// gradient when the metric is the identity.
pub fn action_metric_grad(lag: &LagrangianAt<'_>, nodes: &[f64], dim: usize, quad: &Quadrature, scale: f64, grad: &mut [f64]) -> f64 {
    let Some(metric) = lag.metric else {
        return action_nodes(lag, nodes, dim, quad);
    };
    let m = quad.points();
    let w = 1.0 / m as f64;
    let mut q = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut total = 0.0;
    for i in 0..m {
        quad.basis.eval_into(i, nodes, dim, &mut q, &mut v);
        total += metric.kinetic_param_grad(&q, &v, lag.cond, scale * w, grad);
        total -= lag.potential.as_ref().map_or(0.0, |p| p.value(&q));
    }
    total * w
}

/// Least-action path between two points found by L-BFGS over the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    pub cost: f64,
    pub path: SplinePath,
    /// Set when the solver could not improve on a finite objective (the
    /// initialization is returned in that case).
    pub degraded: bool,
    pub iters: usize,
}

/// `c(y0, y1|x)`: minimizes the action over interior knots with endpoints
/// pinned, starting from `init` knot offsets (straight line when `None`).
pub fn lagrangian_cost(
    lag: &LagrangianAt<'_>,
    y0: &[f64],
    y1: &[f64],
    init: Option<&[f64]>,
    quad: &Quadrature,
    opts: &LbfgsOptions,
) -> Geodesic {
    let d = y0.len();
    assert_eq!(y1.len(), d, "endpoint dimension");
    let k = quad.num_knots();
    let zeros = vec![0.0; k * d];
    let init = init.unwrap_or(&zeros);
    assert_eq!(init.len(), k * d, "initial knot offsets");
    let objective = |offsets: &[f64]| {
        let nodes = SplinePath::from_offsets(y0, y1, offsets).nodes();
        let (a, g) = action_grad_nodes(lag, &nodes, d, quad);
        // Knot offsets map one-to-one onto the interior nodes.
        (a, g[d..d + k * d].to_vec())
    };
    let res = lbfgs_minimize(objective, init, opts);
    let degraded = !res.f.is_finite() || res.line_search_failed && res.iters == 0;
    Geodesic {
        cost: res.f,
        path: SplinePath::from_offsets(y0, y1, &res.x),
        degraded,
        iters: res.iters,
    }
}
