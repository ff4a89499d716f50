//! Semi-dual conditional transport: per-interval potentials `g_k`, amortized
//! maps `T_k`, a shared spline generator `S`, and the c-transform that ties
//! them to the Lagrangian cost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Condition, ConditionEncoder};
use crate::diff::{lbfgs_minimize, Activation, FilmMlp, LbfgsOptions, MlpSpec};
use crate::error::{Error, Result};
use crate::geometry::{action_grad_nodes, action_nodes, knot_param, Lagrangian, LagrangianAt, Quadrature, SplinePath};

/// Architecture and solver settings of a [`TransportBundle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub dim: usize,
    pub encoder: ConditionEncoder,
    pub anchor_times: Vec<f64>,
    pub num_knots: usize,
    pub quad_points: usize,
    pub refine_iters: usize,
    pub potential_hidden: Vec<usize>,
    pub map_hidden: Vec<usize>,
    pub spline_hidden: Vec<usize>,
    pub activation: Activation,
    pub film_width: usize,
}

impl BundleSpec {
    pub fn num_intervals(&self) -> usize {
        self.anchor_times.len().saturating_sub(1)
    }

    pub fn potential_spec(&self) -> MlpSpec {
        self.net(self.dim, 1, &self.potential_hidden)
    }

    pub fn map_spec(&self) -> MlpSpec {
        self.net(self.dim, self.dim, &self.map_hidden)
    }

    pub fn spline_spec(&self) -> MlpSpec {
        self.net(2 * self.dim, self.num_knots * self.dim, &self.spline_hidden)
    }

    fn net(&self, input_dim: usize, output_dim: usize, hidden: &[usize]) -> MlpSpec {
        MlpSpec {
            input_dim,
            output_dim,
            hidden: hidden.to_vec(),
            activation: self.activation,
            cond_dim: self.encoder.dim(),
            film_width: self.film_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("observation dimension must be positive".into()));
        }
        if self.anchor_times.len() < 2 || self.anchor_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("anchor times must be strictly increasing, at least two".into()));
        }
        if self.num_knots == 0 || self.quad_points < 2 {
            return Err(Error::Config("need at least one knot and two quadrature points".into()));
        }
        Ok(())
    }
}

/// Everything learned by training, plus the fixed Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportBundle {
    pub spec: BundleSpec,
    /// `g_k`, one per interval.
    pub potentials: Vec<FilmMlp>,
    /// `T_k`, one per interval.
    pub maps: Vec<FilmMlp>,
    /// Shared generator of knot offsets from `(y_k, y_{k+1}, x)`.
    pub spline: FilmMlp,
    pub lagrangian: Lagrangian,
    quad: Quadrature,
}

/// Outcome of one c-transform evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CTransformResult {
    pub y1_star: Vec<f64>,
    /// `action(geodesic) − g_k(y1_star | x)`.
    pub value: f64,
    pub geodesic: SplinePath,
    pub refine_iters_used: usize,
    /// True when refinement produced a non-finite objective and the warm
    /// start was returned instead.
    pub fell_back: bool,
}

/// One matched sample pair across an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub x: Condition,
}

impl TransportBundle {
    /// Random hidden layers; `S` starts with a zero output layer so initial
    /// paths are straight.
    pub fn new<R: Rng + ?Sized>(spec: BundleSpec, lagrangian: Lagrangian, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_intervals();
        let potentials = (0..n).map(|_| FilmMlp::new(spec.potential_spec(), rng)).collect();
        let maps = (0..n).map(|_| FilmMlp::new(spec.map_spec(), rng)).collect();
        let mut spline = FilmMlp::new(spec.spline_spec(), rng);
        spline.zero_output_layer();
        Self::from_parts(spec, potentials, maps, spline, lagrangian)
    }

    pub fn from_parts(spec: BundleSpec, potentials: Vec<FilmMlp>, maps: Vec<FilmMlp>, spline: FilmMlp, lagrangian: Lagrangian) -> Result<Self> {
        spec.validate()?;
        let n = spec.num_intervals();
        if potentials.len() != n || maps.len() != n {
            return Err(Error::Validation(format!("expected {n} potential and map networks")));
        }
        let shapes_ok = potentials.iter().all(|g| g.spec() == &spec.potential_spec())
            && maps.iter().all(|t| t.spec() == &spec.map_spec())
            && spline.spec() == &spec.spline_spec();
        if !shapes_ok {
            return Err(Error::Validation("network shapes disagree with the bundle spec".into()));
        }
        if let Some(m) = &lagrangian.metric {
            if m.dim() != spec.dim {
                return Err(Error::dim("metric", spec.dim, m.dim()));
            }
        }
        let quad = Quadrature::new(spec.num_knots, spec.quad_points);
        Ok(Self {
            spec,
            potentials,
            maps,
            spline,
            lagrangian,
            quad,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn num_intervals(&self) -> usize {
        self.spec.num_intervals()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn encode(&self, x: &Condition) -> Result<Vec<f64>> {
        self.spec.encoder.encode(x)
    }

    fn check_interval(&self, k: usize) {
        assert!(k < self.num_intervals(), "interval {k} out of range");
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::dim("sample", self.dim(), y.len()));
        }
        Ok(())
    }

    /// `T_k(y_k | x)`.
    pub fn predict_map(&self, k: usize, y_k: &[f64], x: &Condition) -> Result<Vec<f64>> {
        self.check_interval(k);
        self.check_point(y_k)?;
        Ok(self.maps[k].forward(y_k, &self.encode(x)?))
    }

    /// Spline from `y_k` to `y_next` with knots offset by `S`.
    pub fn predict_path(&self, y_k: &[f64], y_next: &[f64], x: &Condition) -> Result<SplinePath> {
        self.check_point(y_k)?;
        self.check_point(y_next)?;
        Ok(self.path_encoded(y_k, y_next, &self.encode(x)?))
    }

    pub(crate) fn path_encoded(&self, y_k: &[f64], y_next: &[f64], cond: &[f64]) -> SplinePath {
        let offsets = self.spline.forward(&[y_k, y_next].concat(), cond);
        SplinePath::from_offsets(y_k, y_next, &offsets)
    }

    /// Objective `y₁ ↦ action(S-path(y_k, y₁)) − g_k(y₁)` and its gradient.
    fn objective(&self, k: usize, lag: &LagrangianAt<'_>, cond: &[f64], y_k: &[f64], y1: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let nk = self.spec.num_knots;
        let (offsets, s_trace) = self.spline.forward_trace(&[y_k, y1].concat(), cond);
        let nodes = SplinePath::from_offsets(y_k, y1, &offsets).nodes();
        let (action, g_nodes) = action_grad_nodes(lag, &nodes, d, &self.quad);
        let knot_cot = &g_nodes[d..d + nk * d];

        let mut grad = g_nodes[(nk + 1) * d..].to_vec();
        for (j, cot) in knot_cot.chunks_exact(d).enumerate() {
            let s = knot_param(j, nk);
            for i in 0..d {
                grad[i] += s * cot[i];
            }
        }
        let s_in_cot = self.spline.backward(&s_trace, knot_cot, None);
        for i in 0..d {
            grad[i] += s_in_cot[d + i];
        }

        let (g_out, g_trace) = self.potentials[k].forward_trace(y1, cond);
        let g_in_cot = self.potentials[k].backward(&g_trace, &[1.0], None);
        for i in 0..d {
            grad[i] -= g_in_cot[i];
        }
        (action - g_out[0], grad)
    }

    fn objective_value(&self, k: usize, lag: &LagrangianAt<'_>, cond: &[f64], y_k: &[f64], y1: &[f64]) -> (f64, SplinePath) {
        let path = self.path_encoded(y_k, y1, cond);
        let a = action_nodes(lag, &path.nodes(), self.dim(), &self.quad);
        (a - self.potentials[k].forward(y1, cond)[0], path)
    }

    /// `g_k^c(y_k | x)`, warm-started at `T_k(y_k)` and refined with L-BFGS.
    pub fn c_transform(&self, k: usize, y_k: &[f64], x: &Condition, refine_iters: usize) -> Result<CTransformResult> {
        self.check_interval(k);
        self.check_point(y_k)?;
        let cond = self.encode(x)?;
        let lag = self.lagrangian.at(x, &cond)?;
        Ok(self.c_transform_at(k, &lag, &cond, y_k, refine_iters))
    }

    pub(crate) fn c_transform_at(&self, k: usize, lag: &LagrangianAt<'_>, cond: &[f64], y_k: &[f64], refine_iters: usize) -> CTransformResult {
        let warm = self.maps[k].forward(y_k, cond);
        let res = lbfgs_minimize(|y1| self.objective(k, lag, cond, y_k, y1), &warm, &LbfgsOptions::with_iters(refine_iters));
        let (y1, iters, fell_back) = if res.f.is_finite() && res.x.iter().all(|v| v.is_finite()) {
            (res.x, res.iters, false)
        } else {
            (warm, 0, true)
        };
        let (value, geodesic) = self.objective_value(k, lag, cond, y_k, &y1);
        CTransformResult {
            y1_star: y1,
            value,
            geodesic,
            refine_iters_used: iters,
            fell_back,
        }
    }

    /// Mean of `g^c(y_k|x) + g_k(y_{k+1}|x)` over `batch`.
    pub fn dual_value(&self, k: usize, batch: &[Pair]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let mut total = 0.0;
        for p in batch {
            self.check_point(&p.target)?;
            let c = self.c_transform(k, &p.source, &p.x, self.spec.refine_iters)?;
            total += c.value + self.potentials[k].forward(&p.target, &self.encode(&p.x)?)[0];
        }
        Ok(total / batch.len() as f64)
    }
}
