//! Alternating min-max training of potentials, maps, the spline generator and
//! the metric.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ConditionMode, ObservationSet};
use crate::density::{ConditionBandwidth, NwEstimator, Potential, DEFAULT_EPS};
use crate::diff::{adam_step, sgd_step, Activation, AdamState};
use crate::error::{Error, Result};
use crate::geometry::{action_grad_nodes, action_metric_grad, EigenMode, Lagrangian, MetricField, SplinePath};
use crate::transport::{BundleSpec, CTransformResult, Pair, TransportBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    Learned,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenModeKind {
    Learned,
    Fixed,
}

/// Update rule for the metric network.
///
/// Adam's per-coordinate normalization keeps pushing the eigen-logits at a
/// constant rate even as the softmax saturates, so the learned metric heads
/// for the degenerate corner of the budget simplex within tens of steps.
/// Plain descent slows down there because the softmax Jacobian vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricOptimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialMode {
    On,
    Off,
}

/// The four ablation variants: identity or learned kinetic term, with or
/// without the density potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "K_I")]
    KI,
    #[serde(rename = "K_theta")]
    KTheta,
    #[serde(rename = "K_I-U")]
    KIU,
    #[serde(rename = "K_theta-U")]
    KThetaU,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::KThetaU, Variant::KIU, Variant::KTheta, Variant::KI];

    pub fn name(self) -> &'static str {
        match self {
            Variant::KI => "K_I",
            Variant::KTheta => "K_theta",
            Variant::KIU => "K_I-U",
            Variant::KThetaU => "K_theta-U",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected K_I, K_theta, K_I-U or K_theta-U)")))
    }

    pub fn apply(self, cfg: &mut TrainingConfig) {
        let (metric, potential) = match self {
            Variant::KI => (MetricMode::Identity, PotentialMode::Off),
            Variant::KTheta => (MetricMode::Learned, PotentialMode::Off),
            Variant::KIU => (MetricMode::Identity, PotentialMode::On),
            Variant::KThetaU => (MetricMode::Learned, PotentialMode::On),
        };
        cfg.metric_mode = metric;
        cfg.potential_mode = potential;
    }
}

/// Every knob of a training run. Defaults are the semicircle settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub h_y: f64,
    /// Condition bandwidth; absent for discrete conditions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_x: Option<f64>,
    pub eps: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub lr_g: f64,
    pub lr_t: f64,
    pub lr_s: f64,
    pub lr_metric: f64,
    pub metric_optimizer: MetricOptimizer,
    pub refine_iters: usize,
    pub quad_points: usize,
    pub num_knots: usize,
    pub budget: f64,
    /// Per-condition cap on samples drawn at each anchor; absent uses all.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub metric_mode: MetricMode,
    pub eigen_mode: EigenModeKind,
    pub fixed_eigenvalues: Vec<f64>,
    pub potential_mode: PotentialMode,
    pub activation: Activation,
    pub film_width: usize,
    pub metric_hidden: Vec<usize>,
    pub potential_hidden: Vec<usize>,
    pub map_hidden: Vec<usize>,
    pub spline_hidden: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            h_y: 0.05,
            h_x: None,
            eps: DEFAULT_EPS,
            n_outer: 200,
            n_inner: 10,
            lr_g: 1e-4,
            lr_t: 1e-4,
            lr_s: 1e-4,
            lr_metric: 5e-3,
            metric_optimizer: MetricOptimizer::Sgd,
            refine_iters: 10,
            quad_points: 32,
            num_knots: 15,
            budget: 2.0,
            batch_size: None,
            seed: 0,
            metric_mode: MetricMode::Learned,
            eigen_mode: EigenModeKind::Learned,
            fixed_eigenvalues: vec![1.0, 0.1],
            potential_mode: PotentialMode::On,
            activation: Activation::Relu,
            film_width: 16,
            metric_hidden: vec![128, 128],
            potential_hidden: vec![64; 4],
            map_hidden: vec![64; 4],
            spline_hidden: vec![1024, 1024],
        }
    }
}

impl TrainingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        v.apply(&mut self);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h_y", self.h_y),
            ("eps", self.eps),
            ("lr_g", self.lr_g),
            ("lr_t", self.lr_t),
            ("lr_s", self.lr_s),
            ("lr_metric", self.lr_metric),
            ("budget", self.budget),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if matches!(self.h_x, Some(h) if !(h > 0.0)) {
            return Err(Error::Config("h_x must be positive".into()));
        }
        if self.n_outer == 0 {
            return Err(Error::Config("n_outer must be positive".into()));
        }
        if self.num_knots == 0 || self.quad_points < 2 {
            return Err(Error::Config("need num_knots ≥ 1 and quad_points ≥ 2".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.eigen_mode == EigenModeKind::Fixed && self.fixed_eigenvalues.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("fixed eigenvalues must be positive".into()));
        }
        Ok(())
    }

    /// Total `g`/`T`/`S` update sweeps.
    pub fn sweeps(&self) -> usize {
        self.n_outer * self.n_inner
    }
}

/// Losses and diagnostics for one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer: usize,
    /// Dual objective per interval from the last inner sweep.
    pub dual: Vec<f64>,
    /// Map regression loss per interval from the last inner sweep.
    pub map: Vec<f64>,
    pub path: Option<f64>,
    /// Outer objective at the metric step.
    pub metric: f64,
    pub grad_norm_g: f64,
    pub grad_norm_t: f64,
    pub grad_norm_s: f64,
    pub grad_norm_metric: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub records: Vec<OuterRecord>,
    pub g_updates: usize,
    pub t_updates: usize,
    pub s_updates: usize,
    pub metric_updates: usize,
}

/// Training stopped early; carries the trace up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("training aborted at outer iteration {outer}: {source}")]
pub struct TrainFailure {
    pub outer: usize,
    #[source]
    pub source: Error,
    pub trace: TrainingTrace,
}

/// Builds the fixed Lagrangian for `data` under `cfg`.
pub fn build_lagrangian<R: Rng + ?Sized>(data: &ObservationSet, cfg: &TrainingConfig, rng: &mut R) -> Result<Lagrangian> {
    let cond_dim = data.encoder().dim();
    let potential = match cfg.potential_mode {
        PotentialMode::Off => None,
        PotentialMode::On => {
            let h_x = match (data.mode(), cfg.h_x) {
                (ConditionMode::Discrete, _) => ConditionBandwidth::Discrete,
                (ConditionMode::Continuous, Some(h)) => ConditionBandwidth::Gaussian(h),
                (ConditionMode::Continuous, None) => {
                    return Err(Error::Config("continuous conditions need h_x".into()));
                }
            };
            let est = NwEstimator::new(data.records().iter().map(|r| (r.y.as_slice(), &r.x)), cfg.h_y, h_x)?;
            Some(Potential::new(est, cfg.alpha, cfg.eps)?)
        }
    };
    let metric = match cfg.metric_mode {
        MetricMode::Identity => None,
        MetricMode::Learned => {
            let eigen = match cfg.eigen_mode {
                EigenModeKind::Learned => EigenMode::Learned,
                EigenModeKind::Fixed => EigenMode::Fixed(cfg.fixed_eigenvalues.clone()),
            };
            Some(MetricField::new(data.dim_y(), cond_dim, cfg.metric_hidden.clone(), cfg.activation, cfg.film_width, cfg.budget, eigen, rng)?)
        }
    };
    Ok(Lagrangian { metric, potential })
}

pub fn bundle_spec(data: &ObservationSet, cfg: &TrainingConfig) -> BundleSpec {
    BundleSpec {
        dim: data.dim_y(),
        encoder: data.encoder(),
        anchor_times: data.anchor_times().to_vec(),
        num_knots: cfg.num_knots,
        quad_points: cfg.quad_points,
        refine_iters: cfg.refine_iters,
        potential_hidden: cfg.potential_hidden.clone(),
        map_hidden: cfg.map_hidden.clone(),
        spline_hidden: cfg.spline_hidden.clone(),
        activation: cfg.activation,
        film_width: cfg.film_width,
    }
}

/// Freshly initialized bundle, drawing from `rng` in a fixed order.
pub fn init_bundle<R: Rng + ?Sized>(data: &ObservationSet, cfg: &TrainingConfig, rng: &mut R) -> Result<TransportBundle> {
    cfg.validate()?;
    let lagrangian = build_lagrangian(data, cfg, rng)?;
    TransportBundle::new(bundle_spec(data, cfg), lagrangian, rng)
}

/// Matched pairs for interval `k`: per condition group, up to `batch_size`
/// sources at `t_k` and as many targets at `t_{k+1}`, drawn without
/// replacement.
pub fn interval_batch<R: Rng + ?Sized>(data: &ObservationSet, k: usize, batch_size: Option<usize>, rng: &mut R) -> Vec<Pair> {
    let mut pairs = Vec::new();
    for g in data.groups() {
        let mut src = g.per_anchor[k].clone();
        let mut tgt = g.per_anchor[k + 1].clone();
        let n = src.len().min(tgt.len()).min(batch_size.unwrap_or(usize::MAX));
        if batch_size.is_some() {
            src.partial_shuffle(rng, n);
            tgt.partial_shuffle(rng, n);
        }
        for (&i, &j) in src.iter().zip(&tgt).take(n) {
            pairs.push(Pair {
                source: data.records()[i].y.clone(),
                target: data.records()[j].y.clone(),
                x: g.condition.clone(),
            });
        }
    }
    pairs
}

/// Equals [`TransportBundle::dual_value`].
pub fn loss_dual(bundle: &TransportBundle, k: usize, batch: &[Pair]) -> Result<f64> {
    bundle.dual_value(k, batch)
}

/// Mean squared distance between `T_k(source)` and `targets`.
pub fn loss_map(bundle: &TransportBundle, k: usize, batch: &[Pair], targets: &[Vec<f64>]) -> Result<f64> {
    assert_eq!(batch.len(), targets.len(), "one target per pair");
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, t) in batch.iter().zip(targets) {
        let pred = bundle.predict_map(k, &p.source, &p.x)?;
        total += pred.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// Mean action of the generator's paths between each pair's endpoints.
pub fn loss_path(bundle: &TransportBundle, batch: &[Pair]) -> Result<f64> {
    path_grad(bundle, batch, None)
}

/// Sum over intervals of the dual values.
pub fn loss_metric(bundle: &TransportBundle, batches: &[Vec<Pair>]) -> Result<f64> {
    batches.iter().enumerate().map(|(k, b)| bundle.dual_value(k, b)).sum()
}

fn path_grad(bundle: &TransportBundle, batch: &[Pair], mut grad: Option<&mut [f64]>) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let d = bundle.dim();
    let nk = bundle.spec.num_knots;
    let w = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for p in batch {
        let cond = bundle.encode(&p.x)?;
        let lag = bundle.lagrangian.at(&p.x, &cond)?;
        let input = [p.source.as_slice(), &p.target].concat();
        let (offsets, trace) = bundle.spline.forward_trace(&input, &cond);
        let nodes = SplinePath::from_offsets(&p.source, &p.target, &offsets).nodes();
        let (a, g_nodes) = action_grad_nodes(&lag, &nodes, d, bundle.quadrature());
        total += a;
        if let Some(g) = grad.as_deref_mut() {
            let cot: Vec<f64> = g_nodes[d..d + nk * d].iter().map(|v| v * w).collect();
            bundle.spline.backward(&trace, &cot, Some(g));
        }
    }
    Ok(total * w)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { segment: what.into() })
    }
}

fn ctransforms(bundle: &TransportBundle, k: usize, batch: &[Pair]) -> Result<Vec<(CTransformResult, Vec<f64>)>> {
    batch
        .iter()
        .map(|p| {
            let cond = bundle.encode(&p.x)?;
            let lag = bundle.lagrangian.at(&p.x, &cond)?;
            let c = bundle.c_transform_at(k, &lag, &cond, &p.source, bundle.spec.refine_iters);
            Ok((c, cond))
        })
        .collect()
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Gradient of `L_dual` with respect to `θ_{g,k}` given refined minimizers.
fn dual_grad(bundle: &TransportBundle, k: usize, batch: &[Pair], cts: &[(CTransformResult, Vec<f64>)]) -> (f64, Vec<f64>) {
    let g_net = &bundle.potentials[k];
    let w = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; g_net.num_params()];
    let mut dual = 0.0;
    for (p, (c, cond)) in batch.iter().zip(cts) {
        let (_, tr) = g_net.forward_trace(&c.y1_star, cond);
        g_net.backward(&tr, &[-w], Some(&mut grad));
        let (gt, tr) = g_net.forward_trace(&p.target, cond);
        g_net.backward(&tr, &[w], Some(&mut grad));
        dual += c.value + gt[0];
    }
    (dual * w, grad)
}

/// Gradient of `L_map` with respect to `θ_{T,k}`.
fn map_grad(bundle: &TransportBundle, k: usize, batch: &[Pair], cts: &[(CTransformResult, Vec<f64>)]) -> (f64, Vec<f64>) {
    let t_net = &bundle.maps[k];
    let w = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; t_net.num_params()];
    let mut loss = 0.0;
    for (p, (c, cond)) in batch.iter().zip(cts) {
        let (pred, tr) = t_net.forward_trace(&p.source, cond);
        let diff: Vec<f64> = pred.iter().zip(&c.y1_star).map(|(a, b)| a - b).collect();
        loss += sq_norm(&diff);
        let cot: Vec<f64> = diff.iter().map(|v| 2.0 * w * v).collect();
        t_net.backward(&tr, &cot, Some(&mut grad));
    }
    (loss * w, grad)
}

/// `L_metric` at refined minimizers and its gradient in `θ_G`, treating the
/// minimizers and path knots as constants.
fn metric_grad(bundle: &TransportBundle, batches: &[Vec<Pair>]) -> Result<(f64, Vec<f64>)> {
    let n_params = bundle.lagrangian.metric.as_ref().map_or(0, |m| m.net().num_params());
    let mut grad = vec![0.0; n_params];
    let mut total = 0.0;
    for (k, batch) in batches.iter().enumerate() {
        if batch.is_empty() {
            continue;
        }
        let w = 1.0 / batch.len() as f64;
        for (p, (c, cond)) in batch.iter().zip(ctransforms(bundle, k, batch)?) {
            let lag = bundle.lagrangian.at(&p.x, &cond)?;
            let nodes = c.geodesic.nodes();
            let a = action_metric_grad(&lag, &nodes, bundle.dim(), bundle.quadrature(), w, &mut grad);
            let g1 = bundle.potentials[k].forward(&c.y1_star, &cond)[0];
            let gt = bundle.potentials[k].forward(&p.target, &cond)[0];
            total += w * (a - g1 + gt);
        }
    }
    Ok((total, grad))
}

/// Optimizer state of a run in progress.
pub struct Trainer<'d> {
    data: &'d ObservationSet,
    cfg: TrainingConfig,
    pub bundle: TransportBundle,
    pub trace: TrainingTrace,
    rng: ChaCha8Rng,
    adam_g: Vec<AdamState>,
    adam_t: Vec<AdamState>,
    adam_s: AdamState,
    adam_m: Option<AdamState>,
    start: Instant,
}

/// Losses and gradient norms of one inner sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepStats {
    pub dual: Vec<f64>,
    pub map: Vec<f64>,
    pub path: f64,
    pub grad_norm_g: f64,
    pub grad_norm_t: f64,
    pub grad_norm_s: f64,
}

impl<'d> Trainer<'d> {
    pub fn new(data: &'d ObservationSet, cfg: &TrainingConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bundle = init_bundle(data, cfg, &mut rng)?;
        Ok(Self {
            data,
            cfg: cfg.clone(),
            adam_g: bundle.potentials.iter().map(|n| AdamState::new(n.num_params())).collect(),
            adam_t: bundle.maps.iter().map(|n| AdamState::new(n.num_params())).collect(),
            adam_s: AdamState::new(bundle.spline.num_params()),
            adam_m: bundle.lagrangian.metric.as_ref().map(|m| AdamState::new(m.net().num_params())),
            bundle,
            trace: TrainingTrace::default(),
            rng,
            start: Instant::now(),
        })
    }

    /// One pass over all intervals updating `g_k` and `T_k`, then one `S` step.
    pub fn sweep(&mut self) -> Result<SweepStats> {
        let mut stats = SweepStats::default();
        let mut path_batch = Vec::new();
        for k in 0..self.bundle.num_intervals() {
            let batch = interval_batch(self.data, k, self.cfg.batch_size, &mut self.rng);
            if batch.is_empty() {
                return Err(Error::Validation(format!("no matched pairs for interval {k}")));
            }
            let cts = ctransforms(&self.bundle, k, &batch)?;
            let (dual, g_grad) = dual_grad(&self.bundle, k, &batch, &cts);
            let (map, t_grad) = map_grad(&self.bundle, k, &batch, &cts);
            finite(dual, &format!("dual[{k}]"))?;
            finite(map, &format!("map[{k}]"))?;
            stats.grad_norm_g = stats.grad_norm_g.max(sq_norm(&g_grad).sqrt());
            stats.grad_norm_t = stats.grad_norm_t.max(sq_norm(&t_grad).sqrt());
            // Ascent on the dual objective.
            let neg: Vec<f64> = g_grad.iter().map(|v| -v).collect();
            adam_step(self.bundle.potentials[k].params_mut().values_mut(), &neg, &mut self.adam_g[k], self.cfg.lr_g)
                .map_err(|_| Error::NonFinite { segment: format!("g[{k}]") })?;
            adam_step(self.bundle.maps[k].params_mut().values_mut(), &t_grad, &mut self.adam_t[k], self.cfg.lr_t)
                .map_err(|_| Error::NonFinite { segment: format!("T[{k}]") })?;
            self.trace.g_updates += 1;
            self.trace.t_updates += 1;
            for p in batch {
                let target = self.bundle.predict_map(k, &p.source, &p.x)?;
                path_batch.push(Pair { target, ..p });
            }
            stats.dual.push(dual);
            stats.map.push(map);
        }
        let mut s_grad = vec![0.0; self.bundle.spline.num_params()];
        stats.path = finite(path_grad(&self.bundle, &path_batch, Some(&mut s_grad))?, "path")?;
        stats.grad_norm_s = sq_norm(&s_grad).sqrt();
        adam_step(self.bundle.spline.params_mut().values_mut(), &s_grad, &mut self.adam_s, self.cfg.lr_s)
            .map_err(|_| Error::NonFinite { segment: "S".into() })?;
        self.trace.s_updates += 1;
        Ok(stats)
    }

    /// Fresh batches and c-transforms, then one descent step on the metric.
    /// Returns the outer objective and the gradient norm.
    pub fn metric_step(&mut self) -> Result<(f64, f64)> {
        let batches: Vec<Vec<Pair>> = (0..self.bundle.num_intervals())
            .map(|k| interval_batch(self.data, k, self.cfg.batch_size, &mut self.rng))
            .collect();
        let (loss, grad) = metric_grad(&self.bundle, &batches)?;
        finite(loss, "metric")?;
        let norm = sq_norm(&grad).sqrt();
        if let (Some(metric), Some(state)) = (self.bundle.lagrangian.metric.as_mut(), self.adam_m.as_mut()) {
            let params = metric.net_mut().params_mut().values_mut();
            match self.cfg.metric_optimizer {
                MetricOptimizer::Sgd => sgd_step(params, &grad, self.cfg.lr_metric),
                MetricOptimizer::Adam => adam_step(params, &grad, state, self.cfg.lr_metric),
            }
            .map_err(|_| Error::NonFinite { segment: "G".into() })?;
            self.trace.metric_updates += 1;
        }
        Ok((loss, norm))
    }

    /// `n_inner` sweeps followed by one metric step.
    pub fn outer_iteration(&mut self, outer: usize) -> Result<OuterRecord> {
        let mut last = SweepStats::default();
        let mut path = None;
        for _ in 0..self.cfg.n_inner {
            last = self.sweep()?;
            path = Some(last.path);
        }
        let (metric, grad_norm_metric) = self.metric_step()?;
        let record = OuterRecord {
            outer,
            dual: last.dual,
            map: last.map,
            path,
            metric,
            grad_norm_g: last.grad_norm_g,
            grad_norm_t: last.grad_norm_t,
            grad_norm_s: last.grad_norm_s,
            grad_norm_metric,
            wall_seconds: self.start.elapsed().as_secs_f64(),
        };
        self.trace.records.push(record.clone());
        Ok(record)
    }
}

/// Runs the alternating optimization. Deterministic given `cfg.seed`.
pub fn train(data: &ObservationSet, cfg: &TrainingConfig) -> std::result::Result<(TransportBundle, TrainingTrace), TrainFailure> {
    train_with(data, cfg, |_| {})
}

/// [`train`] with a callback invoked after every outer iteration.
pub fn train_with(
    data: &ObservationSet,
    cfg: &TrainingConfig,
    mut on_record: impl FnMut(&OuterRecord),
) -> std::result::Result<(TransportBundle, TrainingTrace), TrainFailure> {
    let mut trainer = Trainer::new(data, cfg).map_err(|source| TrainFailure {
        outer: 0,
        source,
        trace: TrainingTrace::default(),
    })?;
    for outer in 0..cfg.n_outer {
        match trainer.outer_iteration(outer) {
            Ok(r) => on_record(&r),
            Err(source) => {
                return Err(TrainFailure {
                    outer,
                    source,
                    trace: trainer.trace,
                })
            }
        }
    }
    Ok((trainer.bundle, trainer.trace))
}
