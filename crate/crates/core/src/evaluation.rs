//! Sample-based metrics, the ablation runner and the regression / flow
//! matching baselines.

use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::semicircle::{sample_truth, x_offset, CONDITIONS};
use crate::data::{Condition, ObservationSet, SemicircleConfig};
use crate::density::sq_dist;
use crate::diff::{adam_step, Activation, AdamState, FilmMlp, MlpSpec};
use crate::error::{Error, Result};
use crate::sampling::{locate, SurrogateModel};
use crate::training::{train, TrainingConfig};

fn check_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("sample sets must be non-empty".into()));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(Error::Validation("samples have inconsistent dimensions".into()));
    }
    Ok(d)
}

/// Mean negative log-density of `truth` under an isotropic Gaussian KDE
/// fitted to `generated`.
pub fn eval_nll(generated: &[Vec<f64>], truth: &[Vec<f64>], bandwidth: f64) -> Result<f64> {
    let d = check_sets(generated, truth)?;
    if !(bandwidth > 0.0) {
        return Err(Error::Validation("bandwidth must be positive".into()));
    }
    let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * bandwidth * bandwidth).ln() - (generated.len() as f64).ln();
    let inv = 0.5 / (bandwidth * bandwidth);
    let mut total = 0.0;
    let mut exps = vec![0.0; generated.len()];
    for q in truth {
        for (e, g) in exps.iter_mut().zip(generated) {
            *e = -sq_dist(q, g) * inv;
        }
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + exps.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
        total -= lse + log_norm;
    }
    Ok(total / truth.len() as f64)
}

/// Mean distance to the perimeter of condition `c`'s circle (radius 1).
pub fn eval_cd(samples: &[Vec<f64>], c: i64) -> f64 {
    eval_cd_radius(samples, c, 1.0)
}

pub fn eval_cd_radius(samples: &[Vec<f64>], c: i64, r_nom: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let cx = x_offset(c);
    samples.iter().map(|p| ((p[0] - cx).hypot(p[1]) - r_nom).abs()).sum::<f64>() / samples.len() as f64
}

/// Minimum-cost perfect assignment for a square row-major cost matrix.
/// Returns `assign[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "square cost matrix");
    // Potentials u (rows), v (cols); p[j] = row matched to column j (1-based).
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Exact 2-Wasserstein distance between equal-size empirical measures.
pub fn eval_w2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_sets(a, b)?;
    if a.len() != b.len() {
        return Err(Error::Validation(format!("W2 needs equal sizes, got {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    let cost: Vec<f64> = a.iter().flat_map(|p| b.iter().map(move |q| sq_dist(p, q))).collect();
    let assign = hungarian(&cost, n);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).sqrt())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|` (V-statistic).
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_sets(a, b)?;
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < a.len()).collect();
    Ok(energy_from_matrix(&distance_matrix(&pooled), pooled.len(), &labels))
}

fn distance_matrix(points: &[&[f64]]) -> Vec<f64> {
    let n = points.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(points[i], points[j]);
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    }
    m
}

fn energy_from_matrix(m: &[f64], n: usize, in_a: &[bool]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let d = m[i * n + j];
            match (in_a[i], in_a[j]) {
                (true, true) => xx += d,
                (false, false) => yy += d,
                _ => xy += d,
            }
        }
    }
    let na = in_a.iter().filter(|&&f| f).count() as f64;
    let nb = n as f64 - na;
    xy / (na * nb) - xx / (na * na) - yy / (nb * nb)
}

/// Permutation test of equal distributions; returns `(statistic, p-value)`.
pub fn energy_test(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> Result<(f64, f64)> {
    check_sets(a, b)?;
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let n = pooled.len();
    let m = distance_matrix(&pooled);
    let mut labels: Vec<bool> = (0..n).map(|i| i < a.len()).collect();
    let observed = energy_from_matrix(&m, n, &labels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if energy_from_matrix(&m, n, &labels) >= observed {
            exceed += 1;
        }
    }
    Ok((observed, (exceed + 1) as f64 / (permutations + 1) as f64))
}

/// Mean with standard error over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Absent for a single run.
    pub se: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let se = (n > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Self { mean, se, n }
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.se {
            Some(se) => write!(f, "{:.4} ({:.4})", self.mean, se),
            None => write!(f, "{:.4}", self.mean),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub nll: f64,
    pub cd: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t: f64,
    pub condition: i64,
    pub nll: Stat,
    pub cd: Stat,
    pub w2: Stat,
}

/// Metrics for one variant across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub runs: usize,
    pub failures: Vec<String>,
    pub cells: Vec<Cell>,
    /// Per-run means over all cells, aggregated across runs.
    pub nll: Stat,
    pub cd: Stat,
    pub w2: Stat,
    pub seconds_per_run: f64,
}

impl EvalReport {
    /// Rows `variant,t,condition,metric,mean,se` for plotting.
    pub fn flat_rows(&self) -> Vec<String> {
        let se = |s: &Stat| s.se.map_or(String::new(), |v| v.to_string());
        let mut rows = Vec::new();
        for c in &self.cells {
            for (name, s) in [("nll", &c.nll), ("cd", &c.cd), ("w2", &c.w2)] {
                rows.push(format!("{},{},{},{},{},{}", self.variant, c.t, c.condition, name, s.mean, se(s)));
            }
        }
        for (name, s) in [("nll", &self.nll), ("cd", &self.cd), ("w2", &self.w2)] {
            rows.push(format!("{},all,all,{},{},{}", self.variant, name, s.mean, se(s)));
        }
        rows
    }
}

/// Evaluation protocol against freshly drawn semicircle truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub times: Vec<f64>,
    pub truth: SemicircleConfig,
    /// Generated and truth samples per (time, condition).
    pub n_samples: usize,
    pub bandwidth: f64,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            times: vec![0.25, 0.75],
            truth: SemicircleConfig::default(),
            n_samples: 200,
            bandwidth: 0.05,
            seed: 1_000_003,
        }
    }
}

/// Metrics of one trained model at every `(t, condition)` of the protocol.
pub fn evaluate_model(model: &SurrogateModel, protocol: &EvalProtocol, run_seed: u64) -> Result<Vec<((f64, i64), CellMetrics)>> {
    evaluate_sampler(
        |x, t, n, seed| model.sample(x, t, n, seed),
        model.anchors.groups().iter().map(|g| &g.condition),
        protocol,
        run_seed,
    )
}

/// Like [`evaluate_model`] but against the samples of `truth` recorded at each
/// requested time, drawing as many model samples as there are truth samples
/// in the cell. CD is reported only for semicircle condition ids in 2-D;
/// other cells carry NaN.
pub fn evaluate_model_on(
    model: &SurrogateModel,
    truth: &ObservationSet,
    times: &[f64],
    bandwidth: f64,
    run_seed: u64,
) -> Result<Vec<((f64, i64), CellMetrics)>> {
    let mut out = Vec::new();
    for (ti, &t) in times.iter().enumerate() {
        for g in model.anchors.groups() {
            let Condition::Discrete(c) = g.condition else {
                return Err(Error::Validation("evaluation needs discrete conditions".into()));
            };
            let reference: Vec<Vec<f64>> = truth
                .records()
                .iter()
                .filter(|r| r.x == g.condition && (r.t - t).abs() <= 1e-12)
                .map(|r| r.y.clone())
                .collect();
            if reference.is_empty() {
                return Err(Error::Validation(format!("no truth samples for condition {c} at t={t}")));
            }
            let seed = run_seed.wrapping_mul(31).wrapping_add((ti as u64) << 32 ^ c as u64);
            let generated = model.sample(&g.condition, t, reference.len(), seed)?;
            let cd = if CONDITIONS.contains(&c) && truth.dim_y() == 2 {
                eval_cd(&generated, c)
            } else {
                f64::NAN
            };
            let metrics = CellMetrics {
                nll: eval_nll(&generated, &reference, bandwidth)?,
                cd,
                w2: eval_w2(&generated, &reference)?,
            };
            out.push(((t, c), metrics));
        }
    }
    Ok(out)
}

fn evaluate_sampler<'a>(
    sampler: impl Fn(&Condition, f64, usize, u64) -> Result<Vec<Vec<f64>>>,
    conditions: impl Iterator<Item = &'a Condition>,
    protocol: &EvalProtocol,
    run_seed: u64,
) -> Result<Vec<((f64, i64), CellMetrics)>> {
    let ids: Vec<i64> = conditions
        .filter_map(|c| match c {
            Condition::Discrete(id) => Some(*id),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (ti, &t) in protocol.times.iter().enumerate() {
        for &c in &ids {
            let cell_seed = protocol.seed ^ (ti as u64) << 32 ^ c as u64;
            let truth = sample_truth(&protocol.truth, c, t, protocol.n_samples, cell_seed);
            let generated = sampler(&Condition::Discrete(c), t, protocol.n_samples, run_seed.wrapping_mul(31).wrapping_add(cell_seed))?;
            let metrics = CellMetrics {
                nll: eval_nll(&generated, &truth, protocol.bandwidth)?,
                cd: eval_cd_radius(&generated, c, protocol.truth.r_nom),
                w2: eval_w2(&generated, &truth)?,
            };
            out.push(((t, c), metrics));
        }
    }
    Ok(out)
}

/// Collapses per-run cell metrics into a report.
pub fn aggregate(variant: &str, runs: &[Vec<((f64, i64), CellMetrics)>], failures: Vec<String>, seconds_per_run: f64) -> EvalReport {
    let mut cells = Vec::new();
    if let Some(first) = runs.first() {
        for (idx, ((t, c), _)) in first.iter().enumerate() {
            let pick = |f: fn(&CellMetrics) -> f64| Stat::of(&runs.iter().map(|r| f(&r[idx].1)).collect::<Vec<_>>());
            cells.push(Cell {
                t: *t,
                condition: *c,
                nll: pick(|m| m.nll),
                cd: pick(|m| m.cd),
                w2: pick(|m| m.w2),
            });
        }
    }
    let per_run = |f: fn(&CellMetrics) -> f64| {
        Stat::of(&runs.iter().map(|r| r.iter().map(|(_, m)| f(m)).sum::<f64>() / r.len().max(1) as f64).collect::<Vec<_>>())
    };
    EvalReport {
        variant: variant.to_string(),
        runs: runs.len(),
        failures,
        cells,
        nll: per_run(|m| m.nll),
        cd: per_run(|m| m.cd),
        w2: per_run(|m| m.w2),
        seconds_per_run,
    }
}

/// Trains every variant `runs` times (seeds `cfg.seed + r`) and evaluates
/// each run against fresh truth. Failed runs are recorded, not fatal.
pub fn run_ablation(
    data: &ObservationSet,
    variants: &[(String, TrainingConfig)],
    runs: usize,
    protocol: &EvalProtocol,
    mut progress: impl FnMut(&str, usize, Option<&[((f64, i64), CellMetrics)]>),
) -> Vec<EvalReport> {
    variants
        .iter()
        .map(|(name, cfg)| {
            let mut results = Vec::new();
            let mut failures = Vec::new();
            let start = Instant::now();
            for r in 0..runs {
                let cfg = TrainingConfig { seed: cfg.seed + r as u64, ..cfg.clone() };
                let outcome = train(data, &cfg)
                    .map_err(|f| Error::Validation(f.to_string()))
                    .and_then(|(bundle, _)| SurrogateModel::new(bundle, data.clone(), cfg.clone()))
                    .and_then(|m| evaluate_model(&m, protocol, cfg.seed));
                match outcome {
                    Ok(cells) => {
                        progress(name, r, Some(&cells));
                        results.push(cells);
                    }
                    Err(e) => {
                        progress(name, r, None);
                        failures.push(format!("run {r}: {e}"));
                    }
                }
            }
            aggregate(name, &results, failures, start.elapsed().as_secs_f64() / runs.max(1) as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Direct,
    Cfm,
}

impl BaselineKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "cfm" => Ok(Self::Cfm),
            _ => Err(Error::Config(format!("unknown baseline `{s}` (expected direct or cfm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub film_width: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Gradient steps.
    pub steps: usize,
    /// Euler steps across a whole interval.
    pub euler_steps: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64; 4],
            activation: Activation::Swish,
            film_width: 16,
            lr: 1e-3,
            batch_size: 256,
            steps: 2000,
            euler_steps: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub config: BaselineConfig,
    /// One network for `direct`, one per interval for `cfm`.
    pub nets: Vec<FilmMlp>,
    pub anchors: ObservationSet,
}

fn minibatch_train(
    net: &mut FilmMlp,
    cfg: &BaselineConfig,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>),
) -> Result<f64> {
    let mut state = AdamState::new(net.num_params());
    let mut last = f64::NAN;
    for _ in 0..cfg.steps {
        let mut grad = vec![0.0; net.num_params()];
        let mut loss = 0.0;
        let w = 1.0 / cfg.batch_size as f64;
        for _ in 0..cfg.batch_size {
            let (input, cond, target) = draw(rng);
            let (out, trace) = net.forward_trace(&input, &cond);
            let diff: Vec<f64> = out.iter().zip(&target).map(|(a, b)| a - b).collect();
            loss += diff.iter().map(|d| d * d).sum::<f64>() * w;
            let cot: Vec<f64> = diff.iter().map(|d| 2.0 * w * d).collect();
            net.backward(&trace, &cot, Some(&mut grad));
        }
        adam_step(net.params_mut().values_mut(), &grad, &mut state, cfg.lr)?;
        last = loss;
    }
    Ok(last)
}

/// Trains a baseline on all anchor data. Returns the model and final loss.
pub fn train_baseline(kind: BaselineKind, data: &ObservationSet, cfg: &BaselineConfig) -> Result<(BaselineModel, f64)> {
    if cfg.batch_size == 0 || cfg.euler_steps == 0 {
        return Err(Error::Config("batch_size and euler_steps must be positive".into()));
    }
    let enc = data.encoder();
    let d = data.dim_y();
    let spec = MlpSpec {
        input_dim: d + 1,
        output_dim: d,
        hidden: cfg.hidden.clone(),
        activation: cfg.activation,
        cond_dim: enc.dim(),
        film_width: cfg.film_width,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups = data.groups();
    let times = data.anchor_times().to_vec();
    let conds: Vec<Vec<f64>> = groups.iter().map(|g| enc.encode(&g.condition)).collect::<Result<_>>()?;
    let y = |i: usize| data.records()[i].y.clone();
    let (nets, loss) = match kind {
        BaselineKind::Direct => {
            // (base sample at the first anchor, t_k) → sample at t_k.
            let mut net = FilmMlp::new(spec, &mut rng);
            let loss = minibatch_train(&mut net, cfg, &mut rng, |rng| {
                let g = rng.random_range(0..groups.len());
                let k = rng.random_range(0..times.len());
                let base = groups[g].per_anchor[0].choose(rng).copied().unwrap();
                let target = groups[g].per_anchor[k].choose(rng).copied().unwrap();
                let mut input = y(base);
                input.push(times[k]);
                (input, conds[g].clone(), y(target))
            })?;
            (vec![net], loss)
        }
        BaselineKind::Cfm => {
            let mut nets = Vec::new();
            let mut loss = 0.0;
            for k in 0..times.len() - 1 {
                let mut net = FilmMlp::new(spec.clone(), &mut rng);
                loss += minibatch_train(&mut net, cfg, &mut rng, |rng| {
                    let g = rng.random_range(0..groups.len());
                    let y0 = y(groups[g].per_anchor[k].choose(rng).copied().unwrap());
                    let y1 = y(groups[g].per_anchor[k + 1].choose(rng).copied().unwrap());
                    let s: f64 = rng.random();
                    let mut input: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| (1.0 - s) * a + s * b).collect();
                    input.push(s);
                    let target = y0.iter().zip(&y1).map(|(a, b)| b - a).collect();
                    (input, conds[g].clone(), target)
                })?;
                nets.push(net);
            }
            (nets, loss / (times.len() - 1) as f64)
        }
    };
    Ok((
        BaselineModel {
            kind,
            config: cfg.clone(),
            nets,
            anchors: data.clone(),
        },
        loss,
    ))
}

/// Maps a base sample to time `t`. For `direct` the base lives at the first
/// anchor; for `cfm` at the left anchor of the interval containing `t`.
pub fn predict_baseline(model: &BaselineModel, y0: &[f64], x: &Condition, t: f64) -> Result<Vec<f64>> {
    let cond = model.anchors.encoder().encode(x)?;
    match model.kind {
        BaselineKind::Direct => {
            let (lo, hi) = (model.anchors.anchor_times()[0], *model.anchors.anchor_times().last().unwrap());
            if !(t >= lo && t <= hi) {
                return Err(Error::Extrapolation { value: t, min: lo, max: hi });
            }
            let mut input = y0.to_vec();
            input.push(t);
            Ok(model.nets[0].forward(&input, &cond))
        }
        BaselineKind::Cfm => {
            let (k, s_end) = locate(model.anchors.anchor_times(), t)?;
            let steps = ((model.config.euler_steps as f64 * s_end).ceil() as usize).max(1);
            let ds = s_end / steps as f64;
            let mut y = y0.to_vec();
            for i in 0..steps {
                let mut input = y.clone();
                input.push(i as f64 * ds);
                let v = model.nets[k].forward(&input, &cond);
                for (a, b) in y.iter_mut().zip(v) {
                    *a += ds * b;
                }
            }
            Ok(y)
        }
    }
}

/// `n` baseline samples at `(x, t)`, resampling the appropriate base anchor.
pub fn sample_baseline(model: &BaselineModel, x: &Condition, t: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let k = match model.kind {
        BaselineKind::Direct => 0,
        BaselineKind::Cfm => locate(model.anchors.anchor_times(), t)?.0,
    };
    let base = model.anchors.samples(k, x);
    if base.is_empty() {
        return Err(Error::UnknownCondition(x.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| predict_baseline(model, base[rng.random_range(0..base.len())], x, t)).collect()
}

/// Evaluates a baseline with the same protocol as [`evaluate_model`].
pub fn evaluate_baseline(model: &BaselineModel, protocol: &EvalProtocol, run_seed: u64) -> Result<Vec<((f64, i64), CellMetrics)>> {
    evaluate_sampler(|x, t, n, seed| sample_baseline(model, x, t, n, seed), model.anchors.groups().iter().map(|g| &g.condition), protocol, run_seed)
}
