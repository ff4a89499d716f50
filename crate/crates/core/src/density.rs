//! Nadaraya–Watson conditional density and the log-density potential.
//!
//! `p̂(q|x) = Σ_i K_hy(q − y_i) K_hx(x − x_i) / Σ_j K_hx(x − x_j)` with
//! isotropic Gaussian kernels. In discrete mode the condition kernel is the
//! exact-match indicator, which amounts to one estimator per condition.
//!
//! The potential is `Û(q|x) = α ln(p̂(q|x) + ε)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Condition;
use crate::error::{Error, Result};

/// Condition bandwidth: Gaussian kernel width, or exact-match partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionBandwidth {
    Discrete,
    Gaussian(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Store {
    /// Row-major points per discrete id.
    Discrete(BTreeMap<i64, Vec<f64>>),
    Continuous { points: Vec<f64>, conds: Vec<f64> },
}

/// Kernel conditional density estimator over stored `(y, x)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwEstimator {
    h_y: f64,
    h_x: ConditionBandwidth,
    dim_y: usize,
    dim_x: usize,
    store: Store,
}

impl NwEstimator {
    pub fn new<'a>(
        data: impl IntoIterator<Item = (&'a [f64], &'a Condition)>,
        h_y: f64,
        h_x: ConditionBandwidth,
    ) -> Result<Self> {
        if !(h_y > 0.0) {
            return Err(Error::Config(format!("h_y must be positive, got {h_y}")));
        }
        let mut dim_y = None;
        let mut dim_x = 0;
        let mut store = match h_x {
            ConditionBandwidth::Discrete => Store::Discrete(BTreeMap::new()),
            ConditionBandwidth::Gaussian(h) => {
                if !(h > 0.0) {
                    return Err(Error::Config(format!("h_x must be positive, got {h}")));
                }
                Store::Continuous {
                    points: Vec::new(),
                    conds: Vec::new(),
                }
            }
        };
        let mut count = 0usize;
        for (y, x) in data {
            let d = *dim_y.get_or_insert(y.len());
            if y.len() != d {
                return Err(Error::dim("density data point", d, y.len()));
            }
            match (&mut store, x) {
                (Store::Discrete(map), Condition::Discrete(id)) => {
                    map.entry(*id).or_default().extend_from_slice(y);
                }
                (Store::Continuous { points, conds }, Condition::Continuous(c)) => {
                    if count == 0 {
                        dim_x = c.len();
                    } else if c.len() != dim_x {
                        return Err(Error::dim("density condition", dim_x, c.len()));
                    }
                    points.extend_from_slice(y);
                    conds.extend_from_slice(c);
                }
                _ => {
                    return Err(Error::Validation(
                        "condition kind does not match estimator mode".into(),
                    ))
                }
            }
            count += 1;
        }
        let dim_y = dim_y.ok_or_else(|| Error::Validation("density estimator needs data".into()))?;
        if let Store::Discrete(map) = &store {
            dim_x = usize::from(!map.is_empty());
        }
        Ok(Self {
            h_y,
            h_x,
            dim_y,
            dim_x,
            store,
        })
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn h_y(&self) -> f64 {
        self.h_y
    }

    pub fn h_x(&self) -> ConditionBandwidth {
        self.h_x
    }

    /// Resolves the condition once, yielding a density over `q` alone.
    pub fn at(&self, x: &Condition) -> Result<ConditionalDensity<'_>> {
        let norm = (2.0 * PI * self.h_y * self.h_y).powf(-(self.dim_y as f64) / 2.0);
        match (&self.store, x) {
            (Store::Discrete(map), Condition::Discrete(id)) => {
                let points = map
                    .get(id)
                    .ok_or_else(|| Error::UnknownCondition(id.to_string()))?;
                Ok(ConditionalDensity {
                    points,
                    weights: None,
                    dim: self.dim_y,
                    inv_two_h2: 0.5 / (self.h_y * self.h_y),
                    inv_h2: 1.0 / (self.h_y * self.h_y),
                    norm: norm / (points.len() / self.dim_y) as f64,
                })
            }
            (Store::Continuous { points, conds }, Condition::Continuous(c)) => {
                let ConditionBandwidth::Gaussian(h_x) = self.h_x else {
                    unreachable!()
                };
                if c.len() != self.dim_x {
                    return Err(Error::dim("density query condition", self.dim_x, c.len()));
                }
                // Normalized condition weights via log-sum-exp; the Gaussian
                // prefactor of K_hx cancels between numerator and denominator.
                let logits: Vec<f64> = conds
                    .chunks_exact(self.dim_x)
                    .map(|xi| -sq_dist(xi, c) / (2.0 * h_x * h_x))
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= total);
                Ok(ConditionalDensity {
                    points,
                    weights: Some(w),
                    dim: self.dim_y,
                    inv_two_h2: 0.5 / (self.h_y * self.h_y),
                    inv_h2: 1.0 / (self.h_y * self.h_y),
                    norm,
                })
            }
            _ => Err(Error::Validation(
                "query condition kind does not match estimator mode".into(),
            )),
        }
    }

    /// `p̂(q|x)`.
    pub fn density(&self, q: &[f64], x: &Condition) -> Result<f64> {
        if q.len() != self.dim_y {
            return Err(Error::dim("density query", self.dim_y, q.len()));
        }
        Ok(self.at(x)?.density(q))
    }
}

/// Kernel terms below `exp(-40) ≈ 4e-18` are skipped; next to `ε` they are
/// far below rounding in the potential.
const KERNEL_CUTOFF: f64 = 40.0;

/// `q ↦ p̂(q|x)` for a fixed condition.
#[derive(Debug, Clone)]
pub struct ConditionalDensity<'a> {
    points: &'a [f64],
    weights: Option<Vec<f64>>,
    dim: usize,
    inv_two_h2: f64,
    inv_h2: f64,
    norm: f64,
}

impl ConditionalDensity<'_> {
    pub fn density(&self, q: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, y) in self.points.chunks_exact(self.dim).enumerate() {
            let e = sq_dist(q, y) * self.inv_two_h2;
            if e > KERNEL_CUTOFF {
                continue;
            }
            let k = (-e).exp();
            acc += self.weights.as_ref().map_or(k, |w| w[i] * k);
        }
        acc * self.norm
    }

    /// Density and its gradient with respect to `q` (written into `grad`).
    pub fn density_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut acc = 0.0;
        for (i, y) in self.points.chunks_exact(self.dim).enumerate() {
            let e = sq_dist(q, y) * self.inv_two_h2;
            if e > KERNEL_CUTOFF {
                continue;
            }
            let mut k = (-e).exp();
            if let Some(w) = &self.weights {
                k *= w[i];
            }
            if k == 0.0 {
                continue;
            }
            acc += k;
            for ((g, qi), yi) in grad.iter_mut().zip(q).zip(y) {
                *g -= k * (qi - yi) * self.inv_h2;
            }
        }
        grad.iter_mut().for_each(|g| *g *= self.norm);
        acc * self.norm
    }
}

/// Log-density potential `Û(q|x) = α ln(p̂(q|x) + ε)`, frozen after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    estimator: Arc<NwEstimator>,
    alpha: f64,
    eps: f64,
}

pub const DEFAULT_EPS: f64 = 1e-9;

impl Potential {
    pub fn new(estimator: NwEstimator, alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {alpha}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
        }
        Ok(Self {
            estimator: Arc::new(estimator),
            alpha,
            eps,
        })
    }

    pub fn estimator(&self) -> &NwEstimator {
        &self.estimator
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, q: &[f64], x: &Condition) -> Result<f64> {
        if q.len() != self.estimator.dim_y {
            return Err(Error::dim("potential query", self.estimator.dim_y, q.len()));
        }
        Ok(self.at(x)?.value(q))
    }

    pub fn at(&self, x: &Condition) -> Result<ConditionalPotential<'_>> {
        Ok(ConditionalPotential {
            density: self.estimator.at(x)?,
            alpha: self.alpha,
            eps: self.eps,
        })
    }
}

/// `q ↦ Û(q|x)` for a fixed condition.
#[derive(Debug, Clone)]
pub struct ConditionalPotential<'a> {
    density: ConditionalDensity<'a>,
    alpha: f64,
    eps: f64,
}

impl ConditionalPotential<'_> {
    pub fn value(&self, q: &[f64]) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        self.alpha * (self.density.density(q) + self.eps).ln()
    }

    /// Value and gradient `α ∇p̂ / (p̂ + ε)`.
    pub fn value_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        if self.alpha == 0.0 {
            grad.fill(0.0);
            return 0.0;
        }
        let p = self.density.density_grad(q, grad);
        let scale = self.alpha / (p + self.eps);
        grad.iter_mut().for_each(|g| *g *= scale);
        self.alpha * (p + self.eps).ln()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
