//! Fully connected networks with FiLM conditioning on the first layer.
//!
//! Forward passes record a [`Trace`]; [`FilmMlp::backward`] consumes it and
//! returns the input cotangent while accumulating parameter gradients. All
//! backpropagation in the crate goes through this one hand-derived routine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{Layout, ParamVector};
use crate::error::{Error, Result};

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Swish,
    Selu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Swish => z / (1.0 + (-z).exp()),
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA * z
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (z.exp() - 1.0)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Swish => {
                let s = 1.0 / (1.0 + (-z).exp());
                s + z * s * (1.0 - s)
            }
            Activation::Selu => {
                if z > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * z.exp()
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture of a [`FilmMlp`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Width of the condition vector; zero disables FiLM.
    pub cond_dim: usize,
    /// Hidden width of the condition embedder.
    pub film_width: usize,
}

impl MlpSpec {
    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input_dim);
        d.extend(&self.hidden);
        d.push(self.output_dim);
        d
    }

    fn has_film(&self) -> bool {
        self.cond_dim > 0 && self.film_width > 0
    }

    fn layout(&self) -> Layout {
        let dims = self.dims();
        let mut layout = Layout::new();
        for l in 0..dims.len() - 1 {
            layout.push(format!("w{l}"), &[dims[l + 1], dims[l]]);
            layout.push(format!("b{l}"), &[dims[l + 1]]);
        }
        if self.has_film() {
            let f = dims[1];
            layout.push("film.w_in", &[self.film_width, self.cond_dim]);
            layout.push("film.b_in", &[self.film_width]);
            layout.push("film.w_out", &[2 * f, self.film_width]);
            layout.push("film.b_out", &[2 * f]);
        }
        layout
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LinearSlot {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

/// Multilayer perceptron whose first-layer activations `h` are modulated as
/// `(1 + dγ(x)) ⊙ h + β(x)`, with `(dγ, β)` produced by a one-hidden-layer
/// embedder of the condition `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmMlp {
    spec: MlpSpec,
    params: ParamVector,
    slots: Vec<LinearSlot>,
    film: Option<(LinearSlot, LinearSlot)>,
}

/// Intermediate values from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Inputs to each linear layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    /// First-layer activations before modulation.
    first_act: Vec<f64>,
    gamma: Vec<f64>,
    cond: Vec<f64>,
    embed_pre: Vec<f64>,
    embed: Vec<f64>,
}

impl FilmMlp {
    /// All parameters zero; with FiLM this is the identity modulation.
    pub fn zeroed(spec: MlpSpec) -> Self {
        assert!(spec.input_dim > 0 && spec.output_dim > 0, "empty network");
        let params = ParamVector::zeros(spec.layout());
        Self::assemble(spec, params)
    }

    fn assemble(spec: MlpSpec, params: ParamVector) -> Self {
        let dims = spec.dims();
        let layout = params.layout();
        let slots = (0..dims.len() - 1)
            .map(|l| LinearSlot {
                w: layout.find(&format!("w{l}")).unwrap().offset,
                b: layout.find(&format!("b{l}")).unwrap().offset,
                rows: dims[l + 1],
                cols: dims[l],
            })
            .collect();
        let film = spec.has_film().then(|| {
            (
                LinearSlot {
                    w: layout.find("film.w_in").unwrap().offset,
                    b: layout.find("film.b_in").unwrap().offset,
                    rows: spec.film_width,
                    cols: spec.cond_dim,
                },
                LinearSlot {
                    w: layout.find("film.w_out").unwrap().offset,
                    b: layout.find("film.b_out").unwrap().offset,
                    rows: 2 * dims[1],
                    cols: spec.film_width,
                },
            )
        });
        Self {
            spec,
            params,
            slots,
            film,
        }
    }

    /// Uniform fan-in initialization; the FiLM output layer starts at zero so
    /// the network is initially unconditioned.
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut net = Self::zeroed(spec);
        let slots = net.slots().to_vec();
        let values = net.params.values_mut();
        for s in &slots {
            let bound = 1.0 / (s.cols as f64).sqrt();
            for v in &mut values[s.w..s.w + s.rows * s.cols] {
                *v = rng.random_range(-bound..bound);
            }
            for v in &mut values[s.b..s.b + s.rows] {
                *v = rng.random_range(-bound..bound);
            }
        }
        if let Some(embed) = net.film_in_slot() {
            let bound = 1.0 / (embed.cols as f64).sqrt();
            let values = net.params.values_mut();
            for v in &mut values[embed.w..embed.b + embed.rows] {
                *v = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_params(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        let layout = spec.layout();
        if params.layout() != &layout {
            return Err(Error::Validation(
                "parameter layout does not match network architecture".into(),
            ));
        }
        Ok(Self::assemble(spec, params))
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Zeroes the last linear layer so the network outputs exactly zero.
    pub fn zero_output_layer(&mut self) {
        let last = *self.slots().last().unwrap();
        let values = self.params.values_mut();
        values[last.w..last.w + last.rows * last.cols].fill(0.0);
        values[last.b..last.b + last.rows].fill(0.0);
    }

    fn slots(&self) -> &[LinearSlot] {
        &self.slots
    }

    fn film_in_slot(&self) -> Option<LinearSlot> {
        self.film.map(|f| f.0)
    }

    fn film_out_slot(&self) -> Option<LinearSlot> {
        self.film.map(|f| f.1)
    }

    fn check_dims(&self, input: &[f64], cond: &[f64]) {
        assert_eq!(input.len(), self.spec.input_dim, "network input dimension");
        if self.spec.has_film() {
            assert_eq!(cond.len(), self.spec.cond_dim, "network condition dimension");
        }
    }

    /// Checked variant of [`FilmMlp::forward`].
    pub fn try_forward(&self, input: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.spec.input_dim {
            return Err(Error::dim("network input", self.spec.input_dim, input.len()));
        }
        if self.spec.has_film() && cond.len() != self.spec.cond_dim {
            return Err(Error::dim("network condition", self.spec.cond_dim, cond.len()));
        }
        Ok(self.forward(input, cond))
    }

    /// Forward pass without recording intermediates.
    ///
    /// Panics on dimension mismatch.
    pub fn forward(&self, input: &[f64], cond: &[f64]) -> Vec<f64> {
        self.forward_impl(input, cond, None)
    }

    /// Forward pass recording what [`FilmMlp::backward`] needs.
    pub fn forward_trace(&self, input: &[f64], cond: &[f64]) -> (Vec<f64>, Trace) {
        let mut trace = Trace::default();
        let out = self.forward_impl(input, cond, Some(&mut trace));
        (out, trace)
    }

    fn forward_impl(&self, input: &[f64], cond: &[f64], mut trace: Option<&mut Trace>) -> Vec<f64> {
        self.check_dims(input, cond);
        let p = self.params.values();
        let act = self.spec.activation;
        let slots = self.slots();
        let n_layers = slots.len();

        let film = self.film_in_slot().map(|emb_in| {
            let emb_out = self.film_out_slot().unwrap();
            let embed_pre = affine(p, emb_in, cond);
            let embed: Vec<f64> = embed_pre.iter().map(|&z| act.apply(z)).collect();
            let out = affine(p, emb_out, &embed);
            let f = emb_out.rows / 2;
            let gamma: Vec<f64> = out[..f].iter().map(|d| 1.0 + d).collect();
            let beta = out[f..].to_vec();
            (embed_pre, embed, gamma, beta)
        });

        let mut x = input.to_vec();
        for (l, slot) in slots.iter().enumerate() {
            let z = affine(p, *slot, &x);
            let mut a: Vec<f64> = if l + 1 < n_layers {
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            if l == 0 {
                if let Some((_, _, gamma, beta)) = &film {
                    if let Some(t) = trace.as_deref_mut() {
                        t.first_act = a.clone();
                    }
                    for ((ai, g), b) in a.iter_mut().zip(gamma).zip(beta) {
                        *ai = g * *ai + b;
                    }
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(std::mem::replace(&mut x, Vec::new()));
                t.pre.push(z);
            }
            x = a;
        }
        if let Some(t) = trace {
            if let Some((embed_pre, embed, gamma, _)) = film {
                t.cond = cond.to_vec();
                t.embed_pre = embed_pre;
                t.embed = embed;
                t.gamma = gamma;
            }
        }
        x
    }

    /// Backpropagates `out_cot` through a recorded pass.
    ///
    /// Parameter gradients are added into `param_grad` when given (it must have
    /// `num_params()` entries). Returns the cotangent of the input.
    pub fn backward(&self, trace: &Trace, out_cot: &[f64], mut param_grad: Option<&mut [f64]>) -> Vec<f64> {
        assert_eq!(out_cot.len(), self.spec.output_dim, "output cotangent dimension");
        if let Some(g) = param_grad.as_deref() {
            assert_eq!(g.len(), self.num_params(), "gradient buffer length");
        }
        let p = self.params.values();
        let act = self.spec.activation;
        let slots = self.slots();
        let n_layers = slots.len();
        let film = !trace.gamma.is_empty();

        let mut d = out_cot.to_vec();
        let mut film_cot: Option<Vec<f64>> = None;
        for l in (0..n_layers).rev() {
            let slot = slots[l];
            if l == 0 && film {
                let f = d.len();
                let mut fc = vec![0.0; 2 * f];
                for i in 0..f {
                    fc[i] = d[i] * trace.first_act[i];
                    fc[f + i] = d[i];
                    d[i] *= trace.gamma[i];
                }
                film_cot = Some(fc);
            }
            if l + 1 < n_layers {
                for (di, &z) in d.iter_mut().zip(&trace.pre[l]) {
                    *di *= act.derivative(z);
                }
            }
            if let Some(g) = param_grad.as_deref_mut() {
                accumulate_outer(g, slot, &d, &trace.inputs[l]);
            }
            d = transpose_mul(p, slot, &d);
        }

        if let Some(fc) = film_cot {
            let emb_in = self.film_in_slot().unwrap();
            let emb_out = self.film_out_slot().unwrap();
            if let Some(g) = param_grad.as_deref_mut() {
                accumulate_outer(g, emb_out, &fc, &trace.embed);
                let mut de = transpose_mul(p, emb_out, &fc);
                for (v, &z) in de.iter_mut().zip(&trace.embed_pre) {
                    *v *= act.derivative(z);
                }
                accumulate_outer(g, emb_in, &de, &trace.cond);
            }
        }
        d
    }

    /// Gradient of `⟨out_cot, f(input)⟩` with respect to the parameters.
    pub fn param_grad(&self, input: &[f64], cond: &[f64], out_cot: &[f64]) -> Vec<f64> {
        let (_, trace) = self.forward_trace(input, cond);
        let mut g = vec![0.0; self.num_params()];
        self.backward(&trace, out_cot, Some(&mut g));
        g
    }
}

#[inline]
fn affine(p: &[f64], s: LinearSlot, x: &[f64]) -> Vec<f64> {
    let w = &p[s.w..s.w + s.rows * s.cols];
    let b = &p[s.b..s.b + s.rows];
    w.chunks_exact(s.cols)
        .zip(b)
        .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

#[inline]
fn transpose_mul(p: &[f64], s: LinearSlot, d: &[f64]) -> Vec<f64> {
    let w = &p[s.w..s.w + s.rows * s.cols];
    let mut out = vec![0.0; s.cols];
    for (row, &di) in w.chunks_exact(s.cols).zip(d) {
        if di == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * di;
        }
    }
    out
}

#[inline]
fn accumulate_outer(g: &mut [f64], s: LinearSlot, d: &[f64], x: &[f64]) {
    let gw = &mut g[s.w..s.w + s.rows * s.cols];
    for (row, &di) in gw.chunks_exact_mut(s.cols).zip(d) {
        if di == 0.0 {
            continue;
        }
        for (o, xi) in row.iter_mut().zip(x) {
            *o += di * xi;
        }
    }
    for (o, di) in g[s.b..s.b + s.rows].iter_mut().zip(d) {
        *o += di;
    }
}
