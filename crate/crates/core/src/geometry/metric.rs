//! Conditional Riemannian metric with an eigenvalue budget.
//!
//! `G(q|x) = R E Rᵀ`, where `R` is the product of the `D(D−1)/2` Givens
//! rotations over index pairs `(i, j), i < j` in lexicographic order, and
//! `E = diag(B · softmax(ℓ))`. Angles and eigen-logits `ℓ` are network
//! outputs. The softmax keeps every eigenvalue positive and their sum equal
//! to the budget `B`, so `G → 0` is unreachable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Activation, FilmMlp, MlpSpec};
use crate::error::{Error, Result};

/// Eigenvalue treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum EigenMode {
    Learned,
    /// Pinned eigenvalues, rescaled to sum to the budget.
    Fixed(Vec<f64>),
}

/// Index pairs `(i, j), i < j` in lexicographic order.
pub fn givens_pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim)
        .flat_map(|i| (i + 1..dim).map(move |j| (i, j)))
        .collect()
}

/// Composed rotation `R = G_1 G_2 ⋯ G_P` as a row-major `dim × dim` matrix.
pub fn givens_rotation(dim: usize, angles: &[f64]) -> Vec<f64> {
    let pairs = givens_pairs(dim);
    assert_eq!(angles.len(), pairs.len(), "number of Givens angles");
    let mut r = vec![0.0; dim * dim];
    for i in 0..dim {
        r[i * dim + i] = 1.0;
    }
    for (&(i, j), &theta) in pairs.iter().zip(angles) {
        let (s, c) = theta.sin_cos();
        for row in 0..dim {
            let a = r[row * dim + i];
            let b = r[row * dim + j];
            r[row * dim + i] = c * a + s * b;
            r[row * dim + j] = -s * a + c * b;
        }
    }
    r
}

/// `B · softmax(logits)`.
pub fn budget_softmax(logits: &[f64], budget: f64) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| budget * v / total).collect()
}

/// Quadratic form `½ vᵀ R E Rᵀ v` with its pullbacks.
#[derive(Debug, Clone)]
struct QuadraticForm {
    value: f64,
    dv: Vec<f64>,
    dangles: Vec<f64>,
    deigen: Vec<f64>,
}

fn quadratic_form(dim: usize, angles: &[f64], eigen: &[f64], v: &[f64]) -> QuadraticForm {
    let pairs = givens_pairs(dim);
    // u_0 = v, u_p = G_pᵀ u_{p-1}; Rᵀ v = u_P.
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(pairs.len() + 1);
    let mut u = v.to_vec();
    let mut trig = Vec::with_capacity(pairs.len());
    for (&(i, j), &theta) in pairs.iter().zip(angles) {
        stages.push(u.clone());
        let (s, c) = theta.sin_cos();
        let (a, b) = (u[i], u[j]);
        u[i] = c * a + s * b;
        u[j] = -s * a + c * b;
        trig.push((s, c));
    }
    let value = 0.5 * u.iter().zip(eigen).map(|(ui, e)| e * ui * ui).sum::<f64>();
    let deigen: Vec<f64> = u.iter().map(|ui| 0.5 * ui * ui).collect();
    let mut du: Vec<f64> = u.iter().zip(eigen).map(|(ui, e)| e * ui).collect();
    let mut dangles = vec![0.0; pairs.len()];
    for p in (0..pairs.len()).rev() {
        let (i, j) = pairs[p];
        let (s, c) = trig[p];
        let prev = &stages[p];
        let (a, b) = (prev[i], prev[j]);
        let (oi, oj) = (c * a + s * b, -s * a + c * b);
        dangles[p] = du[i] * oj - du[j] * oi;
        let (gi, gj) = (du[i], du[j]);
        du[i] = c * gi - s * gj;
        du[j] = s * gi + c * gj;
    }
    QuadraticForm {
        value,
        dv: du,
        dangles,
        deigen,
    }
}

/// Position- and condition-dependent SPD metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    net: FilmMlp,
    budget: f64,
    dim: usize,
    eigen: EigenMode,
}

/// Value, position gradient and velocity gradient of `½ q̇ᵀ G(q|x) q̇`.
#[derive(Debug, Clone)]
pub struct KineticGrad {
    pub value: f64,
    pub dq: Vec<f64>,
    pub dv: Vec<f64>,
}

impl MetricField {
    pub fn num_angles(dim: usize) -> usize {
        dim * (dim - 1) / 2
    }

    /// Network spec mapping `q` to raw angle and eigen-logit outputs.
    pub fn net_spec(dim: usize, cond_dim: usize, hidden: Vec<usize>, activation: Activation, film_width: usize, eigen: &EigenMode) -> MlpSpec {
        let eigen_outputs = match eigen {
            EigenMode::Learned => dim,
            EigenMode::Fixed(_) => 0,
        };
        MlpSpec {
            input_dim: dim,
            output_dim: (Self::num_angles(dim) + eigen_outputs).max(1),
            hidden,
            activation,
            cond_dim,
            film_width,
        }
    }

    /// Randomly initialized hidden layers with a zero output layer, so the
    /// initial metric is `(B / D) I` (learned eigenvalues) or the fixed diagonal.
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        cond_dim: usize,
        hidden: Vec<usize>,
        activation: Activation,
        film_width: usize,
        budget: f64,
        eigen: EigenMode,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = Self::net_spec(dim, cond_dim, hidden, activation, film_width, &eigen);
        let mut net = FilmMlp::new(spec, rng);
        net.zero_output_layer();
        Self::from_net(net, dim, budget, eigen)
    }

    pub fn from_net(net: FilmMlp, dim: usize, budget: f64, eigen: EigenMode) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("metric dimension must be positive".into()));
        }
        if !(budget > 0.0) {
            return Err(Error::Config(format!("eigenvalue budget must be positive, got {budget}")));
        }
        if let EigenMode::Fixed(list) = &eigen {
            if list.len() != dim || list.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Config(format!(
                    "fixed eigenvalues must be {dim} positive numbers"
                )));
            }
        }
        let expected = Self::net_spec(dim, net.spec().cond_dim, net.spec().hidden.clone(), net.spec().activation, net.spec().film_width, &eigen);
        if net.spec() != &expected {
            return Err(Error::Validation("metric network has the wrong shape".into()));
        }
        Ok(Self {
            net,
            budget,
            dim,
            eigen,
        })
    }

    pub fn net(&self) -> &FilmMlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut FilmMlp {
        &mut self.net
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigen_mode(&self) -> &EigenMode {
        &self.eigen
    }

    fn split(&self, raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = Self::num_angles(self.dim);
        let angles = raw[..p].to_vec();
        let eigen = match &self.eigen {
            EigenMode::Learned => budget_softmax(&raw[p..p + self.dim], self.budget),
            EigenMode::Fixed(list) => {
                let total: f64 = list.iter().sum();
                list.iter().map(|v| self.budget * v / total).collect()
            }
        };
        (angles, eigen)
    }

    /// Rotation angles and eigenvalues at `(q, x)`.
    pub fn decompose(&self, q: &[f64], cond: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.split(&self.net.forward(q, cond))
    }

    /// Row-major `D × D` matrix `G(q|x)`.
    pub fn eval(&self, q: &[f64], cond: &[f64]) -> Vec<f64> {
        let (angles, eigen) = self.decompose(q, cond);
        let r = givens_rotation(self.dim, &angles);
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                g[i * d + j] = (0..d).map(|k| r[i * d + k] * eigen[k] * r[j * d + k]).sum();
            }
        }
        g
    }

    pub fn kinetic(&self, q: &[f64], v: &[f64], cond: &[f64]) -> f64 {
        let (angles, eigen) = self.decompose(q, cond);
        quadratic_form(self.dim, &angles, &eigen, v).value
    }

    fn raw_cotangent(&self, raw: &[f64], form: &QuadraticForm) -> Vec<f64> {
        let p = Self::num_angles(self.dim);
        let mut cot = vec![0.0; raw.len()];
        cot[..p].copy_from_slice(&form.dangles);
        if let EigenMode::Learned = self.eigen {
            // E = B softmax(ℓ): dℓ_j = B p_j (dE_j − Σ_i dE_i p_i).
            let e = budget_softmax(&raw[p..p + self.dim], 1.0);
            let mean: f64 = form.deigen.iter().zip(&e).map(|(d, pi)| d * pi).sum();
            for j in 0..self.dim {
                cot[p + j] = self.budget * e[j] * (form.deigen[j] - mean);
            }
        }
        cot
    }

    /// Kinetic energy with gradients in `q` and `q̇`.
    pub fn kinetic_grad(&self, q: &[f64], v: &[f64], cond: &[f64]) -> KineticGrad {
        let (raw, trace) = self.net.forward_trace(q, cond);
        let (angles, eigen) = self.split(&raw);
        let form = quadratic_form(self.dim, &angles, &eigen, v);
        let cot = self.raw_cotangent(&raw, &form);
        let dq = self.net.backward(&trace, &cot, None);
        KineticGrad {
            value: form.value,
            dq,
            dv: form.dv,
        }
    }

    /// Adds `scale · ∂K/∂θ` into `grad` (length = number of network parameters).
    pub fn kinetic_param_grad(&self, q: &[f64], v: &[f64], cond: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let (raw, trace) = self.net.forward_trace(q, cond);
        let (angles, eigen) = self.split(&raw);
        let form = quadratic_form(self.dim, &angles, &eigen, v);
        let mut cot = self.raw_cotangent(&raw, &form);
        cot.iter_mut().for_each(|c| *c *= scale);
        self.net.backward(&trace, &cot, Some(grad));
        form.value
    }
}

/// `½ vᵀ v`, the kinetic energy under the identity metric.
pub fn identity_kinetic(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::check_gradient;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_metric(dim: usize, seed: u64, eigen: EigenMode) -> MetricField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = MetricField::net_spec(dim, 3, vec![16, 16], Activation::Tanh, 8, &eigen);
        let net = FilmMlp::new(spec, &mut rng);
        let mut m = MetricField::from_net(net, dim, 2.0, eigen).unwrap();
        for v in m.net_mut().params_mut().segment_mut("film.w_out").unwrap() {
            *v = rng.random_range(-0.3..0.3);
        }
        m
    }

    #[test]
    fn uniform_logits_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MetricField::new(2, 1, vec![8], Activation::Relu, 4, 2.0, EigenMode::Learned, &mut rng).unwrap();
        assert_eq!(m.eval(&[0.3, -0.1], &[1.0]), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn logits_ln3_zero_split_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = MetricField::new(2, 0, vec![4], Activation::Relu, 0, 2.0, EigenMode::Learned, &mut rng).unwrap();
        // Output bias: [angle, ℓ_1, ℓ_2].
        let last = m.net().spec().hidden.len();
        m.net_mut()
            .params_mut()
            .segment_mut(&format!("b{last}"))
            .unwrap()
            .copy_from_slice(&[0.0, 3f64.ln(), 0.0]);
        let g = m.eval(&[0.0, 0.0], &[]);
        let expected = [1.5, 0.0, 0.0, 0.5];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((m.kinetic(&[0.0, 0.0], &[1.0, 1.0], &[]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kinetic_examples() {
        let m = random_metric(2, 5, EigenMode::Learned);
        assert_eq!(m.kinetic(&[0.4, 0.2], &[0.0, 0.0], &[1.0, 0.0, 0.0]), 0.0);
        assert_eq!(identity_kinetic(&[3.0, 4.0]), 12.5);
    }

    #[test]
    fn kinetic_matches_explicit_matrix() {
        let m = random_metric(3, 9, EigenMode::Learned);
        let (q, v, c) = ([0.1, -0.3, 0.8], [1.0, -2.0, 0.5], [0.0, 1.0, 0.0]);
        let g = m.eval(&q, &c);
        let explicit: f64 = 0.5 * (0..3).map(|i| (0..3).map(|j| v[i] * g[i * 3 + j] * v[j]).sum::<f64>()).sum::<f64>();
        assert!((m.kinetic(&q, &v, &c) - explicit).abs() < 1e-12);
    }

    #[test]
    fn spd_and_budget_on_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [2, 3, 4] {
            let m = random_metric(dim, dim as u64, EigenMode::Learned);
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let g = DMatrix::from_row_slice(dim, dim, &m.eval(&q, &c));
                assert!((&g - g.transpose()).amax() < 1e-10);
                let eig = g.clone().symmetric_eigen().eigenvalues;
                assert!(eig.iter().all(|&e| e > 0.0));
                assert!((eig.sum() - 2.0).abs() < 1e-6);
                assert!((g.trace() - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn givens_product_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for dim in 2..6 {
            let angles: Vec<f64> = (0..dim * (dim - 1) / 2).map(|_| rng.random_range(-6.0..6.0)).collect();
            let r = DMatrix::from_row_slice(dim, dim, &givens_rotation(dim, &angles));
            let err = (r.transpose() * &r - DMatrix::identity(dim, dim)).amax();
            assert!(err < 1e-12, "dim {dim}: {err}");
            assert!((r.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_eigen_mode_rescales_to_budget() {
        let m = random_metric(2, 2, EigenMode::Fixed(vec![1.0, 0.1]));
        let (_, e) = m.decompose(&[0.1, 0.2], &[0.0, 0.0, 1.0]);
        assert!((e[0] - 2.0 / 1.1).abs() < 1e-14 && (e[1] - 0.2 / 1.1).abs() < 1e-14);
        assert!(MetricField::new(2, 0, vec![], Activation::Relu, 0, 2.0, EigenMode::Fixed(vec![1.0, 0.0]), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for eigen in [EigenMode::Learned, EigenMode::Fixed(vec![1.0, 0.1, 0.5])] {
            let m = random_metric(3, 13, eigen);
            let (q, v, c) = ([0.2, -0.5, 0.3], [0.7, 0.1, -1.1], [1.0, 0.0, -0.5]);
            let kg = m.kinetic_grad(&q, &v, &c);
            let rq = check_gradient(|q| m.kinetic(q, &v, &c), &q, &kg.dq, None, 1e-5);
            let rv = check_gradient(|v| m.kinetic(&q, v, &c), &v, &kg.dv, None, 1e-5);
            assert!(rq.max_relative_error < 1e-4, "{rq:?}");
            assert!(rv.max_relative_error < 1e-4, "{rv:?}");

            let mut pg = vec![0.0; m.net().num_params()];
            m.kinetic_param_grad(&q, &v, &c, 1.0, &mut pg);
            let base = m.clone();
            let rp = check_gradient(
                |theta| {
                    let mut mm = base.clone();
                    mm.net_mut().params_mut().values_mut().copy_from_slice(theta);
                    mm.kinetic(&q, &v, &c)
                },
                m.net().params().values(),
                &pg,
                None,
                1e-5,
            );
            assert!(rp.max_relative_error < 1e-4, "{rp:?}");
        }
    }
}
