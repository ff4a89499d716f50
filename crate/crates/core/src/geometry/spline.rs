//! Natural cubic splines and endpoint-pinned spline paths.
//!
//! A [`SplinePath`] interpolates `y_start`, `K` interior knots and `y_end` at
//! the uniform parameters `s_j = j / (K + 1)`. Since a natural spline is linear
//! in its node values, evaluation at fixed parameters reduces to fixed weight
//! matrices ([`SplineBasis`]), which is how the action and its gradients are
//! computed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` multiplies `x[i-1]` and `upper[i]` multiplies `x[i+1]` in row `i`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    c[0] = upper[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / d;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// Scalar natural cubic spline through `(nodes[i], values[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    nodes: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(nodes: &[f64], values: &[f64]) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::dim("spline values", nodes.len(), values.len()));
        }
        if nodes.len() < 2 {
            return Err(Error::Validation("spline needs at least two nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("spline nodes must be strictly increasing".into()));
        }
        let n = nodes.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for k in 0..m {
                let i = k + 1;
                let h0 = nodes[i] - nodes[i - 1];
                let h1 = nodes[i + 1] - nodes[i];
                lo[k] = h0;
                di[k] = 2.0 * (h0 + h1);
                up[k] = h1;
                rhs[k] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            solve_tridiagonal(&lo, &di, &up, &mut rhs);
            second[1..n - 1].copy_from_slice(&rhs);
        }
        Ok(Self {
            nodes: nodes.to_vec(),
            values: values.to_vec(),
            second,
        })
    }

    fn interval(&self, s: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.partition_point(|&v| v <= s) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value and first derivative at `s` (cubic extrapolation outside the nodes).
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let j = self.interval(s);
        let (x0, x1) = (self.nodes[j], self.nodes[j + 1]);
        let h = x1 - x0;
        let a = (x1 - s) / h;
        let b = (s - x0) / h;
        let (m0, m1) = (self.second[j], self.second[j + 1]);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let value = a * y0 + b * y1 + h * h / 6.0 * ((a.powi(3) - a) * m0 + (b.powi(3) - b) * m1);
        let deriv = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1);
        (value, deriv)
    }

    /// Second derivative at `s`.
    pub fn second_derivative(&self, s: f64) -> f64 {
        let j = self.interval(s);
        let h = self.nodes[j + 1] - self.nodes[j];
        let b = (s - self.nodes[j]) / h;
        (1.0 - b) * self.second[j] + b * self.second[j + 1]
    }
}

/// Weights expressing a uniform natural spline's value and derivative at
/// fixed parameters as linear combinations of its node values.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    num_nodes: usize,
    params: Vec<f64>,
    value: Vec<f64>,
    deriv: Vec<f64>,
}

impl SplineBasis {
    /// Basis for `num_nodes` uniform nodes on `[0, 1]`, evaluated at `params`.
    pub fn new(num_nodes: usize, params: &[f64]) -> Self {
        assert!(num_nodes >= 2, "spline needs at least two nodes");
        let nodes: Vec<f64> = (0..num_nodes).map(|j| j as f64 / (num_nodes - 1) as f64).collect();
        let mut value = vec![0.0; params.len() * num_nodes];
        let mut deriv = vec![0.0; params.len() * num_nodes];
        let mut unit = vec![0.0; num_nodes];
        for i in 0..num_nodes {
            unit.fill(0.0);
            unit[i] = 1.0;
            let cardinal = NaturalCubicSpline::new(&nodes, &unit).unwrap();
            for (m, &s) in params.iter().enumerate() {
                let (v, d) = cardinal.eval(s);
                value[m * num_nodes + i] = v;
                deriv[m * num_nodes + i] = d;
            }
        }
        Self {
            num_nodes,
            params: params.to_vec(),
            value,
            deriv,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn value_weights(&self, m: usize) -> &[f64] {
        &self.value[m * self.num_nodes..(m + 1) * self.num_nodes]
    }

    pub fn deriv_weights(&self, m: usize) -> &[f64] {
        &self.deriv[m * self.num_nodes..(m + 1) * self.num_nodes]
    }

    /// Position and velocity at parameter `m` for row-major node values `nodes`.
    pub fn eval_into(&self, m: usize, nodes: &[f64], dim: usize, q: &mut [f64], v: &mut [f64]) {
        q.fill(0.0);
        v.fill(0.0);
        let (wv, wd) = (self.value_weights(m), self.deriv_weights(m));
        for (i, p) in nodes.chunks_exact(dim).enumerate() {
            for k in 0..dim {
                q[k] += wv[i] * p[k];
                v[k] += wd[i] * p[k];
            }
        }
    }

    /// Adds the pullback of `(gq, gv)` at parameter `m` onto node gradients.
    pub fn pullback(&self, m: usize, gq: &[f64], gv: &[f64], dim: usize, out: &mut [f64]) {
        let (wv, wd) = (self.value_weights(m), self.deriv_weights(m));
        for (i, g) in out.chunks_exact_mut(dim).enumerate() {
            for k in 0..dim {
                g[k] += wv[i] * gq[k] + wd[i] * gv[k];
            }
        }
    }
}

/// Cubic spline path with pinned endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplinePath {
    start: Vec<f64>,
    end: Vec<f64>,
    /// Row-major `K × D` interior knots.
    knots: Vec<f64>,
}

/// Parameter of interior knot `j` (0-based) among `k` knots.
pub fn knot_param(j: usize, k: usize) -> f64 {
    (j + 1) as f64 / (k + 1) as f64
}

impl SplinePath {
    pub fn new(start: Vec<f64>, end: Vec<f64>, knots: Vec<f64>) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::dim("path endpoint", start.len(), end.len()));
        }
        if start.is_empty() || knots.len() % start.len() != 0 {
            return Err(Error::dim("path knots", start.len(), knots.len()));
        }
        Ok(Self { start, end, knots })
    }

    /// Straight segment with `k` knots placed on it.
    pub fn straight(start: &[f64], end: &[f64], k: usize) -> Self {
        Self::from_offsets(start, end, &vec![0.0; k * start.len()])
    }

    /// Knots given as offsets from the straight-line interpolant.
    pub fn from_offsets(start: &[f64], end: &[f64], offsets: &[f64]) -> Self {
        let d = start.len();
        assert_eq!(end.len(), d, "path endpoint dimension");
        assert_eq!(offsets.len() % d, 0, "knot offsets dimension");
        let k = offsets.len() / d;
        let mut knots = offsets.to_vec();
        for (j, knot) in knots.chunks_exact_mut(d).enumerate() {
            let s = knot_param(j, k);
            for i in 0..d {
                knot[i] += (1.0 - s) * start[i] + s * end[i];
            }
        }
        Self {
            start: start.to_vec(),
            end: end.to_vec(),
            knots,
        }
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn num_knots(&self) -> usize {
        self.knots.len() / self.dim()
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn end(&self) -> &[f64] {
        &self.end
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Offsets of the knots from the straight-line interpolant.
    pub fn offsets(&self) -> Vec<f64> {
        let d = self.dim();
        let k = self.num_knots();
        let mut off = self.knots.clone();
        for (j, o) in off.chunks_exact_mut(d).enumerate() {
            let s = knot_param(j, k);
            for i in 0..d {
                o[i] -= (1.0 - s) * self.start[i] + s * self.end[i];
            }
        }
        off
    }

    /// All `K + 2` nodes, start and end included, row-major.
    pub fn nodes(&self) -> Vec<f64> {
        let mut n = Vec::with_capacity(self.knots.len() + 2 * self.dim());
        n.extend_from_slice(&self.start);
        n.extend_from_slice(&self.knots);
        n.extend_from_slice(&self.end);
        n
    }

    /// Position and `s`-velocity at `s ∈ [0, 1]`.
    ///
    /// Panics when `s` lies outside `[0, 1]`.
    pub fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        assert!((0.0..=1.0).contains(&s), "spline parameter {s} outside [0, 1]");
        let d = self.dim();
        if s == 0.0 || s == 1.0 {
            // Endpoints are returned verbatim so that pinning is exact.
            let basis = SplineBasis::new(self.num_knots() + 2, &[s]);
            let mut q = vec![0.0; d];
            let mut v = vec![0.0; d];
            basis.eval_into(0, &self.nodes(), d, &mut q, &mut v);
            let q = if s == 0.0 { self.start.clone() } else { self.end.clone() };
            return (q, v);
        }
        let basis = SplineBasis::new(self.num_knots() + 2, &[s]);
        let mut q = vec![0.0; d];
        let mut v = vec![0.0; d];
        basis.eval_into(0, &self.nodes(), d, &mut q, &mut v);
        (q, v)
    }

    /// Samples `n ≥ 2` evenly spaced positions along the path, endpoints included.
    pub fn polyline(&self, n: usize) -> Vec<Vec<f64>> {
        let n = n.max(2);
        let params: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let basis = SplineBasis::new(self.num_knots() + 2, &params);
        let nodes = self.nodes();
        let d = self.dim();
        let mut v = vec![0.0; d];
        (0..n)
            .map(|m| {
                if m == 0 {
                    return self.start.clone();
                }
                if m == n - 1 {
                    return self.end.clone();
                }
                let mut q = vec![0.0; d];
                basis.eval_into(m, &nodes, d, &mut q, &mut v);
                q
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolates_nodes_and_reproduces_cubic_free_affine() {
        let nodes = [0.0, 0.3, 0.5, 1.0];
        let sp = NaturalCubicSpline::new(&nodes, &[1.0, 1.6, 2.0, 3.0]).unwrap();
        for (x, y) in nodes.iter().zip([1.0, 1.6, 2.0, 3.0]) {
            assert!((sp.eval(*x).0 - y).abs() < 1e-14);
        }
        for s in [0.1, 0.45, 0.77] {
            let (v, d) = sp.eval(s);
            assert!((v - (1.0 + 2.0 * s)).abs() < 1e-13);
            assert!((d - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn natural_boundary_conditions() {
        let sp = NaturalCubicSpline::new(&[0.0, 0.25, 0.5, 0.75, 1.0], &[0.0, 1.0, -1.0, 2.0, 0.5]).unwrap();
        assert!(sp.second_derivative(0.0).abs() < 1e-12);
        assert!(sp.second_derivative(1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_tridiagonal_solve() {
        // Independent check: assemble the natural-spline system as a dense
        // matrix and solve it by Gaussian elimination.
        let x = [0.0, 0.2, 0.45, 0.7, 1.0];
        let y = [0.3, -0.2, 0.8, 0.1, -0.5];
        let n = x.len();
        let mut a = vec![vec![0.0f64; n]; n];
        let mut b = vec![0.0; n];
        a[0][0] = 1.0;
        a[n - 1][n - 1] = 1.0;
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            a[i][i - 1] = h0;
            a[i][i] = 2.0 * (h0 + h1);
            a[i][i + 1] = h1;
            b[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut m = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * m[k]).sum();
            m[r] = (b[r] - s) / a[r][r];
        }
        let sp = NaturalCubicSpline::new(&x, &y).unwrap();
        for i in 0..n {
            assert!((sp.second_derivative(x[i]) - m[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(NaturalCubicSpline::new(&[0.0], &[1.0]).is_err());
        assert!(NaturalCubicSpline::new(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn straight_path_is_linear_interpolation() {
        let p = SplinePath::straight(&[0.0, 1.0], &[2.0, -1.0], 15);
        for s in [0.0, 0.13, 0.5, 0.91, 1.0] {
            let (q, v) = p.eval(s);
            assert!((q[0] - 2.0 * s).abs() < 1e-12 && (q[1] - (1.0 - 2.0 * s)).abs() < 1e-12);
            assert!((v[0] - 2.0).abs() < 1e-11 && (v[1] + 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn single_displaced_knot_is_interpolated() {
        let p = SplinePath::from_offsets(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.7]);
        let (q, _) = p.eval(0.5);
        assert!((q[0] - 0.5).abs() < 1e-14 && (q[1] - 0.7).abs() < 1e-14);
        assert_eq!(p.knots(), &[0.5, 0.7]);
        assert_eq!(p.offsets(), vec![0.0, 0.7]);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn parameter_out_of_range() {
        SplinePath::straight(&[0.0], &[1.0], 3).eval(1.5);
    }

    #[test]
    fn polyline_hits_endpoints() {
        let p = SplinePath::from_offsets(&[0.0, 0.0], &[1.0, 1.0], &[0.3, -0.2, 0.1, 0.4]);
        let line = p.polyline(64);
        assert_eq!(line.len(), 64);
        assert_eq!(line[0], vec![0.0, 0.0]);
        assert_eq!(line[63], vec![1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn endpoints_pinned_exactly(
            start in proptest::collection::vec(-5.0f64..5.0, 3),
            end in proptest::collection::vec(-5.0f64..5.0, 3),
            offsets in proptest::collection::vec(-2.0f64..2.0, 12),
        ) {
            let p = SplinePath::from_offsets(&start, &end, &offsets);
            prop_assert_eq!(p.eval(0.0).0, start);
            prop_assert_eq!(p.eval(1.0).0, end);
        }

        #[test]
        fn continuous_value_and_derivative(
            offsets in proptest::collection::vec(-2.0f64..2.0, 8),
            j in 0usize..4,
        ) {
            let p = SplinePath::from_offsets(&[0.0, 0.0], &[1.0, 2.0], &offsets);
            let s = knot_param(j, 4);
            let (ql, vl) = p.eval(s - 1e-9);
            let (qr, vr) = p.eval(s + 1e-9);
            for k in 0..2 {
                prop_assert!((ql[k] - qr[k]).abs() < 1e-6);
                prop_assert!((vl[k] - vr[k]).abs() < 1e-5);
            }
        }
    }
}
