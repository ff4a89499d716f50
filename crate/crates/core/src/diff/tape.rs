//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every elementary operation on [`Var`]s together with
//! its local partial derivatives; [`Tape::gradient`] sweeps the record
//! backwards once. Meant for small ad hoc objectives and for cross-checking
//! the hand-derived network gradients, not for the training hot path.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::param::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [(usize, f64); 2],
    arity: u8,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, #{})", self.value, self.index)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, parents: [(usize, f64); 2], arity: u8) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { parents, arity });
        nodes.len() - 1
    }

    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push([(0, 0.0); 2], 0);
        Var {
            tape: self,
            index,
            value,
        }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    /// Adjoints of every recorded node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.index] = 1.0;
        for i in (0..=output.index).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            for &(p, w) in &node.parents[..node.arity as usize] {
                adj[p] += a * w;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    fn unary(self, value: f64, d: f64) -> Var<'t> {
        let index = self.tape.push([(self.index, d), (0, 0.0)], 1);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        let index = self.tape.push([(self.index, da), (other.index, db)], 2);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(self.value.cos(), -self.value.sin())
    }

    pub fn sqrt(self) -> Var<'t> {
        let r = self.value.sqrt();
        self.unary(r, 0.5 / r)
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        self.unary(self.value.powi(n), f64::from(n) * self.value.powi(n - 1))
    }

    pub fn tanh(self) -> Var<'t> {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    pub fn relu(self) -> Var<'t> {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(self.value * c, c)
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.unary(self.value + c, 1.0)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let inv = 1.0 / o.value;
        self.binary(o, self.value * inv, inv, -self.value * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.offset(c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.offset(-c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

/// Sums a sequence of tape variables (zero for an empty sequence).
pub fn sum<'t>(tape: &'t Tape, vars: impl IntoIterator<Item = Var<'t>>) -> Var<'t> {
    vars.into_iter().fold(tape.constant(0.0), |acc, v| acc + v)
}

/// Reverse-mode gradient of `loss` at `at`.
///
/// A non-finite loss or gradient is reported as [`Error::NonFinite`] naming
/// the parameter segment where the problem shows up first.
pub fn grad<F>(loss: F, at: &ParamVector) -> Result<ParamVector>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let inputs: Vec<Var<'_>> = at.values().iter().map(|&v| tape.var(v)).collect();
    let out = loss(&tape, &inputs);
    let adj = tape.gradient(out);
    let g: Vec<f64> = inputs.iter().map(|v| adj[v.index()]).collect();
    let g = ParamVector::from_values(at.layout().clone(), g)?;
    if !out.value().is_finite() {
        at.check_finite()?;
        g.check_finite()?;
        return Err(Error::NonFinite {
            segment: "<loss>".into(),
        });
    }
    g.check_finite()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_squared_norm() {
        let p = ParamVector::from_slice("p", &[3.0, 4.0]);
        let g = grad(|t, v| sum(t, v.iter().map(|x| (*x * *x) * 0.5)), &p).unwrap();
        assert_eq!(g.values(), &[3.0, 4.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = ParamVector::from_slice("p", &[1.0, -2.0, 5.0]);
        let g = grad(|t, _| t.constant(42.0), &p).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn elementary_rules() {
        let p = ParamVector::from_slice("p", &[0.7, 1.9]);
        let g = grad(|_, v| (v[0].sin() * v[1].exp()) / v[1].sqrt() + v[0].ln().tanh(), &p).unwrap();
        let (a, b) = (0.7f64, 1.9f64);
        let th = a.ln().tanh();
        let da = a.cos() * b.exp() / b.sqrt() + (1.0 - th * th) / a;
        let db = a.sin() * (b.exp() / b.sqrt() - 0.5 * b.exp() * b.powf(-1.5));
        assert!((g.values()[0] - da).abs() < 1e-12);
        assert!((g.values()[1] - db).abs() < 1e-12);
    }

    #[test]
    fn non_finite_loss_names_segment() {
        let p = ParamVector::from_slice("weights", &[0.0]);
        match grad(|_, v| v[0].ln(), &p) {
            Err(Error::NonFinite { segment }) => assert_eq!(segment, "weights"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
