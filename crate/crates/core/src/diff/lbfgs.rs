//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Stop once the max-norm of the gradient drops below this.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 10,
            memory: 10,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 20,
            grad_tol: 1e-10,
        }
    }
}

impl LbfgsOptions {
    pub fn with_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iters: usize,
    pub evals: usize,
    /// The line search could not find sufficient decrease; `x` is the best
    /// iterate reached before that.
    pub line_search_failed: bool,
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// The returned value never exceeds `f(x0)`. A non-finite starting value is
/// returned unchanged with zero iterations.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (mut fx, mut g) = f(x0);
    let mut res = LbfgsResult {
        x: x0.to_vec(),
        f: fx,
        grad: g.clone(),
        iters: 0,
        evals: 1,
        line_search_failed: false,
    };
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return res;
    }
    let mut x = x0.to_vec();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    for _ in 0..opts.max_iters {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.grad_tol {
            break;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            res.evals += 1;
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + opts.c1 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= opts.shrink;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            res.line_search_failed = true;
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == opts.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        } else {
            // Armijo-only steps can end in negative curvature; stale pairs
            // would otherwise keep producing vanishing directions.
            history.clear();
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        res.iters += 1;
    }
    res.x = x;
    res.f = fx;
    res.grad = g;
    res
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted_quadratic(c: Vec<f64>) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) {
        move |x| {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            (0.5 * dot(&d, &d), d)
        }
    }

    #[test]
    fn stationary_start_does_not_move() {
        let r = lbfgs_minimize(shifted_quadratic(vec![1.0, 2.0]), &[1.0, 2.0], &LbfgsOptions::with_iters(10));
        assert_eq!(r.x, vec![1.0, 2.0]);
        assert_eq!(r.f, 0.0);
    }

    #[test]
    fn reaches_analytic_minimizer() {
        let r = lbfgs_minimize(shifted_quadratic(vec![1.0, 2.0]), &[0.0, 0.0], &LbfgsOptions::with_iters(10));
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn zero_iterations_return_start() {
        let r = lbfgs_minimize(shifted_quadratic(vec![1.0, 2.0]), &[0.0, 0.0], &LbfgsOptions::with_iters(0));
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.f, 2.5);
        assert_eq!(r.iters, 0);
    }

    #[test]
    fn rosenbrock_progresses_monotonically() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        };
        let x0 = [-1.2, 1.0];
        let f0 = rosen(&x0).0;
        let mut last = f0;
        for iters in [1, 5, 20, 200] {
            let r = lbfgs_minimize(rosen, &x0, &LbfgsOptions::with_iters(iters));
            assert!(r.f <= last + 1e-12);
            last = r.f;
        }
        let r = lbfgs_minimize(rosen, &x0, &LbfgsOptions::with_iters(200));
        assert!(last < 1e-8, "{last} {r:?}");
    }

    #[test]
    fn non_finite_region_is_not_entered() {
        // ln is undefined left of zero; a unit step from 0.5 along -g lands there.
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                (f64::NAN, vec![f64::NAN])
            } else {
                (x[0] - x[0].ln() * 0.1, vec![1.0 - 0.1 / x[0]])
            }
        };
        let r = lbfgs_minimize(f, &[0.5], &LbfgsOptions::with_iters(30));
        assert!((r.x[0] - 0.1).abs() < 1e-6, "{:?}", r.x);
    }
}
